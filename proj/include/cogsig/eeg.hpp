#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cogsig/ingest.hpp"

namespace cogsig {

struct FrequencyInterval {
  double lo_hz;
  double hi_hz;
};

FrequencyInterval band_interval(Band band);

// Closed intervals; gamma1 and gamma2 share 40 Hz, which resolves to gamma1.
std::optional<Band> band_of_frequency(double hz);

enum class EegWindow { ffd, trt };
enum class EegReduction { electrode_mean, band_mean, none };
enum class EegWeighting { duration, uniform };

std::string_view to_string(EegWindow w);
std::string_view to_string(EegReduction r);
EegWindow parse_eeg_window(std::string_view s);
EegReduction parse_eeg_reduction(std::string_view s);

struct WordEegFeatures {
  BandMatrix bands{};
  EegWindow window = EegWindow::ffd;
};

struct WordEegResult {
  // Absent for words without a usable fixation.
  std::vector<std::optional<WordEegFeatures>> words;
  std::vector<std::string> warnings;
};

// `events` are the trial's filtered fixations; `records` the trial's EEG
// records (any order). ffd takes the record of each word's first fixation;
// trt averages all of the word's fixations, duration-weighted by default.
WordEegResult word_eeg(std::span<const EegFixationRecord> records, std::span<const FixationEvent> events,
                       std::size_t sentence_length, EegWindow window,
                       EegWeighting weighting = EegWeighting::duration, bool strict = false);

std::size_t reduced_size(EegReduction reduction);
// electrode_mean: 8 values in band order; band_mean: 105 values in electrode
// order; none: 840 values, band-major.
std::vector<double> reduce_eeg(const BandMatrix& bands, EegReduction reduction);
// The same reductions over a flat band-major 840-vector.
std::vector<double> reduce_flat(std::span<const double> band_major, EegReduction reduction);
std::vector<std::string> eeg_dim_names(EegReduction reduction);

struct CombinedBands {
  double theta = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;

  bool operator==(const CombinedBands&) const = default;
};

CombinedBands combine_bands(std::span<const double, kBandCount> bands);
std::span<const std::string_view> combined_band_names();  // EEG_t, EEG_a, EEG_b, EEG_g

// Reduced per-word EEG values per trial; absent entries are non-fixated words.
using EegTable = std::map<TrialKey, std::vector<std::optional<std::vector<double>>>>;

struct EegOptions {
  EegWindow window = EegWindow::ffd;
  EegReduction reduction = EegReduction::electrode_mean;
  EegWeighting weighting = EegWeighting::duration;
  double min_duration_ms = 100.0;
  bool strict = false;
  std::size_t threads = 1;
};

struct EegExtraction {
  EegTable table;
  std::vector<std::string> warnings;
};

EegExtraction extract_eeg(const Corpus& corpus, const FixationLog& fixations,
                          std::span<const EegFixationRecord> records, const EegOptions& opts = {});

void write_eeg_features(std::ostream& out, const EegTable& table, EegWindow window, EegReduction reduction);

struct EegFeatureFile {
  EegTable table;
  std::optional<EegWindow> window;
  std::optional<EegReduction> reduction;
};

EegFeatureFile parse_eeg_features(std::istream& in, const Corpus& corpus, const ParseOptions& opts = {});

}  // namespace cogsig
