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

inline constexpr double kMinFixationMs = 100.0;

// Word-level reading measures for one subject; durations in milliseconds.
struct WordGazeFeatures {
  int nfix = 0;
  double ffd = 0.0;  // first fixation duration
  double gd = 0.0;   // gaze duration (first-pass run)
  double trt = 0.0;  // total reading time
  double gpt = 0.0;  // go-past time
  double mfd = 0.0;  // mean fixation duration, trt / nfix

  bool operator==(const WordGazeFeatures&) const = default;
};

// Per-subject feature names, in WordGazeFeatures field order.
std::span<const std::string_view> gaze_feature_names();
// Looks a per-subject measure up by name ("NFIX", "FFD", ...).
double gaze_value(const WordGazeFeatures& f, std::string_view name);

std::vector<FixationEvent> filter_fixations(std::span<const FixationEvent> events,
                                            double min_duration_ms = kMinFixationMs);

// `events` must be filtered and ordered by seq. Under `strict`, events
// shorter than `min_duration_ms` are a precondition violation.
std::vector<WordGazeFeatures> compute_word_gaze(std::span<const FixationEvent> events, std::size_t sentence_length,
                                                bool strict = false, double min_duration_ms = kMinFixationMs);

// Fraction of the subjects that have a trial who fixated the word at least
// once; subjects without a trial are passed as nullopt and excluded from the
// denominator.
double fixation_probability(std::span<const std::optional<int>> nfix_by_subject);

using GazeTable = std::map<TrialKey, std::vector<WordGazeFeatures>>;

// FIXP for every word of `sentence_id`, over the subjects in `subjects`.
std::vector<double> fixation_probability(const GazeTable& table, std::string_view sentence_id,
                                         std::span<const std::string> subjects);

struct GazeOptions {
  double min_duration_ms = kMinFixationMs;
  bool strict = false;
  std::size_t threads = 1;
};

// Filters and computes measures for every trial in the log.
GazeTable extract_gaze(const Corpus& corpus, const FixationLog& fixations, const GazeOptions& opts = {});

void write_gaze_features(std::ostream& out, const GazeTable& table);
GazeTable parse_gaze_features(std::istream& in, const Corpus& corpus, const ParseOptions& opts = {});

}  // namespace cogsig
