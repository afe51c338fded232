#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cogsig/eeg.hpp"
#include "cogsig/gaze.hpp"
#include "cogsig/ingest.hpp"

namespace cogsig {

using FeatureRow = std::vector<double>;

// Per-subject token rows; absent rows mean "no value for this subject"
// (e.g. EEG of a word the subject never fixated).
struct SubjectFeatures {
  std::vector<std::string> dims;
  std::map<TrialKey, std::vector<std::optional<FeatureRow>>> trials;
};

// One dense row per token, keyed by sentence id.
struct TokenFeatures {
  std::vector<std::string> dims;
  std::map<std::string, std::vector<FeatureRow>> sentences;

  bool operator==(const TokenFeatures&) const = default;
};

struct SubjectAggregation {
  enum class Mode { single, mean_all, mean_subset };
  Mode mode = Mode::mean_all;
  std::vector<std::string> subjects;  // one for single, the subset for mean_subset

  // "mean", "single:ID" or "subset:ID,ID,..."
  static SubjectAggregation parse(std::string_view spec);
  std::string to_string() const;
  // Subjects this aggregation averages over, validated against `known`.
  std::vector<std::string> resolve(std::span<const std::string> known) const;
};

SubjectFeatures gaze_subject_features(const GazeTable& table, std::span<const std::string_view> dims);
SubjectFeatures eeg_subject_features(const EegTable& table, std::vector<std::string> dims);

// Mean over the selected subjects that have the trial. Rows a subject lacks
// are left out of that token's mean; a token no selected subject has a row
// for gets zeros. Sentences no selected subject read are omitted.
TokenFeatures average_subjects(const SubjectFeatures& features, const SubjectAggregation& agg);

// Named gaze feature sets: "basic" (NFIX FFD TRT GD GPT), "mtl" (NFIX MFD
// FFD TRT FIXP) and "extended" (basic + MFD, FIXP and previous/next-word
// FFD, TRT, NFIX).
std::vector<std::string> gaze_feature_set(std::string_view name);

// Subject-averaged gaze rows for the requested dims. Besides the per-subject
// measures, accepts "FIXP" and "prev_X"/"next_X" for any of them (zero at
// sentence edges).
TokenFeatures build_gaze_features(const GazeTable& table, const Corpus& corpus, const SubjectAggregation& agg,
                                  std::span<const std::string> dims);

struct NormalizationStats {
  std::vector<double> min;
  std::vector<double> max;
  bool fitted = false;

  bool operator==(const NormalizationStats&) const = default;
};

NormalizationStats fit_normalization(std::span<const FeatureRow> rows, std::size_t dims);
// (v - min) / (max - min) clipped to [0, 1]; constant dimensions map to 0.
FeatureRow apply_normalization(const NormalizationStats& stats, std::span<const double> v);

std::size_t discretize(double normalized, std::size_t n_bins);
std::vector<double> one_hot(std::size_t bin, std::size_t n_bins);

struct TypeLexicon {
  struct Entry {
    FeatureRow values;
    std::size_t count = 0;

    bool operator==(const Entry&) const = default;
  };

  std::vector<std::string> dims;
  std::map<std::string, Entry> entries;
  std::string unknown_policy = "zeros+flag";

  bool operator==(const TypeLexicon&) const = default;
};

inline constexpr std::string_view kUnknownIndicatorDim = "is_unknown";

// Mean vector per lower-cased type. Tokens of sentences missing from
// `features` are skipped.
TypeLexicon build_type_lexicon(const Corpus& corpus, const TokenFeatures& features);

struct CoverageReport {
  std::size_t tokens = 0;
  std::size_t unknown = 0;
  double unknown_percent = 0.0;
};

struct LexiconApplication {
  TokenFeatures features;  // lexicon dims + is_unknown
  CoverageReport coverage;
};

LexiconApplication apply_type_lexicon(const TypeLexicon& lexicon, const Corpus& corpus);

// Highest-scoring n subjects; ties broken by subject id.
std::vector<std::string> select_best_subjects(const std::map<std::string, double>& scores, std::size_t n);

void write_lexicon(std::ostream& out, const TypeLexicon& lexicon);
TypeLexicon parse_lexicon(std::istream& in);

// Aggregated token features file: a {"dims":[...]} header line followed by
// {sentence_id, word_index, values} records.
void write_token_features(std::ostream& out, const TokenFeatures& features);
TokenFeatures parse_token_features(std::istream& in, const Corpus& corpus, const ParseOptions& opts = {});

}  // namespace cogsig
