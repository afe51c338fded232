#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cogsig/ingest.hpp"
#include "cogsig/jsonio.hpp"
#include "cogsig/models.hpp"

namespace cogsig {

// Percentages. For entity scoring `support` counts gold spans, for
// classification gold labels.
struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  std::size_t support = 0;
  std::size_t predicted = 0;
  std::size_t correct = 0;

  bool operator==(const Metrics&) const = default;
};

double f1_of(double precision, double recall);

// Half-open token range [begin, end).
struct EntitySpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string type;

  auto operator<=>(const EntitySpan&) const = default;
};

// An I-X that does not continue an X entity opens a new one.
std::vector<EntitySpan> extract_spans(std::span<const std::string> tags);

// Exact span and type match, micro-averaged over sentences. Accuracy is
// token-level tag accuracy.
Metrics entity_prf1(std::span<const Prediction> gold, std::span<const Prediction> pred);
double accuracy(std::span<const std::string> gold, std::span<const std::string> pred);
// Accuracy plus macro-averaged precision, recall and F1 over the classes
// occurring in gold or predictions.
Metrics classification_metrics(std::span<const std::string> gold, std::span<const std::string> pred);

// Corpus-level score built from per-instance sufficient statistics, so a
// permutation replicate only re-sums the statistics.
struct Scorer {
  std::string name;
  std::size_t stat_count = 0;
  std::function<void(const Prediction& gold, const Prediction& pred, std::span<double> stats)> stats;
  std::function<double(std::span<const double> totals)> score;
};

Scorer entity_f1_scorer();
Scorer accuracy_scorer();
Scorer macro_f1_scorer(std::vector<std::string> classes);
// Entity F1 for ner, macro F1 over `classes` otherwise.
Scorer default_scorer(Task task, std::vector<std::string> classes);

// Applies the scorer to whole prediction sets.
double score_predictions(const Scorer& scorer, std::span<const Prediction> gold, std::span<const Prediction> pred);

struct PermutationOptions {
  std::size_t replicates = 10000;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  // Instances sharing a group swap together; empty means one unit per instance.
  std::vector<std::string> groups;
};

struct PermutationResult {
  double observed = 0.0;  // |score(A) - score(B)|
  double p_value = 1.0;
  std::size_t replicates = 0;
};

// Paired approximate randomization with add-one smoothing.
PermutationResult permutation_test(std::span<const Prediction> a, std::span<const Prediction> b,
                                   std::span<const Prediction> gold, const Scorer& scorer,
                                   const PermutationOptions& options = {});

enum class Stars { none, one, two };
std::string_view to_string(Stars s);  // "", "*", "**"

struct SignificanceResult {
  double p_value = 1.0;
  double alpha = 0.01;
  std::size_t n_hypotheses = 1;
  double threshold = 0.01;
  Stars stars = Stars::none;

  bool operator==(const SignificanceResult&) const = default;
};

SignificanceResult bonferroni(double p, double alpha, std::size_t n);

// ---------------------------------------------------------------- report

struct FoldMetrics {
  std::size_t fold = 0;
  Metrics metrics;
};

struct RunResult {
  Task task = Task::ner;
  std::string config;  // "baseline", "gaze", "eeg", "gaze+eeg", ...
  std::vector<FoldMetrics> folds;
  std::optional<SignificanceResult> significance;  // against the baseline
  std::string compared_with;
};

struct ReportCell {
  Task task = Task::ner;
  std::string config;
  Metrics mean;  // support counts are summed
  std::vector<FoldMetrics> folds;  // sorted by fold
  std::optional<SignificanceResult> significance;
  std::string compared_with;
};

struct MetricsReport {
  std::vector<ReportCell> cells;
  std::vector<std::string> warnings;
};

MetricsReport make_report(std::span<const RunResult> runs);
ordered_json report_json(const MetricsReport& report);
// Rows baseline, gaze, EEG, gaze+EEG (then any other configs); P, R and F1
// columns per task. Stars mark F1 cells.
std::string render_table(const MetricsReport& report);

}  // namespace cogsig
