#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cogsig/datasets.hpp"
#include "cogsig/models.hpp"

namespace cogsig {

// Auxiliary target: a gaze dim of the dataset manifest, a combined EEG band
// (EEG_t/a/b/g, built from the eight electrode-mean band dims) or
// "word_frequency".
struct AuxTaskSpec {
  std::string source;
  std::size_t n_bins = 10;
  double lambda = 1.0;

  // "SOURCE", "SOURCE:BINS" or "SOURCE:BINS:LAMBDA"
  static AuxTaskSpec parse(std::string_view spec);
};

// Lower-cased word -> corpus count.
using FrequencyLexicon = std::map<std::string, std::uint64_t>;

FrequencyLexicon parse_frequency_lexicon(std::istream& in);
void write_frequency_lexicon(std::ostream& out, const FrequencyLexicon& lexicon);
FrequencyLexicon count_frequencies(const Corpus& corpus);

// Per instance, per token class in [0, n_bins). Cognitive sources are
// min-max normalized with statistics fitted on `fit` and then discretized;
// frequency uses log10(count) scaled by the largest log count (out-of-lexicon
// words count 1 and land in bin 0).
std::vector<std::vector<std::size_t>> make_aux_targets(const Dataset& dataset, const AuxTaskSpec& spec,
                                                       std::span<const std::size_t> fit,
                                                       const FrequencyLexicon* frequencies = nullptr);

struct MtlTask {
  std::string name;
  std::string head;  // tasks naming the same head share it
  std::vector<std::string> class_names;
  double lambda = 1.0;
  std::vector<std::vector<std::size_t>> targets;  // per instance, per token
  bool main = false;
};

// Binary sentiment can be learned as NEUTRAL / NOT-NEUTRAL instead of the
// polarity labels.
enum class SentimentLabeling { polarity, neutrality };

// Token-level main task; sentence labels are broadcast to every token.
MtlTask make_main_task(const Dataset& dataset, SentimentLabeling labeling = SentimentLabeling::polarity);
MtlTask make_aux_task(const Dataset& dataset, const AuxTaskSpec& spec, std::span<const std::size_t> fit,
                      const FrequencyLexicon* frequencies = nullptr);

struct MtlConfig {
  TrunkConfig net;
  std::size_t epochs = 8;
  double lr = 0.2;
  std::size_t halve_every = 0;
  std::uint64_t seed = 1;
  // Feed the normalized manifest dims as network inputs.
  bool cognitive_inputs = false;
};

struct ScheduledStep {
  std::size_t task = 0;
  std::size_t instance = 0;  // index into the dataset

  bool operator==(const ScheduledStep&) const = default;
};

// One epoch of updates: every task visits each training instance once, in an
// order drawn from the task's own seeded stream; the streams are merged by a
// separate seeded sampler that picks a task with probability proportional to
// its remaining instances.
std::vector<ScheduledStep> mtl_schedule(std::span<const MtlTask> tasks, std::span<const std::size_t> train,
                                        std::size_t epoch, std::uint64_t seed);

struct MtlModel {
  TrunkNet net;
  std::vector<std::string> vocabulary;  // index 0 is the unknown token
  std::vector<std::string> manifest;
  NormalizationStats normalization;
  std::vector<std::string> task_names;
  std::vector<std::string> task_heads;
  std::vector<std::size_t> majority_class;  // per task, from the training targets
  std::vector<std::vector<std::string>> class_names;

  TokenBatch batch(const Instance& inst, const std::vector<std::size_t>* labels = nullptr) const;
};

// After each applied update, a hash of the trunk and of every head trained by
// a task with non-zero weight. Heads of weight-0 tasks never change, so they
// are left out and trajectories compare across task sets.
using Trajectory = std::vector<std::uint64_t>;

std::uint64_t parameter_hash(const TrunkNet& net);

MtlModel train_multitask(const Dataset& dataset, std::span<const MtlTask> tasks, std::span<const std::size_t> train,
                         const MtlConfig& config, Trajectory* trajectory = nullptr);

// Same initialisation and update rule as train_multitask, but the updates
// follow the given steps. Used to check schedule equivalences.
MtlModel replay_multitask(const Dataset& dataset, std::span<const MtlTask> tasks, std::span<const std::size_t> train,
                          const MtlConfig& config, std::span<const std::vector<ScheduledStep>> epochs,
                          Trajectory* trajectory = nullptr);

struct HeadAccuracy {
  std::string task;
  double accuracy = 0.0;
  double majority_accuracy = 0.0;
  std::optional<double> accuracy_without_o;  // ner main task: gold-O tokens excluded
  std::size_t tokens = 0;
};

std::vector<HeadAccuracy> evaluate_multitask(const MtlModel& model, const Dataset& dataset,
                                             std::span<const MtlTask> tasks, std::span<const std::size_t> indices);

}  // namespace cogsig
