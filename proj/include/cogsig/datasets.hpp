#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cogsig/aggregate.hpp"
#include "cogsig/ingest.hpp"

namespace cogsig {

// How a three-way sentiment corpus becomes a binary task.
enum class NeutralPolicy { drop_all, drop_train_only };

std::string_view to_string(NeutralPolicy p);
NeutralPolicy parse_neutral_policy(std::string_view s);

struct Instance {
  std::string id;     // sentence id; "<sentence id>#<relation>" for relclass
  std::string group;  // sentence id; folds never split a group
  std::vector<std::string> tokens;
  // One tag per token for ner, a single label for sentence-level tasks.
  std::vector<std::string> labels;
  std::vector<FeatureRow> token_features;  // empty for baseline datasets
  FeatureRow sentence_features;            // mean of token_features (sentence tasks)

  bool operator==(const Instance&) const = default;
};

struct Dataset {
  Task task = Task::ner;
  std::vector<std::string> manifest;  // cognitive dims, in concatenation order
  NeutralPolicy neutral_policy = NeutralPolicy::drop_all;
  std::vector<Instance> instances;

  bool operator==(const Dataset&) const = default;
};

struct FeatureBlock {
  std::string name;  // "gaze", "eeg", "lexicon", ...
  const TokenFeatures* features = nullptr;
};

struct AssembleOptions {
  // Task to build; defaults to the corpus task. A sentiment3 corpus may be
  // assembled as sentiment2.
  std::optional<Task> task;
  NeutralPolicy neutral_policy = NeutralPolicy::drop_all;
  // Sentences absent from a feature block are an error instead of zeros.
  bool strict = false;
};

Dataset assemble(const Corpus& corpus, std::span<const FeatureBlock> blocks, const AssembleOptions& opts = {});

enum class Section { train, dev, test };
std::string_view to_string(Section s);

struct FoldPlan {
  std::size_t k = 0;
  std::array<double, 3> ratios{};  // train, dev, test
  std::uint64_t seed = 0;
  std::map<std::string, std::size_t> assignment;  // group -> fold

  std::size_t dev_folds() const;
  Section section_of(std::string_view group, std::size_t fold) const;
  bool operator==(const FoldPlan&) const = default;
};

// Groups are shuffled with the seed and dealt round-robin into k folds. In
// fold f the test section is fold f, the dev section the next dev·k folds
// and the rest is training data. The test ratio must be 1/k and dev·k a
// whole number.
FoldPlan kfold_split(const Dataset& dataset, std::size_t k, std::array<double, 3> ratios, std::uint64_t seed);

// Indices of the instances in `section` of `fold`. Under drop_train_only,
// neutral instances of a binary sentiment dataset are left out of training.
std::vector<std::size_t> section_indices(const Dataset& dataset, const FoldPlan& plan, std::size_t fold,
                                         Section section);

// Min-max statistics over the cognitive vectors (token vectors for ner,
// sentence vectors otherwise) of the given instances.
NormalizationStats fit_dataset_normalization(const Dataset& dataset, std::span<const std::size_t> indices);

// One token per line: token, one bin column per manifest dim, label; a blank
// line after every sentence. Bins use `stats` (fitted on training data).
void emit_conll(std::ostream& out, const Dataset& dataset, std::span<const std::size_t> indices,
                const NormalizationStats* stats, std::size_t n_bins = 10);

struct ConllSentence {
  std::vector<std::string> tokens;
  std::vector<std::vector<std::size_t>> bins;
  std::vector<std::string> labels;

  bool operator==(const ConllSentence&) const = default;
};

// Lines starting with "#provenance<TAB>" are skipped.
std::vector<ConllSentence> parse_conll(std::istream& in);

void write_dataset(std::ostream& out, const Dataset& dataset);
Dataset parse_dataset(std::istream& in, const ParseOptions& opts = {});

void write_fold_plan(std::ostream& out, const FoldPlan& plan);
FoldPlan parse_fold_plan(std::istream& in);

}  // namespace cogsig
