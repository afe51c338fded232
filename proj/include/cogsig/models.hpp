#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cogsig/aggregate.hpp"
#include "cogsig/datasets.hpp"

namespace cogsig {

// One label per token (token-level tasks) or a single label.
using Prediction = std::vector<std::string>;

// Illegal I-X (not continuing an X entity) becomes B-X.
void repair_bio(std::vector<std::string>& tags);

// ---------------------------------------------------------------- logistic

struct LogisticConfig {
  double lr = 0.5;
  std::size_t epochs = 200;
  double l2 = 1e-4;
  std::size_t batch_size = 0;   // 0 = full batch
  std::size_t halve_every = 0;  // halve lr every n epochs; 0 = never
  std::uint64_t seed = 1;
  // Fitted on the training instances when absent.
  std::optional<NormalizationStats> normalization;
};

// Multinomial logistic regression over a bag of lower-cased token indicators
// followed by the normalized sentence cognitive vector.
struct LogisticModel {
  std::vector<std::string> classes;
  std::vector<std::string> manifest;
  std::vector<std::string> vocabulary;
  NormalizationStats normalization;
  std::vector<double> weights;  // classes x features, row-major
  std::vector<double> bias;
  std::vector<double> loss_history;  // training objective after each epoch
  LogisticConfig config;

  std::size_t feature_count() const { return vocabulary.size() + manifest.size(); }
  std::vector<double> predict_proba(const Instance& inst) const;
  std::string predict(const Instance& inst) const;
};

LogisticModel train_logistic(const Dataset& dataset, std::span<const std::size_t> train, const LogisticConfig& config);

// ---------------------------------------------------------------- tagger

struct TaggerConfig {
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  std::size_t n_bins = 10;
  std::optional<NormalizationStats> normalization;
};

// Averaged perceptron with greedy left-to-right decoding. Cognitive dims are
// normalized, binned and fired as indicators for the token and its
// neighbours; bin 0 fires nothing, so all-zero dims leave the tagger as the
// baseline.
struct PerceptronTagger {
  std::vector<std::string> tags;
  std::vector<std::string> manifest;
  NormalizationStats normalization;
  std::map<std::string, std::vector<double>> weights;  // averaged, one value per tag
  TaggerConfig config;

  std::vector<std::string> tag(const Instance& inst) const;
};

PerceptronTagger train_tagger(const Dataset& dataset, std::span<const std::size_t> train, const TaggerConfig& config);

// ---------------------------------------------------------------- trunk net

struct HeadSpec {
  std::string name;
  std::size_t classes = 0;

  bool operator==(const HeadSpec&) const = default;
};

struct TrunkConfig {
  std::size_t embedding_dim = 32;
  std::size_t hidden_dim = 32;
  double init_scale = 0.1;  // embedding init sd
};

// Token-level examples for one head: token ids, an n x C row-major block of
// cognitive inputs (empty when C = 0) and class labels.
struct TokenBatch {
  std::vector<std::size_t> tokens;
  std::vector<double> cognitive;
  std::vector<std::size_t> labels;
};

class TrunkNet;

struct TrunkGradients {
  std::map<std::size_t, std::vector<double>> embedding;  // rows touched by the batch
  std::vector<double> hidden_w;
  std::vector<double> hidden_b;
  std::vector<std::vector<double>> head_w;
  std::vector<std::vector<double>> head_b;

  // Gradient of parameter group g laid out like TrunkNet::group(g).
  std::vector<double> dense(const TrunkNet& net, std::size_t g) const;
};

// Embedding -> tanh hidden layer over [embedding, cognitive] -> one softmax
// head per task. Heads start at zero, so an untrained head is uniform.
class TrunkNet {
 public:
  TrunkNet() = default;
  TrunkNet(std::size_t vocab, std::size_t cognitive_dims, std::vector<HeadSpec> heads, const TrunkConfig& config,
           std::uint64_t seed);

  std::size_t vocab_size() const { return vocab_; }
  std::size_t cognitive_dims() const { return cognitive_; }
  std::size_t embedding_dim() const { return embedding_dim_; }
  std::size_t hidden_dim() const { return hidden_; }
  const std::vector<HeadSpec>& heads() const { return heads_; }
  std::size_t head_index(std::string_view name) const;

  std::size_t parameter_count() const;
  // embedding, hidden.W, hidden.b, then <head>.W and <head>.b per head.
  std::size_t group_count() const { return 3 + 2 * heads_.size(); }
  std::string group_name(std::size_t g) const;
  std::vector<double>& group(std::size_t g);
  const std::vector<double>& group(std::size_t g) const;

  // Mean cross-entropy of `head` over the batch; fills `grads` when given.
  double forward_backward(const TokenBatch& batch, std::size_t head, TrunkGradients* grads) const;
  std::vector<std::size_t> predict(const TokenBatch& batch, std::size_t head) const;
  // params -= step * grads
  void apply(const TrunkGradients& grads, double step);

  bool operator==(const TrunkNet&) const = default;

 private:
  void check_batch(const TokenBatch& batch, std::size_t head) const;
  void hidden_of(const TokenBatch& batch, std::size_t i, std::vector<double>& x, std::vector<double>& h) const;

  std::size_t vocab_ = 0;
  std::size_t cognitive_ = 0;
  std::size_t embedding_dim_ = 0;
  std::size_t hidden_ = 0;
  std::vector<HeadSpec> heads_;
  std::vector<double> embedding_;  // vocab x E
  std::vector<double> hidden_w_;   // (E + C) x H
  std::vector<double> hidden_b_;   // H
  std::vector<std::vector<double>> head_w_;  // H x K per head
  std::vector<std::vector<double>> head_b_;  // K per head
};

// ---------------------------------------------------------------- common

std::vector<Prediction> predict_logistic(const LogisticModel& model, const Dataset& dataset,
                                         std::span<const std::size_t> indices);
std::vector<Prediction> predict_tagger(const PerceptronTagger& model, const Dataset& dataset,
                                       std::span<const std::size_t> indices);

void write_model(std::ostream& out, const LogisticModel& model);
void write_model(std::ostream& out, const PerceptronTagger& model);
LogisticModel parse_logistic_model(std::istream& in);
PerceptronTagger parse_tagger_model(std::istream& in);

}  // namespace cogsig
