#include "cogsig/models.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <unordered_map>
#include <utility>

#include "cogsig/error.hpp"
#include "cogsig/jsonio.hpp"
#include "cogsig/rng.hpp"

namespace cogsig {

void repair_bio(std::vector<std::string>& tags) {
  std::string_view prev_type;
  for (auto& t : tags) {
    if (t.starts_with("I-")) {
      std::string_view type = std::string_view(t).substr(2);
      if (prev_type != type) t[0] = 'B';
      prev_type = std::string_view(t).substr(2);
    } else if (t.starts_with("B-")) {
      prev_type = std::string_view(t).substr(2);
    } else {
      prev_type = {};
    }
  }
}

namespace {

void softmax_inplace(std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (auto& v : z) {
    v = std::exp(v - m);
    sum += v;
  }
  for (auto& v : z) v /= sum;
}

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

void check_manifest(const std::vector<std::string>& model, const std::vector<std::string>& data) {
  if (model != data) throw error(errc::dimension_mismatch, "dataset manifest does not match the model manifest");
}

NormalizationStats resolve_stats(const std::optional<NormalizationStats>& given, const Dataset& ds,
                                 std::span<const std::size_t> train) {
  if (given) {
    if (given->min.size() != ds.manifest.size())
      throw error(errc::dimension_mismatch, "normalization stats do not match the manifest");
    return *given;
  }
  return fit_dataset_normalization(ds, train);
}

// ---- logistic

struct SparseRow {
  std::vector<std::size_t> index;
  std::vector<double> value;
};

SparseRow logistic_features(const LogisticModel& m, const Instance& inst) {
  SparseRow row;
  std::set<std::size_t> present;
  for (const auto& tok : inst.tokens) {
    auto it = std::lower_bound(m.vocabulary.begin(), m.vocabulary.end(), lowercase(tok));
    if (it != m.vocabulary.end() && *it == lowercase(tok))
      present.insert(static_cast<std::size_t>(it - m.vocabulary.begin()));
  }
  for (auto i : present) {
    row.index.push_back(i);
    row.value.push_back(1.0);
  }
  if (!m.manifest.empty()) {
    if (inst.sentence_features.size() != m.manifest.size())
      throw error(errc::dimension_mismatch, "instance '" + inst.id + "' lacks a sentence vector");
    const auto norm = apply_normalization(m.normalization, inst.sentence_features);
    for (std::size_t d = 0; d < norm.size(); ++d) {
      row.index.push_back(m.vocabulary.size() + d);
      row.value.push_back(norm[d]);
    }
  }
  return row;
}

std::vector<double> logits(const LogisticModel& m, const SparseRow& x) {
  const std::size_t f = m.feature_count();
  std::vector<double> z(m.classes.size());
  for (std::size_t k = 0; k < z.size(); ++k) {
    double acc = m.bias[k];
    for (std::size_t j = 0; j < x.index.size(); ++j) acc += m.weights[k * f + x.index[j]] * x.value[j];
    z[k] = acc;
  }
  return z;
}

}  // namespace

std::vector<double> LogisticModel::predict_proba(const Instance& inst) const {
  auto z = logits(*this, logistic_features(*this, inst));
  softmax_inplace(z);
  return z;
}

std::string LogisticModel::predict(const Instance& inst) const { return classes[argmax(predict_proba(inst))]; }

LogisticModel train_logistic(const Dataset& dataset, std::span<const std::size_t> train, const LogisticConfig& config) {
  if (is_token_level(dataset.task)) throw error(errc::unsupported_task, "logistic model needs a sentence-level task");
  if (train.empty()) throw error(errc::precondition, "empty training set");

  LogisticModel m;
  m.config = config;
  m.config.normalization.reset();
  m.manifest = dataset.manifest;
  std::set<std::string> classes, vocab;
  for (auto i : train) {
    const auto& inst = dataset.instances.at(i);
    classes.insert(inst.labels.front());
    for (const auto& t : inst.tokens) vocab.insert(lowercase(t));
  }
  m.classes.assign(classes.begin(), classes.end());
  m.vocabulary.assign(vocab.begin(), vocab.end());
  if (!m.manifest.empty()) m.normalization = resolve_stats(config.normalization, dataset, train);

  const std::size_t k = m.classes.size();
  const std::size_t f = m.feature_count();
  m.weights.assign(k * f, 0.0);
  m.bias.assign(k, 0.0);

  std::vector<SparseRow> rows;
  std::vector<std::size_t> labels;
  for (auto i : train) {
    rows.push_back(logistic_features(m, dataset.instances[i]));
    const auto& l = dataset.instances[i].labels.front();
    labels.push_back(static_cast<std::size_t>(std::lower_bound(m.classes.begin(), m.classes.end(), l) - m.classes.begin()));
  }

  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = config.batch_size == 0 ? rows.size() : std::min(config.batch_size, rows.size());
  std::vector<double> gw(k * f), gb(k);
  double lr = config.lr;

  const auto objective = [&] {
    double loss = 0.0;
    for (std::size_t n = 0; n < rows.size(); ++n) {
      auto p = logits(m, rows[n]);
      softmax_inplace(p);
      loss -= std::log(std::max(p[labels[n]], 1e-300));
    }
    loss /= static_cast<double>(rows.size());
    double reg = 0.0;
    for (double w : m.weights) reg += w * w;
    return loss + 0.5 * config.l2 * reg;
  };

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.halve_every > 0 && epoch > 0 && epoch % config.halve_every == 0) lr *= 0.5;
    if (batch < rows.size()) {
      Rng rng(derive_seed(config.seed, epoch));
      rng.shuffle(order);
    }
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::fill(gw.begin(), gw.end(), 0.0);
      std::fill(gb.begin(), gb.end(), 0.0);
      for (std::size_t b = start; b < end; ++b) {
        const auto& x = rows[order[b]];
        auto p = logits(m, x);
        softmax_inplace(p);
        p[labels[order[b]]] -= 1.0;
        for (std::size_t c = 0; c < k; ++c) {
          gb[c] += p[c];
          for (std::size_t j = 0; j < x.index.size(); ++j) gw[c * f + x.index[j]] += p[c] * x.value[j];
        }
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      for (std::size_t i = 0; i < gw.size(); ++i) m.weights[i] -= lr * (gw[i] * scale + config.l2 * m.weights[i]);
      for (std::size_t c = 0; c < k; ++c) m.bias[c] -= lr * gb[c] * scale;
    }
    m.loss_history.push_back(objective());
  }
  return m;
}

std::vector<Prediction> predict_logistic(const LogisticModel& model, const Dataset& dataset,
                                         std::span<const std::size_t> indices) {
  check_manifest(model.manifest, dataset.manifest);
  std::vector<Prediction> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back({model.predict(dataset.instances.at(i))});
  return out;
}

// ---------------------------------------------------------------- tagger

namespace {

std::vector<std::vector<std::size_t>> token_bins(const NormalizationStats& stats, std::size_t n_bins,
                                                 const Instance& inst, std::size_t dims) {
  std::vector<std::vector<std::size_t>> bins;
  if (dims == 0) return bins;
  if (inst.token_features.size() != inst.tokens.size())
    throw error(errc::dimension_mismatch, "instance '" + inst.id + "' lacks token vectors");
  bins.reserve(inst.tokens.size());
  for (const auto& row : inst.token_features) {
    const auto norm = apply_normalization(stats, row);
    std::vector<std::size_t> b(norm.size());
    for (std::size_t d = 0; d < norm.size(); ++d) b[d] = discretize(norm[d], n_bins);
    bins.push_back(std::move(b));
  }
  return bins;
}

std::string affix(const std::string& s, bool prefix) {
  if (s.size() <= 3) return s;
  return prefix ? s.substr(0, 3) : s.substr(s.size() - 3);
}

// Features not depending on the previous tag are computed once per token.
struct TokenContext {
  std::vector<std::vector<std::string>> static_features;
};

TokenContext token_context(const Instance& inst, const std::vector<std::vector<std::size_t>>& bins,
                           const std::vector<std::string>& manifest) {
  TokenContext ctx;
  const std::size_t n = inst.tokens.size();
  std::vector<std::string> lower(n);
  for (std::size_t t = 0; t < n; ++t) lower[t] = lowercase(inst.tokens[t]);
  ctx.static_features.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    auto& f = ctx.static_features[t];
    f.emplace_back("bias");
    f.push_back("w=" + inst.tokens[t]);
    f.push_back("l=" + lower[t]);
    f.push_back("p3=" + affix(lower[t], true));
    f.push_back("s3=" + affix(lower[t], false));
    f.push_back("l-1=" + (t > 0 ? lower[t - 1] : std::string("<s>")));
    f.push_back("l+1=" + (t + 1 < n ? lower[t + 1] : std::string("</s>")));
    for (int off = -1; off <= 1; ++off) {
      const auto pos = static_cast<std::ptrdiff_t>(t) + off;
      if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(n) || bins.empty()) continue;
      const auto& b = bins[static_cast<std::size_t>(pos)];
      for (std::size_t d = 0; d < b.size(); ++d)
        if (b[d] > 0) f.push_back("c:" + manifest[d] + "@" + std::to_string(off) + "=" + std::to_string(b[d]));
    }
  }
  return ctx;
}

}  // namespace

std::vector<std::string> PerceptronTagger::tag(const Instance& inst) const {
  const auto bins = token_bins(normalization, config.n_bins, inst, manifest.size());
  const auto ctx = token_context(inst, bins, manifest);
  std::vector<std::string> out;
  std::string prev = "<s>";
  std::vector<double> score(tags.size());
  for (std::size_t t = 0; t < inst.tokens.size(); ++t) {
    std::fill(score.begin(), score.end(), 0.0);
    const auto add = [&](const std::string& feat) {
      auto it = weights.find(feat);
      if (it == weights.end()) return;
      for (std::size_t k = 0; k < tags.size(); ++k) score[k] += it->second[k];
    };
    for (const auto& f : ctx.static_features[t]) add(f);
    add("t-1=" + prev);
    add("t-1|l=" + prev + "|" + lowercase(inst.tokens[t]));
    prev = tags[argmax(score)];
    out.push_back(prev);
  }
  repair_bio(out);
  return out;
}

PerceptronTagger train_tagger(const Dataset& dataset, std::span<const std::size_t> train, const TaggerConfig& config) {
  if (!is_token_level(dataset.task)) throw error(errc::unsupported_task, "tagger needs a token-level task");
  if (train.empty()) throw error(errc::precondition, "empty training set");
  PerceptronTagger m;
  m.config = config;
  m.config.normalization.reset();
  m.manifest = dataset.manifest;
  std::set<std::string> tagset;
  for (auto i : train)
    for (const auto& l : dataset.instances.at(i).labels) tagset.insert(l);
  m.tags.assign(tagset.begin(), tagset.end());
  if (!m.manifest.empty()) m.normalization = resolve_stats(config.normalization, dataset, train);

  const std::size_t k = m.tags.size();
  std::vector<TokenContext> contexts;
  std::vector<std::vector<std::size_t>> gold;
  for (auto i : train) {
    const auto& inst = dataset.instances[i];
    contexts.push_back(token_context(inst, token_bins(m.normalization, config.n_bins, inst, m.manifest.size()), m.manifest));
    std::vector<std::size_t> g;
    for (const auto& l : inst.labels)
      g.push_back(static_cast<std::size_t>(std::lower_bound(m.tags.begin(), m.tags.end(), l) - m.tags.begin()));
    gold.push_back(std::move(g));
  }

  std::unordered_map<std::string, std::size_t> ids;
  std::vector<std::string> names;
  std::vector<double> w, u;
  double c = 1.0;
  const auto id_of = [&](const std::string& feat, bool create) -> std::size_t {
    auto it = ids.find(feat);
    if (it != ids.end()) return it->second;
    if (!create) return static_cast<std::size_t>(-1);
    const std::size_t id = names.size();
    ids.emplace(feat, id);
    names.push_back(feat);
    w.resize(w.size() + k, 0.0);
    u.resize(u.size() + k, 0.0);
    return id;
  };

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> score(k);
  std::vector<std::string> feats;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, epoch));
    rng.shuffle(order);
    for (auto n : order) {
      const auto& inst = dataset.instances[train[n]];
      std::string prev = "<s>";
      for (std::size_t t = 0; t < inst.tokens.size(); ++t) {
        feats = contexts[n].static_features[t];
        feats.push_back("t-1=" + prev);
        feats.push_back("t-1|l=" + prev + "|" + lowercase(inst.tokens[t]));
        std::fill(score.begin(), score.end(), 0.0);
        for (const auto& f : feats) {
          auto id = id_of(f, false);
          if (id == static_cast<std::size_t>(-1)) continue;
          for (std::size_t j = 0; j < k; ++j) score[j] += w[id * k + j];
        }
        const std::size_t pred = argmax(score);
        const std::size_t truth = gold[n][t];
        if (pred != truth) {
          for (const auto& f : feats) {
            auto id = id_of(f, true);
            w[id * k + truth] += 1.0;
            u[id * k + truth] += c;
            w[id * k + pred] -= 1.0;
            u[id * k + pred] -= c;
          }
        }
        c += 1.0;
        prev = m.tags[pred];
      }
    }
  }

  for (std::size_t id = 0; id < names.size(); ++id) {
    std::vector<double> avg(k);
    bool nonzero = false;
    for (std::size_t j = 0; j < k; ++j) {
      avg[j] = w[id * k + j] - u[id * k + j] / c;
      nonzero = nonzero || avg[j] != 0.0;
    }
    if (nonzero) m.weights.emplace(names[id], std::move(avg));
  }
  return m;
}

std::vector<Prediction> predict_tagger(const PerceptronTagger& model, const Dataset& dataset,
                                       std::span<const std::size_t> indices) {
  check_manifest(model.manifest, dataset.manifest);
  std::vector<Prediction> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(model.tag(dataset.instances.at(i)));
  return out;
}

// ---------------------------------------------------------------- trunk net

TrunkNet::TrunkNet(std::size_t vocab, std::size_t cognitive_dims, std::vector<HeadSpec> heads,
                   const TrunkConfig& config, std::uint64_t seed)
    : vocab_(vocab),
      cognitive_(cognitive_dims),
      embedding_dim_(config.embedding_dim),
      hidden_(config.hidden_dim),
      heads_(std::move(heads)) {
  if (vocab_ == 0 || embedding_dim_ == 0 || hidden_ == 0) throw error(errc::config, "network dimensions must be positive");
  if (heads_.empty()) throw error(errc::config, "network needs at least one head");
  std::set<std::string> names;
  for (const auto& h : heads_) {
    if (h.classes < 2) throw error(errc::config, "head '" + h.name + "' needs at least two classes");
    if (!names.insert(h.name).second) throw error(errc::config, "duplicate head '" + h.name + "'");
  }
  Rng rng(seed);
  embedding_.resize(vocab_ * embedding_dim_);
  for (auto& v : embedding_) v = rng.normal(0.0, config.init_scale);
  // The embedding rows of hidden.W do not depend on the cognitive width, so a
  // padded network starts from the baseline's weights.
  const std::size_t in = embedding_dim_ + cognitive_;
  hidden_w_.resize(in * hidden_);
  const double sd = 1.0 / std::sqrt(static_cast<double>(embedding_dim_));
  Rng cognitive_rng(derive_seed(seed, "cognitive"));
  for (std::size_t i = 0; i < hidden_w_.size(); ++i)
    hidden_w_[i] = i < embedding_dim_ * hidden_ ? rng.normal(0.0, sd) : cognitive_rng.normal(0.0, sd);
  hidden_b_.assign(hidden_, 0.0);
  for (const auto& h : heads_) {
    head_w_.emplace_back(hidden_ * h.classes, 0.0);
    head_b_.emplace_back(h.classes, 0.0);
  }
}

std::size_t TrunkNet::head_index(std::string_view name) const {
  for (std::size_t i = 0; i < heads_.size(); ++i)
    if (heads_[i].name == name) return i;
  throw error(errc::config, "network has no head '" + std::string(name) + "'");
}

std::size_t TrunkNet::parameter_count() const {
  std::size_t n = vocab_ * embedding_dim_ + (embedding_dim_ + cognitive_) * hidden_ + hidden_;
  for (const auto& h : heads_) n += hidden_ * h.classes + h.classes;
  return n;
}

std::string TrunkNet::group_name(std::size_t g) const {
  if (g == 0) return "embedding";
  if (g == 1) return "hidden.W";
  if (g == 2) return "hidden.b";
  const std::size_t h = (g - 3) / 2;
  return heads_.at(h).name + ((g - 3) % 2 == 0 ? ".W" : ".b");
}

std::vector<double>& TrunkNet::group(std::size_t g) {
  return const_cast<std::vector<double>&>(std::as_const(*this).group(g));
}

const std::vector<double>& TrunkNet::group(std::size_t g) const {
  if (g == 0) return embedding_;
  if (g == 1) return hidden_w_;
  if (g == 2) return hidden_b_;
  const std::size_t h = (g - 3) / 2;
  if (h >= heads_.size()) throw error(errc::config, "parameter group out of range");
  return (g - 3) % 2 == 0 ? head_w_[h] : head_b_[h];
}

void TrunkNet::check_batch(const TokenBatch& batch, std::size_t head) const {
  if (head >= heads_.size()) throw error(errc::config, "head index out of range");
  if (batch.cognitive.size() != batch.tokens.size() * cognitive_)
    throw error(errc::dimension_mismatch, "cognitive block does not match the network's input width");
  for (auto t : batch.tokens)
    if (t >= vocab_) throw error(errc::dimension_mismatch, "token id outside the vocabulary");
}

void TrunkNet::hidden_of(const TokenBatch& batch, std::size_t i, std::vector<double>& x, std::vector<double>& h) const {
  const std::size_t in = embedding_dim_ + cognitive_;
  x.resize(in);
  const double* emb = &embedding_[batch.tokens[i] * embedding_dim_];
  std::copy(emb, emb + embedding_dim_, x.begin());
  if (cognitive_ > 0) {
    const double* cog = &batch.cognitive[i * cognitive_];
    std::copy(cog, cog + cognitive_, x.begin() + static_cast<std::ptrdiff_t>(embedding_dim_));
  }
  h.assign(hidden_b_.begin(), hidden_b_.end());
  for (std::size_t a = 0; a < in; ++a) {
    const double xa = x[a];
    const double* row = &hidden_w_[a * hidden_];
    for (std::size_t j = 0; j < hidden_; ++j) h[j] += xa * row[j];
  }
  for (auto& v : h) v = std::tanh(v);
}

double TrunkNet::forward_backward(const TokenBatch& batch, std::size_t head, TrunkGradients* grads) const {
  check_batch(batch, head);
  if (batch.labels.size() != batch.tokens.size()) throw error(errc::dimension_mismatch, "label count mismatch");
  const std::size_t n = batch.tokens.size();
  if (n == 0) throw error(errc::precondition, "empty batch");
  const std::size_t kk = heads_[head].classes;
  const std::size_t in = embedding_dim_ + cognitive_;
  const auto& w = head_w_[head];
  const auto& b = head_b_[head];

  if (grads) {
    grads->embedding.clear();
    grads->hidden_w.assign(hidden_w_.size(), 0.0);
    grads->hidden_b.assign(hidden_, 0.0);
    grads->head_w.resize(heads_.size());
    grads->head_b.resize(heads_.size());
    for (std::size_t t = 0; t < heads_.size(); ++t) {
      grads->head_w[t].assign(head_w_[t].size(), 0.0);
      grads->head_b[t].assign(head_b_[t].size(), 0.0);
    }
  }

  std::vector<double> x, h, z(kk), dh(hidden_), dz(hidden_);
  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (batch.labels[i] >= kk) throw error(errc::dimension_mismatch, "label outside the head's classes");
    hidden_of(batch, i, x, h);
    for (std::size_t c = 0; c < kk; ++c) {
      double acc = b[c];
      for (std::size_t j = 0; j < hidden_; ++j) acc += h[j] * w[j * kk + c];
      z[c] = acc;
    }
    softmax_inplace(z);
    loss -= std::log(std::max(z[batch.labels[i]], 1e-300));
    if (!grads) continue;

    z[batch.labels[i]] -= 1.0;
    for (auto& v : z) v *= inv_n;
    auto& gw = grads->head_w[head];
    auto& gb = grads->head_b[head];
    for (std::size_t c = 0; c < kk; ++c) gb[c] += z[c];
    for (std::size_t j = 0; j < hidden_; ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < kk; ++c) {
        gw[j * kk + c] += h[j] * z[c];
        acc += w[j * kk + c] * z[c];
      }
      dh[j] = acc;
      dz[j] = acc * (1.0 - h[j] * h[j]);
      grads->hidden_b[j] += dz[j];
    }
    auto& ge = grads->embedding[batch.tokens[i]];
    if (ge.empty()) ge.assign(embedding_dim_, 0.0);
    for (std::size_t a = 0; a < in; ++a) {
      const double* row = &hidden_w_[a * hidden_];
      double* grow = &grads->hidden_w[a * hidden_];
      double dx = 0.0;
      for (std::size_t j = 0; j < hidden_; ++j) {
        grow[j] += x[a] * dz[j];
        dx += row[j] * dz[j];
      }
      if (a < embedding_dim_) ge[a] += dx;
    }
  }
  return loss * inv_n;
}

std::vector<std::size_t> TrunkNet::predict(const TokenBatch& batch, std::size_t head) const {
  check_batch(batch, head);
  const std::size_t kk = heads_[head].classes;
  const auto& w = head_w_[head];
  const auto& b = head_b_[head];
  std::vector<std::size_t> out;
  std::vector<double> x, h, z(kk);
  for (std::size_t i = 0; i < batch.tokens.size(); ++i) {
    hidden_of(batch, i, x, h);
    for (std::size_t c = 0; c < kk; ++c) {
      double acc = b[c];
      for (std::size_t j = 0; j < hidden_; ++j) acc += h[j] * w[j * kk + c];
      z[c] = acc;
    }
    out.push_back(argmax(z));
  }
  return out;
}

void TrunkNet::apply(const TrunkGradients& grads, double step) {
  for (const auto& [row, g] : grads.embedding)
    for (std::size_t a = 0; a < embedding_dim_; ++a) embedding_[row * embedding_dim_ + a] -= step * g[a];
  for (std::size_t i = 0; i < hidden_w_.size(); ++i) hidden_w_[i] -= step * grads.hidden_w[i];
  for (std::size_t i = 0; i < hidden_b_.size(); ++i) hidden_b_[i] -= step * grads.hidden_b[i];
  for (std::size_t t = 0; t < heads_.size() && t < grads.head_w.size(); ++t) {
    for (std::size_t i = 0; i < head_w_[t].size(); ++i) head_w_[t][i] -= step * grads.head_w[t][i];
    for (std::size_t i = 0; i < head_b_[t].size(); ++i) head_b_[t][i] -= step * grads.head_b[t][i];
  }
}

std::vector<double> TrunkGradients::dense(const TrunkNet& net, std::size_t g) const {
  std::vector<double> out(net.group(g).size(), 0.0);
  if (g == 0) {
    for (const auto& [row, v] : embedding) std::copy(v.begin(), v.end(), out.begin() + static_cast<std::ptrdiff_t>(row * net.embedding_dim()));
  } else if (g == 1) {
    out = hidden_w;
  } else if (g == 2) {
    out = hidden_b;
  } else {
    const std::size_t h = (g - 3) / 2;
    out = (g - 3) % 2 == 0 ? head_w.at(h) : head_b.at(h);
  }
  return out;
}

// ---------------------------------------------------------------- serialization

namespace {

ordered_json stats_json(const NormalizationStats& s) {
  ordered_json j;
  j["min"] = s.min;
  j["max"] = s.max;
  j["fitted"] = s.fitted;
  return j;
}

NormalizationStats stats_from(const json& j) {
  NormalizationStats s;
  s.min = j.at("min").get<std::vector<double>>();
  s.max = j.at("max").get<std::vector<double>>();
  s.fitted = j.at("fitted").get<bool>();
  return s;
}

template <class Fn>
auto parse_model(std::istream& in, std::string_view kind, Fn&& fn) {
  try {
    json j = json::parse(in);
    if (j.at("model").get<std::string>() != kind)
      throw error(errc::validation, "model file does not hold a " + std::string(kind) + " model");
    return fn(j);
  } catch (const json::exception& e) {
    throw error(errc::parse, std::string("malformed model file: ") + e.what());
  }
}

}  // namespace

void write_model(std::ostream& out, const LogisticModel& m) {
  ordered_json j;
  j["model"] = "logistic";
  j["config"] = {{"lr", m.config.lr},
                 {"epochs", m.config.epochs},
                 {"l2", m.config.l2},
                 {"batch_size", m.config.batch_size},
                 {"halve_every", m.config.halve_every},
                 {"seed", m.config.seed}};
  j["classes"] = m.classes;
  j["manifest"] = m.manifest;
  j["normalization"] = stats_json(m.normalization);
  j["vocabulary"] = m.vocabulary;
  j["weights"] = m.weights;
  j["bias"] = m.bias;
  j["loss_history"] = m.loss_history;
  out << j.dump() << '\n';
}

void write_model(std::ostream& out, const PerceptronTagger& m) {
  ordered_json j;
  j["model"] = "tagger";
  j["config"] = {{"epochs", m.config.epochs}, {"seed", m.config.seed}, {"n_bins", m.config.n_bins}};
  j["tags"] = m.tags;
  j["manifest"] = m.manifest;
  j["normalization"] = stats_json(m.normalization);
  ordered_json w = ordered_json::object();
  for (const auto& [f, v] : m.weights) w[f] = v;
  j["weights"] = std::move(w);
  out << j.dump() << '\n';
}

LogisticModel parse_logistic_model(std::istream& in) {
  return parse_model(in, "logistic", [](const json& j) {
    LogisticModel m;
    const auto& c = j.at("config");
    m.config.lr = c.at("lr").get<double>();
    m.config.epochs = c.at("epochs").get<std::size_t>();
    m.config.l2 = c.at("l2").get<double>();
    m.config.batch_size = c.at("batch_size").get<std::size_t>();
    m.config.halve_every = c.at("halve_every").get<std::size_t>();
    m.config.seed = c.at("seed").get<std::uint64_t>();
    m.classes = j.at("classes").get<std::vector<std::string>>();
    m.manifest = j.at("manifest").get<std::vector<std::string>>();
    m.normalization = stats_from(j.at("normalization"));
    m.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<std::vector<double>>();
    m.loss_history = j.at("loss_history").get<std::vector<double>>();
    if (m.weights.size() != m.classes.size() * m.feature_count() || m.bias.size() != m.classes.size())
      throw error(errc::validation, "logistic weights do not match classes and features");
    for (double w : m.weights)
      if (!std::isfinite(w)) throw error(errc::validation, "non-finite logistic weight");
    return m;
  });
}

PerceptronTagger parse_tagger_model(std::istream& in) {
  return parse_model(in, "tagger", [](const json& j) {
    PerceptronTagger m;
    const auto& c = j.at("config");
    m.config.epochs = c.at("epochs").get<std::size_t>();
    m.config.seed = c.at("seed").get<std::uint64_t>();
    m.config.n_bins = c.at("n_bins").get<std::size_t>();
    m.tags = j.at("tags").get<std::vector<std::string>>();
    m.manifest = j.at("manifest").get<std::vector<std::string>>();
    m.normalization = stats_from(j.at("normalization"));
    for (const auto& [f, v] : j.at("weights").items()) {
      auto w = v.get<std::vector<double>>();
      if (w.size() != m.tags.size()) throw error(errc::validation, "tagger weight width does not match the tag set");
      m.weights.emplace(f, std::move(w));
    }
    return m;
  });
}

}  // namespace cogsig
