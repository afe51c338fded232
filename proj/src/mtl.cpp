#include "cogsig/mtl.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>

#include "cogsig/eeg.hpp"
#include "cogsig/error.hpp"
#include "cogsig/jsonio.hpp"
#include "cogsig/rng.hpp"

namespace cogsig {

AuxTaskSpec AuxTaskSpec::parse(std::string_view spec) {
  AuxTaskSpec out;
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    auto colon = spec.find(':', start);
    parts.push_back(spec.substr(start, colon == std::string_view::npos ? std::string_view::npos : colon - start));
    if (colon == std::string_view::npos) break;
    start = colon + 1;
  }
  if (parts.size() > 3 || parts[0].empty()) throw error(errc::config, "malformed auxiliary task '" + std::string(spec) + "'");
  out.source = std::string(parts[0]);
  if (parts.size() > 1) {
    auto [p, ec] = std::from_chars(parts[1].data(), parts[1].data() + parts[1].size(), out.n_bins);
    if (ec != std::errc{} || p != parts[1].data() + parts[1].size())
      throw error(errc::config, "auxiliary bin count must be an integer");
  }
  if (parts.size() > 2) {
    try {
      std::size_t used = 0;
      out.lambda = std::stod(std::string(parts[2]), &used);
      if (used != parts[2].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw error(errc::config, "auxiliary loss weight must be a number");
    }
  }
  if (out.n_bins < 2) throw error(errc::config, "auxiliary task needs at least 2 bins");
  if (!(out.lambda >= 0.0) || !std::isfinite(out.lambda)) throw error(errc::config, "auxiliary loss weight must be >= 0");
  return out;
}

FrequencyLexicon parse_frequency_lexicon(std::istream& in) {
  FrequencyLexicon lex;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) throw error(errc::parse, "frequency line needs word<TAB>count", line_no);
    std::uint64_t count = 0;
    const char* b = line.data() + tab + 1;
    const char* e = line.data() + line.size();
    auto [p, ec] = std::from_chars(b, e, count);
    if (ec != std::errc{} || p != e) throw error(errc::parse, "frequency count is not an integer", line_no);
    if (count < 1) throw error(errc::validation, "frequency counts must be >= 1", line_no);
    lex[lowercase(line.substr(0, tab))] += count;
  }
  return lex;
}

void write_frequency_lexicon(std::ostream& out, const FrequencyLexicon& lexicon) {
  for (const auto& [w, c] : lexicon) out << w << '\t' << c << '\n';
}

FrequencyLexicon count_frequencies(const Corpus& corpus) {
  FrequencyLexicon lex;
  for (const auto& s : corpus.sentences)
    for (const auto& t : s.tokens) ++lex[lowercase(t)];
  return lex;
}

namespace {

std::optional<std::size_t> dim_index(const Dataset& ds, std::string_view name) {
  auto it = std::find(ds.manifest.begin(), ds.manifest.end(), name);
  if (it == ds.manifest.end()) return std::nullopt;
  return static_cast<std::size_t>(it - ds.manifest.begin());
}

// Raw per-token values of a cognitive source.
std::vector<std::vector<double>> source_values(const Dataset& ds, std::string_view source) {
  std::vector<std::vector<double>> out;
  out.reserve(ds.instances.size());
  const auto names = combined_band_names();
  const auto combined = std::find(names.begin(), names.end(), source);
  if (auto d = dim_index(ds, source)) {
    for (const auto& inst : ds.instances) {
      std::vector<double> v;
      for (const auto& row : inst.token_features) v.push_back(row.at(*d));
      out.push_back(std::move(v));
    }
  } else if (combined != names.end()) {
    std::array<std::size_t, kBandCount> cols{};
    for (std::size_t b = 0; b < kBandCount; ++b) {
      auto d = dim_index(ds, to_string(kAllBands[b]));
      if (!d) throw error(errc::config, "combined band '" + std::string(source) + "' needs the electrode-mean band dims");
      cols[b] = *d;
    }
    const auto which = static_cast<std::size_t>(combined - names.begin());
    for (const auto& inst : ds.instances) {
      std::vector<double> v;
      for (const auto& row : inst.token_features) {
        std::array<double, kBandCount> bands{};
        for (std::size_t b = 0; b < kBandCount; ++b) bands[b] = row.at(cols[b]);
        const auto c = combine_bands(bands);
        const double values[4] = {c.theta, c.alpha, c.beta, c.gamma};
        v.push_back(values[which]);
      }
      out.push_back(std::move(v));
    }
  } else {
    throw error(errc::config, "auxiliary source '" + std::string(source) + "' is not in the dataset manifest");
  }
  for (std::size_t i = 0; i < out.size(); ++i)
    if (out[i].size() != ds.instances[i].tokens.size())
      throw error(errc::config, "instance '" + ds.instances[i].id + "' lacks token vectors for '" + std::string(source) + "'");
  return out;
}

}  // namespace

std::vector<std::vector<std::size_t>> make_aux_targets(const Dataset& dataset, const AuxTaskSpec& spec,
                                                       std::span<const std::size_t> fit,
                                                       const FrequencyLexicon* frequencies) {
  if (spec.n_bins < 2) throw error(errc::config, "auxiliary task needs at least 2 bins");
  std::vector<std::vector<std::size_t>> out;
  out.reserve(dataset.instances.size());
  if (spec.source == "word_frequency") {
    if (!frequencies) throw error(errc::config, "word_frequency needs a frequency lexicon");
    std::uint64_t max_count = 1;
    for (const auto& [w, c] : *frequencies) max_count = std::max(max_count, c);
    const double denom = std::log10(static_cast<double>(max_count));
    for (const auto& inst : dataset.instances) {
      std::vector<std::size_t> t;
      for (const auto& tok : inst.tokens) {
        auto it = frequencies->find(lowercase(tok));
        const std::uint64_t count = it == frequencies->end() ? 1 : it->second;
        const double v = denom > 0.0 ? std::log10(static_cast<double>(count)) / denom : 0.0;
        t.push_back(discretize(std::clamp(v, 0.0, 1.0), spec.n_bins));
      }
      out.push_back(std::move(t));
    }
    return out;
  }

  const auto values = source_values(dataset, spec.source);
  std::vector<FeatureRow> rows;
  for (auto i : fit)
    for (double v : values.at(i)) rows.push_back({v});
  const auto stats = fit_normalization(rows, 1);
  for (const auto& inst_values : values) {
    std::vector<std::size_t> t;
    for (double v : inst_values) t.push_back(discretize(apply_normalization(stats, FeatureRow{v})[0], spec.n_bins));
    out.push_back(std::move(t));
  }
  return out;
}

MtlTask make_main_task(const Dataset& dataset, SentimentLabeling labeling) {
  if (dataset.task == Task::relclass)
    throw error(errc::unsupported_task, "multi-task training needs token-level labels; relclass has none");
  const bool neutrality = labeling == SentimentLabeling::neutrality && !is_token_level(dataset.task);
  const auto relabel = [&](const std::string& l) {
    if (!neutrality) return l;
    return l == "neu" ? std::string("NEUTRAL") : std::string("NOT-NEUTRAL");
  };
  std::set<std::string> classes;
  for (const auto& inst : dataset.instances)
    for (const auto& l : inst.labels) classes.insert(relabel(l));
  MtlTask task;
  task.name = std::string(to_string(dataset.task));
  task.head = "main";
  task.main = true;
  task.class_names.assign(classes.begin(), classes.end());
  if (task.class_names.size() < 2) throw error(errc::config, "main task needs at least two classes");
  for (const auto& inst : dataset.instances) {
    std::vector<std::size_t> t;
    for (std::size_t k = 0; k < inst.tokens.size(); ++k) {
      const auto& raw = is_token_level(dataset.task) ? inst.labels[k] : inst.labels.front();
      const auto l = relabel(raw);
      t.push_back(static_cast<std::size_t>(std::lower_bound(task.class_names.begin(), task.class_names.end(), l) -
                                           task.class_names.begin()));
    }
    task.targets.push_back(std::move(t));
  }
  return task;
}

MtlTask make_aux_task(const Dataset& dataset, const AuxTaskSpec& spec, std::span<const std::size_t> fit,
                      const FrequencyLexicon* frequencies) {
  MtlTask task;
  task.name = spec.source;
  task.head = spec.source;
  task.lambda = spec.lambda;
  for (std::size_t b = 0; b < spec.n_bins; ++b) task.class_names.push_back(std::to_string(b));
  task.targets = make_aux_targets(dataset, spec, fit, frequencies);
  return task;
}

std::vector<ScheduledStep> mtl_schedule(std::span<const MtlTask> tasks, std::span<const std::size_t> train,
                                        std::size_t epoch, std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> orders;
  for (const auto& t : tasks) {
    std::vector<std::size_t> order(train.begin(), train.end());
    Rng rng(derive_seed(derive_seed(seed, t.name), epoch));
    rng.shuffle(order);
    orders.push_back(std::move(order));
  }
  Rng merge(derive_seed(derive_seed(seed, "schedule"), epoch));
  std::vector<std::size_t> next(tasks.size(), 0);
  std::size_t remaining = train.size() * tasks.size();
  std::vector<ScheduledStep> steps;
  steps.reserve(remaining);
  while (remaining > 0) {
    std::size_t u = merge.index(remaining);
    std::size_t t = 0;
    for (; t < tasks.size(); ++t) {
      const std::size_t left = orders[t].size() - next[t];
      if (u < left) break;
      u -= left;
    }
    steps.push_back({t, orders[t][next[t]++]});
    --remaining;
  }
  return steps;
}

namespace {

std::uint64_t hash_groups(const TrunkNet& net, std::span<const std::size_t> groups) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto g : groups) {
    const auto& v = net.group(g);
    const std::string_view bytes(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
    h = mix64(h ^ fnv1a64(bytes));
  }
  return h;
}

}  // namespace

std::uint64_t parameter_hash(const TrunkNet& net) {
  std::vector<std::size_t> all(net.group_count());
  for (std::size_t g = 0; g < all.size(); ++g) all[g] = g;
  return hash_groups(net, all);
}

TokenBatch MtlModel::batch(const Instance& inst, const std::vector<std::size_t>* labels) const {
  TokenBatch b;
  for (const auto& tok : inst.tokens) {
    auto it = std::lower_bound(vocabulary.begin() + 1, vocabulary.end(), lowercase(tok));
    b.tokens.push_back(it != vocabulary.end() && *it == lowercase(tok) ? static_cast<std::size_t>(it - vocabulary.begin())
                                                                        : 0);
  }
  if (net.cognitive_dims() > 0) {
    if (inst.token_features.size() != inst.tokens.size())
      throw error(errc::dimension_mismatch, "instance '" + inst.id + "' lacks token vectors");
    for (const auto& row : inst.token_features) {
      const auto norm = apply_normalization(normalization, row);
      b.cognitive.insert(b.cognitive.end(), norm.begin(), norm.end());
    }
  }
  if (labels) b.labels = *labels;
  return b;
}

namespace {

MtlModel init_model(const Dataset& dataset, std::span<const MtlTask> tasks, std::span<const std::size_t> train,
                    const MtlConfig& config) {
  if (tasks.empty()) throw error(errc::config, "multi-task training needs at least one task");
  if (train.empty()) throw error(errc::precondition, "empty training set");
  for (const auto& t : tasks)
    if (t.targets.size() != dataset.instances.size())
      throw error(errc::dimension_mismatch, "task '" + t.name + "' targets do not cover the dataset");

  MtlModel m;
  m.manifest = dataset.manifest;
  std::set<std::string> vocab;
  for (auto i : train)
    for (const auto& tok : dataset.instances.at(i).tokens) vocab.insert(lowercase(tok));
  m.vocabulary.push_back("<unk>");
  m.vocabulary.insert(m.vocabulary.end(), vocab.begin(), vocab.end());

  std::vector<HeadSpec> heads;
  for (const auto& t : tasks) {
    auto it = std::find_if(heads.begin(), heads.end(), [&](const HeadSpec& h) { return h.name == t.head; });
    if (it == heads.end())
      heads.push_back({t.head, t.class_names.size()});
    else if (it->classes != t.class_names.size())
      throw error(errc::config, "tasks sharing head '" + t.head + "' disagree on the class count");
  }

  std::size_t cognitive = 0;
  if (config.cognitive_inputs && !dataset.manifest.empty()) {
    cognitive = dataset.manifest.size();
    m.normalization = fit_dataset_normalization(dataset, train);
  }
  m.net = TrunkNet(m.vocabulary.size(), cognitive, heads, config.net, derive_seed(config.seed, "init"));

  for (const auto& t : tasks) {
    m.task_names.push_back(t.name);
    m.task_heads.push_back(t.head);
    m.class_names.push_back(t.class_names);
    std::vector<std::size_t> counts(t.class_names.size(), 0);
    for (auto i : train)
      for (auto c : t.targets[i]) ++counts.at(c);
    m.majority_class.push_back(static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin()));
  }
  return m;
}

void run_epochs(MtlModel& m, const Dataset& dataset, std::span<const MtlTask> tasks, const MtlConfig& config,
                std::span<const std::vector<ScheduledStep>> epochs, Trajectory* trajectory) {
  std::vector<std::size_t> head_of;
  for (const auto& t : tasks) head_of.push_back(m.net.head_index(t.head));
  std::vector<std::size_t> trained = {0, 1, 2};
  for (std::size_t h = 0; h < m.net.heads().size(); ++h) {
    bool used = false;
    for (std::size_t t = 0; t < tasks.size(); ++t) used = used || (head_of[t] == h && tasks[t].lambda != 0.0);
    if (used) {
      trained.push_back(3 + 2 * h);
      trained.push_back(4 + 2 * h);
    }
  }
  double lr = config.lr;
  TrunkGradients grads;
  for (std::size_t e = 0; e < epochs.size(); ++e) {
    if (config.halve_every > 0 && e > 0 && e % config.halve_every == 0) lr *= 0.5;
    for (const auto& step : epochs[e]) {
      const auto& task = tasks[step.task];
      if (task.lambda == 0.0) continue;
      const auto batch = m.batch(dataset.instances.at(step.instance), &task.targets.at(step.instance));
      m.net.forward_backward(batch, head_of[step.task], &grads);
      m.net.apply(grads, lr * task.lambda);
      if (trajectory) trajectory->push_back(hash_groups(m.net, trained));
    }
  }
}

}  // namespace

MtlModel train_multitask(const Dataset& dataset, std::span<const MtlTask> tasks, std::span<const std::size_t> train,
                         const MtlConfig& config, Trajectory* trajectory) {
  MtlModel m = init_model(dataset, tasks, train, config);
  std::vector<std::vector<ScheduledStep>> epochs;
  for (std::size_t e = 0; e < config.epochs; ++e) epochs.push_back(mtl_schedule(tasks, train, e, config.seed));
  run_epochs(m, dataset, tasks, config, epochs, trajectory);
  return m;
}

MtlModel replay_multitask(const Dataset& dataset, std::span<const MtlTask> tasks, std::span<const std::size_t> train,
                          const MtlConfig& config, std::span<const std::vector<ScheduledStep>> epochs,
                          Trajectory* trajectory) {
  MtlModel m = init_model(dataset, tasks, train, config);
  run_epochs(m, dataset, tasks, config, epochs, trajectory);
  return m;
}

std::vector<HeadAccuracy> evaluate_multitask(const MtlModel& model, const Dataset& dataset,
                                             std::span<const MtlTask> tasks, std::span<const std::size_t> indices) {
  std::vector<HeadAccuracy> out;
  for (const auto& task : tasks) {
    auto it = std::find(model.task_names.begin(), model.task_names.end(), task.name);
    if (it == model.task_names.end()) throw error(errc::config, "model has no head for task '" + task.name + "'");
    const auto t = static_cast<std::size_t>(it - model.task_names.begin());
    const std::size_t head = model.net.head_index(model.task_heads[t]);
    HeadAccuracy acc;
    acc.task = task.name;
    std::size_t correct = 0, majority = 0, non_o = 0, non_o_correct = 0;
    const bool ner_main = task.main && dataset.task == Task::ner;
    for (auto i : indices) {
      const auto& gold = task.targets.at(i);
      const auto pred = model.net.predict(model.batch(dataset.instances.at(i)), head);
      for (std::size_t k = 0; k < gold.size(); ++k) {
        ++acc.tokens;
        correct += pred[k] == gold[k];
        majority += model.majority_class[t] == gold[k];
        if (ner_main && task.class_names[gold[k]] != "O") {
          ++non_o;
          non_o_correct += pred[k] == gold[k];
        }
      }
    }
    if (acc.tokens == 0) throw error(errc::precondition, "evaluation section is empty");
    const double n = static_cast<double>(acc.tokens);
    acc.accuracy = 100.0 * static_cast<double>(correct) / n;
    acc.majority_accuracy = 100.0 * static_cast<double>(majority) / n;
    if (ner_main) acc.accuracy_without_o = non_o == 0 ? 0.0 : 100.0 * static_cast<double>(non_o_correct) / static_cast<double>(non_o);
    out.push_back(std::move(acc));
  }
  return out;
}

}  // namespace cogsig
