#include "cogsig/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "cogsig/error.hpp"
#include "cogsig/jsonio.hpp"
#include "cogsig/rng.hpp"

namespace cogsig {

namespace {

std::vector<std::string> string_vector(const json& j, std::string_view key, std::size_t line) {
  const json& a = require(j, key, line);
  if (!a.is_array()) throw error(errc::parse, "field '" + std::string(key) + "' must be an array", line);
  std::vector<std::string> out;
  for (const auto& v : a) {
    if (!v.is_string()) throw error(errc::parse, "field '" + std::string(key) + "' must hold strings", line);
    out.push_back(v.get<std::string>());
  }
  return out;
}

FeatureRow number_vector(const json& a, std::size_t line) {
  if (!a.is_array()) throw error(errc::parse, "feature vector must be an array", line);
  FeatureRow out;
  out.reserve(a.size());
  for (const auto& v : a) {
    if (!v.is_number()) throw error(errc::parse, "feature values must be numbers", line);
    out.push_back(v.get<double>());
  }
  return out;
}

bool is_whole(double x) { return std::abs(x - std::round(x)) < 1e-9; }

}  // namespace

std::string_view to_string(NeutralPolicy p) { return p == NeutralPolicy::drop_all ? "drop_all" : "drop_train_only"; }

NeutralPolicy parse_neutral_policy(std::string_view s) {
  if (s == "drop_all") return NeutralPolicy::drop_all;
  if (s == "drop_train_only") return NeutralPolicy::drop_train_only;
  throw error(errc::config, "unknown neutral policy '" + std::string(s) + "'");
}

std::string_view to_string(Section s) {
  switch (s) {
    case Section::train: return "train";
    case Section::dev: return "dev";
    case Section::test: return "test";
  }
  return "train";
}

Dataset assemble(const Corpus& corpus, std::span<const FeatureBlock> blocks, const AssembleOptions& opts) {
  Dataset ds;
  ds.task = opts.task.value_or(corpus.task);
  ds.neutral_policy = opts.neutral_policy;
  if (ds.task != corpus.task && !(ds.task == Task::sentiment2 && corpus.task == Task::sentiment3))
    throw error(errc::unsupported_task, "cannot assemble a " + std::string(to_string(corpus.task)) + " corpus as " +
                                            std::string(to_string(ds.task)));

  std::set<std::string> seen_dims;
  for (const auto& b : blocks) {
    if (!b.features) throw error(errc::config, "feature block '" + b.name + "' is empty");
    for (const auto& d : b.features->dims) {
      if (!seen_dims.insert(d).second) throw error(errc::config, "dimension '" + d + "' appears in two feature blocks");
      ds.manifest.push_back(d);
    }
  }
  const std::size_t width = ds.manifest.size();
  const bool drop_neutral = corpus.task == Task::sentiment3 && ds.task == Task::sentiment2 &&
                            opts.neutral_policy == NeutralPolicy::drop_all;

  for (const auto& s : corpus.sentences) {
    if (drop_neutral && s.labels.front() == "neu") continue;
    std::vector<FeatureRow> rows;
    if (width > 0) {
      rows.assign(s.tokens.size(), FeatureRow{});
      for (auto& r : rows) r.reserve(width);
      for (const auto& b : blocks) {
        auto it = b.features->sentences.find(s.id);
        const std::size_t w = b.features->dims.size();
        if (it == b.features->sentences.end()) {
          if (opts.strict) throw error(errc::validation, "feature block '" + b.name + "' lacks sentence '" + s.id + "'");
          for (auto& r : rows) r.insert(r.end(), w, 0.0);
          continue;
        }
        if (it->second.size() != s.tokens.size())
          throw error(errc::dimension_mismatch, "feature block '" + b.name + "' misaligned with sentence '" + s.id + "'");
        for (std::size_t t = 0; t < rows.size(); ++t) {
          if (it->second[t].size() != w) throw error(errc::dimension_mismatch, "feature row width mismatch");
          rows[t].insert(rows[t].end(), it->second[t].begin(), it->second[t].end());
        }
      }
    }

    FeatureRow sentence_vec;
    if (!is_token_level(ds.task) && width > 0) {
      sentence_vec.assign(width, 0.0);
      for (const auto& r : rows)
        for (std::size_t d = 0; d < width; ++d) sentence_vec[d] += r[d];
      for (auto& v : sentence_vec) v /= static_cast<double>(rows.size());
    }

    if (ds.task == Task::relclass) {
      for (const auto& rel : s.labels) {
        Instance inst;
        inst.id = s.id + "#" + rel;
        inst.group = s.id;
        inst.tokens = s.tokens;
        inst.labels = {rel};
        inst.token_features = rows;
        inst.sentence_features = sentence_vec;
        ds.instances.push_back(std::move(inst));
      }
      continue;
    }
    Instance inst;
    inst.id = s.id;
    inst.group = s.id;
    inst.tokens = s.tokens;
    inst.labels = s.labels;
    inst.token_features = std::move(rows);
    inst.sentence_features = std::move(sentence_vec);
    ds.instances.push_back(std::move(inst));
  }
  return ds;
}

std::size_t FoldPlan::dev_folds() const {
  return static_cast<std::size_t>(std::llround(ratios[1] * static_cast<double>(k)));
}

Section FoldPlan::section_of(std::string_view group, std::size_t fold) const {
  auto it = assignment.find(std::string(group));
  if (it == assignment.end()) throw error(errc::validation, "group '" + std::string(group) + "' is not in the fold plan");
  if (fold >= k) throw error(errc::config, "fold index out of range");
  const std::size_t offset = (it->second + k - fold) % k;
  if (offset == 0) return Section::test;
  if (offset <= dev_folds()) return Section::dev;
  return Section::train;
}

FoldPlan kfold_split(const Dataset& dataset, std::size_t k, std::array<double, 3> ratios, std::uint64_t seed) {
  if (k < 2) throw error(errc::config, "cross-validation needs k >= 2");
  for (double r : ratios)
    if (!(r >= 0.0)) throw error(errc::config, "split ratios must be non-negative");
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) throw error(errc::config, "split ratios must sum to 1");
  const double kd = static_cast<double>(k);
  if (std::abs(ratios[2] * kd - 1.0) > 1e-9) throw error(errc::config, "test ratio must equal 1/k");
  if (!is_whole(ratios[1] * kd)) throw error(errc::config, "dev ratio must be a whole number of folds");
  if (ratios[0] <= 0.0) throw error(errc::config, "training ratio must be positive");

  std::vector<std::string> groups;
  std::set<std::string> seen;
  for (const auto& inst : dataset.instances)
    if (seen.insert(inst.group).second) groups.push_back(inst.group);
  if (groups.size() < k) throw error(errc::config, "fewer sentences than folds");

  Rng rng(seed);
  rng.shuffle(groups);
  FoldPlan plan;
  plan.k = k;
  plan.ratios = ratios;
  plan.seed = seed;
  for (std::size_t i = 0; i < groups.size(); ++i) plan.assignment.emplace(groups[i], i % k);
  return plan;
}

std::vector<std::size_t> section_indices(const Dataset& dataset, const FoldPlan& plan, std::size_t fold,
                                         Section section) {
  const bool skip_neutral = section == Section::train && dataset.task == Task::sentiment2 &&
                            dataset.neutral_policy == NeutralPolicy::drop_train_only;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < dataset.instances.size(); ++i) {
    const auto& inst = dataset.instances[i];
    if (plan.section_of(inst.group, fold) != section) continue;
    if (skip_neutral && inst.labels.front() == "neu") continue;
    out.push_back(i);
  }
  return out;
}

NormalizationStats fit_dataset_normalization(const Dataset& dataset, std::span<const std::size_t> indices) {
  std::vector<FeatureRow> rows;
  const bool token_level = is_token_level(dataset.task);
  for (auto i : indices) {
    const auto& inst = dataset.instances.at(i);
    if (token_level) {
      rows.insert(rows.end(), inst.token_features.begin(), inst.token_features.end());
    } else if (!inst.sentence_features.empty()) {
      rows.push_back(inst.sentence_features);
    }
  }
  return fit_normalization(rows, dataset.manifest.size());
}

void emit_conll(std::ostream& out, const Dataset& dataset, std::span<const std::size_t> indices,
                const NormalizationStats* stats, std::size_t n_bins) {
  if (!is_token_level(dataset.task))
    throw error(errc::unsupported_task, "CoNLL output needs a token-level task");
  const bool with_features = !dataset.manifest.empty();
  if (with_features && !stats) throw error(errc::state, "binned CoNLL output needs fitted normalization");
  for (auto i : indices) {
    const auto& inst = dataset.instances.at(i);
    for (std::size_t t = 0; t < inst.tokens.size(); ++t) {
      out << inst.tokens[t];
      if (with_features) {
        const auto norm = apply_normalization(*stats, inst.token_features.at(t));
        for (double v : norm) out << '\t' << discretize(v, n_bins);
      }
      out << '\t' << inst.labels[t] << '\n';
    }
    out << '\n';
  }
}

std::vector<ConllSentence> parse_conll(std::istream& in) {
  std::vector<ConllSentence> out;
  ConllSentence cur;
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::size_t> columns;
  const auto flush = [&] {
    if (!cur.tokens.empty()) out.push_back(std::move(cur));
    cur = {};
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    if (line.rfind("#provenance\t", 0) == 0) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() < 2) throw error(errc::parse, "CoNLL line needs a token and a label", line_no);
    if (columns && *columns != fields.size()) throw error(errc::parse, "inconsistent CoNLL column count", line_no);
    columns = fields.size();
    cur.tokens.push_back(fields.front());
    cur.labels.push_back(fields.back());
    std::vector<std::size_t> bins;
    for (std::size_t c = 1; c + 1 < fields.size(); ++c) {
      std::size_t pos = 0;
      unsigned long v = 0;
      try {
        v = std::stoul(fields[c], &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos != fields[c].size() || fields[c].empty()) throw error(errc::parse, "bin column is not an integer", line_no);
      bins.push_back(v);
    }
    cur.bins.push_back(std::move(bins));
  }
  flush();
  return out;
}

void write_dataset(std::ostream& out, const Dataset& dataset) {
  ordered_json header;
  header["task"] = to_string(dataset.task);
  header["manifest"] = dataset.manifest;
  header["neutral_policy"] = to_string(dataset.neutral_policy);
  out << dump_line(header) << '\n';
  for (const auto& inst : dataset.instances) {
    ordered_json j;
    j["id"] = inst.id;
    j["group"] = inst.group;
    j["tokens"] = inst.tokens;
    j["labels"] = inst.labels;
    if (!inst.token_features.empty()) j["token_features"] = inst.token_features;
    if (!inst.sentence_features.empty()) j["sentence_features"] = inst.sentence_features;
    out << dump_line(j) << '\n';
  }
}

Dataset parse_dataset(std::istream& in, const ParseOptions& opts) {
  Dataset ds;
  bool have_header = false;
  std::set<std::string> ids;
  for_each_record(in, [&](const json& r, std::size_t line) {
    if (!have_header) {
      check_fields(r, {"task", "manifest", "neutral_policy"}, opts.strict, line);
      try {
        ds.task = parse_task(require_string(r, "task", line));
      } catch (const error& e) {
        throw error(e.code(), e.detail(), line);
      }
      ds.manifest = string_vector(r, "manifest", line);
      if (auto it = r.find("neutral_policy"); it != r.end() && it->is_string())
        ds.neutral_policy = parse_neutral_policy(it->get<std::string>());
      have_header = true;
      return;
    }
    check_fields(r, {"id", "group", "tokens", "labels", "token_features", "sentence_features"}, opts.strict, line);
    Instance inst;
    inst.id = require_string(r, "id", line);
    inst.group = require_string(r, "group", line);
    inst.tokens = string_vector(r, "tokens", line);
    inst.labels = string_vector(r, "labels", line);
    if (!ids.insert(inst.id).second) throw error(errc::duplicate_id, "duplicate instance id '" + inst.id + "'", line);
    if (inst.tokens.empty()) throw error(errc::validation, "instance without tokens", line);
    const std::size_t want_labels = is_token_level(ds.task) ? inst.tokens.size() : 1;
    if (inst.labels.size() != want_labels) throw error(errc::validation, "label count does not match the task", line);
    if (auto it = r.find("token_features"); it != r.end()) {
      if (!it->is_array()) throw error(errc::parse, "token_features must be an array", line);
      for (const auto& row : *it) inst.token_features.push_back(number_vector(row, line));
    }
    if (auto it = r.find("sentence_features"); it != r.end()) inst.sentence_features = number_vector(*it, line);
    const std::size_t width = ds.manifest.size();
    if (width > 0) {
      if (inst.token_features.size() != inst.tokens.size())
        throw error(errc::validation, "token vector count does not match the token count", line);
      for (const auto& row : inst.token_features)
        if (row.size() != width) throw error(errc::dimension_mismatch, "token vector width differs from manifest", line);
      if (!inst.sentence_features.empty() && inst.sentence_features.size() != width)
        throw error(errc::dimension_mismatch, "sentence vector width differs from manifest", line);
    } else if (!inst.token_features.empty() || !inst.sentence_features.empty()) {
      throw error(errc::validation, "baseline dataset carries feature vectors", line);
    }
    ds.instances.push_back(std::move(inst));
  });
  if (!have_header) throw error(errc::parse, "dataset file lacks a manifest header");
  return ds;
}

void write_fold_plan(std::ostream& out, const FoldPlan& plan) {
  ordered_json j;
  j["k"] = plan.k;
  j["ratios"] = plan.ratios;
  j["seed"] = plan.seed;
  ordered_json assignment = ordered_json::object();
  for (const auto& [g, f] : plan.assignment) assignment[g] = f;
  j["assignment"] = std::move(assignment);
  out << j.dump(1) << '\n';
}

FoldPlan parse_fold_plan(std::istream& in) {
  FoldPlan plan;
  try {
    json j = json::parse(in);
    plan.k = j.at("k").get<std::size_t>();
    plan.ratios = j.at("ratios").get<std::array<double, 3>>();
    plan.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& [g, f] : j.at("assignment").items()) plan.assignment.emplace(g, f.get<std::size_t>());
  } catch (const json::exception& e) {
    throw error(errc::parse, std::string("malformed fold plan: ") + e.what());
  }
  for (const auto& [g, f] : plan.assignment)
    if (f >= plan.k) throw error(errc::validation, "fold index out of range for group '" + g + "'");
  return plan;
}

}  // namespace cogsig
