#include "cogsig/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <unordered_map>

#include "cogsig/error.hpp"
#include "cogsig/jsonio.hpp"

namespace cogsig {

SubjectAggregation SubjectAggregation::parse(std::string_view spec) {
  SubjectAggregation agg;
  const auto split_ids = [](std::string_view list) {
    std::vector<std::string> ids;
    std::size_t start = 0;
    while (start <= list.size()) {
      const std::size_t comma = list.find(',', start);
      const std::string_view item = list.substr(start, comma == std::string_view::npos ? list.npos : comma - start);
      if (!item.empty()) ids.emplace_back(item);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    return ids;
  };
  if (spec == "mean" || spec == "mean_all") {
    agg.mode = Mode::mean_all;
  } else if (spec.starts_with("single:")) {
    agg.mode = Mode::single;
    agg.subjects = {std::string(spec.substr(7))};
    if (agg.subjects.front().empty()) throw error(errc::config, "single aggregation needs a subject id");
  } else if (spec.starts_with("subset:")) {
    agg.mode = Mode::mean_subset;
    agg.subjects = split_ids(spec.substr(7));
    if (agg.subjects.empty()) throw error(errc::config, "subset aggregation needs at least one subject id");
  } else {
    throw error(errc::config, "unknown aggregation '" + std::string(spec) + "'");
  }
  return agg;
}

std::string SubjectAggregation::to_string() const {
  switch (mode) {
    case Mode::mean_all: return "mean";
    case Mode::single: return "single:" + subjects.front();
    case Mode::mean_subset: {
      std::string s = "subset:";
      for (std::size_t i = 0; i < subjects.size(); ++i) s += (i ? "," : "") + subjects[i];
      return s;
    }
  }
  return "mean";
}

std::vector<std::string> SubjectAggregation::resolve(std::span<const std::string> known) const {
  if (mode == Mode::mean_all) {
    if (known.empty()) throw error(errc::config, "no subjects available to average");
    return {known.begin(), known.end()};
  }
  if (subjects.empty()) throw error(errc::config, "subject aggregation has an empty subject list");
  std::set<std::string> unique;
  for (const auto& s : subjects) {
    if (std::find(known.begin(), known.end(), s) == known.end())
      throw error(errc::config, "unknown subject '" + s + "'");
    unique.insert(s);
  }
  return {unique.begin(), unique.end()};
}

SubjectFeatures gaze_subject_features(const GazeTable& table, std::span<const std::string_view> dims) {
  SubjectFeatures out;
  for (auto d : dims) out.dims.emplace_back(d);
  for (const auto& [key, words] : table) {
    auto& rows = out.trials[key];
    rows.reserve(words.size());
    for (const auto& f : words) {
      FeatureRow row;
      row.reserve(dims.size());
      for (auto d : dims) row.push_back(gaze_value(f, d));
      rows.emplace_back(std::move(row));
    }
  }
  return out;
}

SubjectFeatures eeg_subject_features(const EegTable& table, std::vector<std::string> dims) {
  SubjectFeatures out;
  out.dims = std::move(dims);
  for (const auto& [key, words] : table) {
    for (const auto& w : words)
      if (w && w->size() != out.dims.size())
        throw error(errc::dimension_mismatch, "EEG row width does not match the declared dims");
    out.trials.emplace(key, words);
  }
  return out;
}

TokenFeatures average_subjects(const SubjectFeatures& features, const SubjectAggregation& agg) {
  const auto known = subjects_of(features.trials);
  const auto selected = agg.resolve(known);
  const std::size_t width = features.dims.size();

  std::set<std::string> sentence_ids;
  for (const auto& [key, rows] : features.trials) sentence_ids.insert(key.sentence_id);

  TokenFeatures out;
  out.dims = features.dims;
  for (const auto& sid : sentence_ids) {
    std::vector<const std::vector<std::optional<FeatureRow>>*> trials;
    for (const auto& subject : selected) {
      auto it = features.trials.find(TrialKey{subject, sid});
      if (it != features.trials.end()) trials.push_back(&it->second);
    }
    if (trials.empty()) continue;
    const std::size_t length = trials.front()->size();
    std::vector<FeatureRow> rows(length, FeatureRow(width, 0.0));
    for (std::size_t t = 0; t < length; ++t) {
      std::size_t n = 0;
      for (const auto* trial : trials) {
        if (trial->size() != length)
          throw error(errc::dimension_mismatch, "subjects disagree on the length of sentence '" + sid + "'");
        const auto& row = (*trial)[t];
        if (!row) continue;
        if (row->size() != width) throw error(errc::dimension_mismatch, "feature row width mismatch");
        for (std::size_t d = 0; d < width; ++d) rows[t][d] += (*row)[d];
        ++n;
      }
      if (n > 1)
        for (auto& v : rows[t]) v /= static_cast<double>(n);
    }
    out.sentences.emplace(sid, std::move(rows));
  }
  return out;
}

std::vector<std::string> gaze_feature_set(std::string_view name) {
  if (name == "basic") return {"NFIX", "FFD", "TRT", "GD", "GPT"};
  if (name == "mtl") return {"NFIX", "MFD", "FFD", "TRT", "FIXP"};
  if (name == "extended")
    return {"NFIX",     "FFD",      "TRT",       "GD",        "GPT",       "MFD",      "FIXP",
            "prev_FFD", "prev_TRT", "prev_NFIX", "next_FFD",  "next_TRT",  "next_NFIX"};
  throw error(errc::config, "unknown gaze feature set '" + std::string(name) + "'");
}

TokenFeatures build_gaze_features(const GazeTable& table, const Corpus& corpus, const SubjectAggregation& agg,
                                  std::span<const std::string> dims) {
  const auto base_names = gaze_feature_names();
  std::vector<std::string> columns(base_names.begin(), base_names.end());
  columns.emplace_back("FIXP");
  const auto column_of = [&](std::string_view name) -> std::size_t {
    auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw error(errc::config, "unknown gaze feature '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - columns.begin());
  };

  struct Source {
    std::size_t column;
    int offset;
  };
  std::vector<Source> sources;
  for (const auto& d : dims) {
    if (d.starts_with("prev_"))
      sources.push_back({column_of(std::string_view(d).substr(5)), -1});
    else if (d.starts_with("next_"))
      sources.push_back({column_of(std::string_view(d).substr(5)), +1});
    else
      sources.push_back({column_of(d), 0});
  }

  auto averaged = average_subjects(gaze_subject_features(table, base_names), agg);
  const auto selected = agg.resolve(subjects_of(table));

  TokenFeatures out;
  out.dims.assign(dims.begin(), dims.end());
  for (const auto& s : corpus.sentences) {
    auto it = averaged.sentences.find(s.id);
    if (it == averaged.sentences.end()) continue;
    auto& base = it->second;
    if (base.size() != s.tokens.size())
      throw error(errc::dimension_mismatch, "gaze rows do not match the length of sentence '" + s.id + "'");
    const auto fixp = fixation_probability(table, s.id, selected);
    for (std::size_t t = 0; t < base.size(); ++t) base[t].push_back(fixp[t]);

    std::vector<FeatureRow> rows(base.size(), FeatureRow(sources.size(), 0.0));
    for (std::size_t t = 0; t < base.size(); ++t) {
      for (std::size_t k = 0; k < sources.size(); ++k) {
        const auto pos = static_cast<std::ptrdiff_t>(t) + sources[k].offset;
        if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(base.size())) continue;
        rows[t][k] = base[static_cast<std::size_t>(pos)][sources[k].column];
      }
    }
    out.sentences.emplace(s.id, std::move(rows));
  }
  return out;
}

NormalizationStats fit_normalization(std::span<const FeatureRow> rows, std::size_t dims) {
  NormalizationStats stats;
  stats.fitted = true;
  stats.min.assign(dims, 0.0);
  stats.max.assign(dims, 0.0);
  bool first = true;
  for (const auto& row : rows) {
    if (row.size() != dims) throw error(errc::dimension_mismatch, "row width does not match normalization dims");
    for (std::size_t d = 0; d < dims; ++d) {
      if (first) {
        stats.min[d] = stats.max[d] = row[d];
      } else {
        stats.min[d] = std::min(stats.min[d], row[d]);
        stats.max[d] = std::max(stats.max[d], row[d]);
      }
    }
    first = false;
  }
  return stats;
}

FeatureRow apply_normalization(const NormalizationStats& stats, std::span<const double> v) {
  if (!stats.fitted) throw error(errc::state, "normalization applied before it was fitted");
  if (v.size() != stats.min.size()) throw error(errc::dimension_mismatch, "row width does not match normalization");
  FeatureRow out(v.size());
  for (std::size_t d = 0; d < v.size(); ++d) {
    const double range = stats.max[d] - stats.min[d];
    out[d] = range > 0.0 ? std::clamp((v[d] - stats.min[d]) / range, 0.0, 1.0) : 0.0;
  }
  return out;
}

std::size_t discretize(double normalized, std::size_t n_bins) {
  if (n_bins < 2) throw error(errc::config, "discretization needs at least 2 bins");
  if (!(normalized >= 0.0 && normalized <= 1.0)) throw error(errc::domain, "value to discretize lies outside [0, 1]");
  const auto bin = static_cast<std::size_t>(std::floor(normalized * static_cast<double>(n_bins)));
  return std::min(bin, n_bins - 1);
}

std::vector<double> one_hot(std::size_t bin, std::size_t n_bins) {
  if (bin >= n_bins) throw error(errc::domain, "bin index out of range");
  std::vector<double> v(n_bins, 0.0);
  v[bin] = 1.0;
  return v;
}

TypeLexicon build_type_lexicon(const Corpus& corpus, const TokenFeatures& features) {
  const std::size_t width = features.dims.size();
  // Values per type and dim, sorted before summing so the result does not
  // depend on corpus order.
  std::map<std::string, std::vector<std::vector<double>>> columns;
  for (const auto& s : corpus.sentences) {
    auto it = features.sentences.find(s.id);
    if (it == features.sentences.end()) continue;
    if (it->second.size() != s.tokens.size())
      throw error(errc::dimension_mismatch, "features do not align with sentence '" + s.id + "'");
    for (std::size_t t = 0; t < s.tokens.size(); ++t) {
      const auto& row = it->second[t];
      if (row.size() != width) throw error(errc::validation, "token vectors differ in dimensionality");
      auto& cols = columns[lowercase(s.tokens[t])];
      if (cols.empty()) cols.resize(width);
      for (std::size_t d = 0; d < width; ++d) cols[d].push_back(row[d]);
    }
  }

  TypeLexicon lex;
  lex.dims = features.dims;
  for (auto& [type, cols] : columns) {
    TypeLexicon::Entry entry;
    entry.count = width == 0 ? 0 : cols.front().size();
    entry.values.resize(width);
    for (std::size_t d = 0; d < width; ++d) {
      std::sort(cols[d].begin(), cols[d].end());
      double acc = 0.0;
      for (double v : cols[d]) acc += v;
      entry.values[d] = acc / static_cast<double>(cols[d].size());
    }
    lex.entries.emplace(type, std::move(entry));
  }
  if (width == 0) {
    // Zero-dimensional lexicons still record occurrence counts.
    for (const auto& s : corpus.sentences)
      if (features.sentences.contains(s.id))
        for (const auto& tok : s.tokens) ++lex.entries[lowercase(tok)].count;
  }
  return lex;
}

LexiconApplication apply_type_lexicon(const TypeLexicon& lexicon, const Corpus& corpus) {
  LexiconApplication out;
  out.features.dims = lexicon.dims;
  out.features.dims.emplace_back(kUnknownIndicatorDim);
  const std::size_t width = lexicon.dims.size();
  for (const auto& s : corpus.sentences) {
    std::vector<FeatureRow> rows;
    rows.reserve(s.tokens.size());
    for (const auto& tok : s.tokens) {
      ++out.coverage.tokens;
      auto it = lexicon.entries.find(lowercase(tok));
      FeatureRow row;
      if (it == lexicon.entries.end()) {
        ++out.coverage.unknown;
        row.assign(width, 0.0);
        row.push_back(1.0);
      } else {
        row = it->second.values;
        row.push_back(0.0);
      }
      rows.push_back(std::move(row));
    }
    out.features.sentences.emplace(s.id, std::move(rows));
  }
  out.coverage.unknown_percent =
      out.coverage.tokens == 0 ? 0.0
                               : 100.0 * static_cast<double>(out.coverage.unknown) / static_cast<double>(out.coverage.tokens);
  return out;
}

std::vector<std::string> select_best_subjects(const std::map<std::string, double>& scores, std::size_t n) {
  std::vector<std::pair<std::string, double>> ranked(scores.begin(), scores.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ranked.size() && i < n; ++i) out.push_back(ranked[i].first);
  return out;
}

void write_lexicon(std::ostream& out, const TypeLexicon& lexicon) {
  ordered_json j;
  j["dims"] = lexicon.dims;
  ordered_json entries = ordered_json::object();
  for (const auto& [type, e] : lexicon.entries) {
    ordered_json entry;
    entry["values"] = e.values;
    entry["count"] = e.count;
    entries[type] = std::move(entry);
  }
  j["entries"] = std::move(entries);
  j["unknown_policy"] = lexicon.unknown_policy;
  out << j.dump(1) << '\n';
}

TypeLexicon parse_lexicon(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw error(errc::parse, std::string("malformed lexicon: ") + e.what());
  }
  TypeLexicon lex;
  try {
    lex.dims = j.at("dims").get<std::vector<std::string>>();
    lex.unknown_policy = j.value("unknown_policy", std::string("zeros+flag"));
    for (const auto& [type, e] : j.at("entries").items()) {
      TypeLexicon::Entry entry;
      entry.values = e.at("values").get<std::vector<double>>();
      entry.count = e.at("count").get<std::size_t>();
      if (entry.values.size() != lex.dims.size())
        throw error(errc::validation, "lexicon entry '" + type + "' has the wrong dimensionality");
      if (entry.count < 1) throw error(errc::validation, "lexicon entry '" + type + "' has count 0");
      lex.entries.emplace(type, std::move(entry));
    }
  } catch (const json::exception& e) {
    throw error(errc::parse, std::string("malformed lexicon: ") + e.what());
  }
  if (lex.unknown_policy != "zeros+flag")
    throw error(errc::validation, "unsupported unknown-token policy '" + lex.unknown_policy + "'");
  return lex;
}

void write_token_features(std::ostream& out, const TokenFeatures& features) {
  ordered_json header;
  header["dims"] = features.dims;
  out << dump_line(header);
  for (const auto& [sid, rows] : features.sentences) {
    for (std::size_t t = 0; t < rows.size(); ++t) {
      ordered_json j;
      j["sentence_id"] = sid;
      j["word_index"] = t;
      j["values"] = rows[t];
      out << dump_line(j);
    }
  }
}

TokenFeatures parse_token_features(std::istream& in, const Corpus& corpus, const ParseOptions& opts) {
  std::unordered_map<std::string, std::size_t> lengths;
  for (const auto& s : corpus.sentences) lengths.emplace(s.id, s.tokens.size());
  TokenFeatures out;
  bool have_header = false;
  std::map<std::string, std::vector<bool>> seen;
  for_each_record(in, [&](const json& r, std::size_t line) {
    if (!have_header) {
      if (!r.contains("dims") || !r["dims"].is_array()) throw error(errc::parse, "missing dims header", line);
      out.dims = r["dims"].get<std::vector<std::string>>();
      have_header = true;
      return;
    }
    check_fields(r, {"sentence_id", "word_index", "values"}, opts.strict, line);
    const std::string sid = require_string(r, "sentence_id", line);
    auto len = lengths.find(sid);
    if (len == lengths.end()) throw error(errc::validation, "features for unknown sentence '" + sid + "'", line);
    const std::int64_t w = require_integer(r, "word_index", line);
    if (w < 0 || static_cast<std::size_t>(w) >= len->second) throw error(errc::validation, "word_index out of range", line);
    const json& values = require(r, "values", line);
    if (!values.is_array() || values.size() != out.dims.size())
      throw error(errc::validation, "feature row width does not match the dims header", line);
    auto& rows = out.sentences.try_emplace(sid, len->second, FeatureRow(out.dims.size(), 0.0)).first->second;
    auto& marks = seen.try_emplace(sid, len->second, false).first->second;
    if (marks[w]) throw error(errc::validation, "duplicate feature row", line);
    marks[w] = true;
    for (std::size_t d = 0; d < values.size(); ++d) {
      if (!values[d].is_number()) throw error(errc::parse, "feature values must be numbers", line);
      rows[static_cast<std::size_t>(w)][d] = values[d].get<double>();
    }
  });
  for (const auto& [sid, marks] : seen)
    if (std::find(marks.begin(), marks.end(), false) != marks.end())
      throw error(errc::validation, "sentence '" + sid + "' is missing feature rows");
  return out;
}

}  // namespace cogsig
