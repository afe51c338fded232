#include "cogsig/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "cogsig/error.hpp"
#include "cogsig/jsonio.hpp"

namespace cogsig {

namespace {

constexpr std::array<std::string_view, 11> kRelationTypes = {
    "award",       "employer",    "education",   "founder",     "visited",     "wife",
    "political-affiliation",      "nationality", "job-title",   "birth-place", "death-place"};

constexpr std::array<std::string_view, kBandCount> kBandNames = {"theta1", "theta2", "alpha1", "alpha2",
                                                                 "beta1",  "beta2",  "gamma1", "gamma2"};

std::string canonical_relation(std::string_view raw) {
  std::string s(raw);
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

void validate_bio(const Sentence& s, std::optional<std::size_t> line) {
  std::string_view prev_type;
  bool prev_inside = false;
  for (std::size_t i = 0; i < s.labels.size(); ++i) {
    const std::string& tag = s.labels[i];
    if (tag == "O") {
      prev_inside = false;
      continue;
    }
    if (tag.size() < 3 || tag[1] != '-' || (tag[0] != 'B' && tag[0] != 'I'))
      throw error(errc::validation, "sentence '" + s.id + "': malformed BIO tag '" + tag + "'", line);
    std::string_view type = std::string_view(tag).substr(2);
    if (tag[0] == 'I' && (!prev_inside || type != prev_type))
      throw error(errc::validation,
                  "sentence '" + s.id + "': tag '" + tag + "' at position " + std::to_string(i) +
                      " does not continue an entity of the same type",
                  line);
    prev_inside = true;
    prev_type = type;
  }
}

void validate_sentence(const Sentence& s, Task task, std::optional<std::size_t> line) {
  if (s.id.empty()) throw error(errc::validation, "empty sentence id", line);
  if (s.tokens.empty()) throw error(errc::validation, "sentence '" + s.id + "' has no tokens", line);
  switch (task) {
    case Task::ner:
      if (s.labels.size() != s.tokens.size())
        throw error(errc::validation,
                    "sentence '" + s.id + "': " + std::to_string(s.labels.size()) + " tags for " +
                        std::to_string(s.tokens.size()) + " tokens",
                    line);
      validate_bio(s, line);
      break;
    case Task::relclass: {
      if (s.labels.empty()) throw error(errc::validation, "sentence '" + s.id + "' has no relation label", line);
      for (const auto& l : s.labels)
        if (std::find(kRelationTypes.begin(), kRelationTypes.end(), l) == kRelationTypes.end())
          throw error(errc::validation, "sentence '" + s.id + "': unknown relation type '" + l + "'", line);
      break;
    }
    case Task::sentiment2:
    case Task::sentiment3: {
      if (s.labels.size() != 1)
        throw error(errc::validation, "sentence '" + s.id + "' must carry exactly one sentiment label", line);
      const auto& l = s.labels.front();
      const bool ok = l == "neg" || l == "pos" || (task == Task::sentiment3 && l == "neu");
      if (!ok) throw error(errc::validation, "sentence '" + s.id + "': invalid sentiment label '" + l + "'", line);
      break;
    }
  }
}

std::vector<std::string> string_array(const json& v, std::string_view key, std::size_t line) {
  if (!v.is_array()) throw error(errc::parse, "field '" + std::string(key) + "' must be an array of strings", line);
  std::vector<std::string> out;
  out.reserve(v.size());
  for (const auto& e : v) {
    if (!e.is_string()) throw error(errc::parse, "field '" + std::string(key) + "' must be an array of strings", line);
    out.push_back(e.get<std::string>());
  }
  return out;
}

}  // namespace

std::string_view to_string(Task task) {
  switch (task) {
    case Task::ner: return "ner";
    case Task::relclass: return "relclass";
    case Task::sentiment2: return "sentiment2";
    case Task::sentiment3: return "sentiment3";
  }
  return "ner";
}

Task parse_task(std::string_view name) {
  if (name == "ner") return Task::ner;
  if (name == "relclass") return Task::relclass;
  if (name == "sentiment2") return Task::sentiment2;
  if (name == "sentiment3") return Task::sentiment3;
  throw error(errc::config, "unknown task '" + std::string(name) + "'");
}

bool is_token_level(Task task) { return task == Task::ner; }

std::span<const std::string_view> relation_types() { return kRelationTypes; }

std::string_view to_string(Band band) { return kBandNames[static_cast<std::size_t>(band)]; }

std::optional<Band> parse_band(std::string_view name) {
  for (std::size_t b = 0; b < kBandCount; ++b)
    if (kBandNames[b] == name) return static_cast<Band>(b);
  return std::nullopt;
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

const Sentence* Corpus::find(std::string_view id) const {
  for (const auto& s : sentences)
    if (s.id == id) return &s;
  return nullptr;
}

std::size_t Corpus::token_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.tokens.size();
  return n;
}

void validate_corpus(const Corpus& corpus) {
  std::unordered_set<std::string> ids;
  for (const auto& s : corpus.sentences) {
    validate_sentence(s, corpus.task, std::nullopt);
    if (!ids.insert(s.id).second) throw error(errc::duplicate_id, "duplicate sentence id '" + s.id + "'");
  }
}

Corpus parse_corpus(std::istream& in, Task task, const ParseOptions& opts) {
  Corpus corpus;
  corpus.task = task;
  std::unordered_set<std::string> ids;
  for_each_record(in, [&](const json& r, std::size_t line) {
    check_fields(r, {"id", "tokens", "labels"}, opts.strict, line);
    Sentence s;
    s.id = require_string(r, "id", line);
    s.tokens = string_array(require(r, "tokens", line), "tokens", line);
    const json& labels = require(r, "labels", line);
    if (labels.is_string() && task != Task::ner) {
      s.labels.push_back(labels.get<std::string>());
    } else {
      s.labels = string_array(labels, "labels", line);
    }
    if (task == Task::relclass)
      for (auto& l : s.labels) l = canonical_relation(l);
    validate_sentence(s, task, line);
    if (!ids.insert(s.id).second) throw error(errc::duplicate_id, "duplicate sentence id '" + s.id + "'", line);
    corpus.sentences.push_back(std::move(s));
  });
  return corpus;
}

FixationLog parse_fixations(std::istream& in, const ParseOptions& opts, const Corpus* corpus) {
  FixationLog log;
  std::unordered_map<std::string, std::size_t> lengths;
  if (corpus)
    for (const auto& s : corpus->sentences) lengths.emplace(s.id, s.tokens.size());
  for_each_record(in, [&](const json& r, std::size_t line) {
    check_fields(r, {"subject", "sentence_id", "seq", "word_index", "duration_ms", "onset_ms"}, opts.strict, line);
    FixationEvent e;
    e.subject = require_string(r, "subject", line);
    e.sentence_id = require_string(r, "sentence_id", line);
    e.seq = require_integer(r, "seq", line);
    e.word_index = require_integer(r, "word_index", line);
    e.duration_ms = require_number(r, "duration_ms", line);
    if (auto it = r.find("onset_ms"); it != r.end()) {
      if (!it->is_number()) throw error(errc::parse, "field 'onset_ms' must be a number", line);
      e.onset_ms = it->get<double>();
    }
    if (!(e.duration_ms > 0.0) || !std::isfinite(e.duration_ms))
      throw error(errc::validation, "duration_ms must be positive and finite", line);
    if (e.word_index < 0) throw error(errc::validation, "word_index must be non-negative", line);
    if (corpus) {
      auto len = lengths.find(e.sentence_id);
      if (len == lengths.end())
        throw error(errc::validation, "fixation on unknown sentence '" + e.sentence_id + "'", line);
      if (e.word_index >= static_cast<std::int64_t>(len->second))
        throw error(errc::validation,
                    "word_index " + std::to_string(e.word_index) + " out of range for sentence '" + e.sentence_id +
                        "' of length " + std::to_string(len->second),
                    line);
    }
    auto& group = log[TrialKey{e.subject, e.sentence_id}];
    if (!group.empty() && e.seq <= group.back().seq)
      throw error(errc::validation,
                  "seq " + std::to_string(e.seq) + " does not increase within (" + e.subject + ", " + e.sentence_id +
                      ")",
                  line);
    group.push_back(std::move(e));
  });
  return log;
}

std::vector<EegFixationRecord> parse_eeg(std::istream& in, const ParseOptions& opts, const FixationLog* fixations) {
  std::vector<EegFixationRecord> records;
  std::set<std::tuple<std::string, std::string, std::int64_t>> seen;
  for_each_record(in, [&](const json& r, std::size_t line) {
    check_fields(r, {"subject", "sentence_id", "seq", "bands"}, opts.strict, line);
    EegFixationRecord rec;
    rec.subject = require_string(r, "subject", line);
    rec.sentence_id = require_string(r, "sentence_id", line);
    rec.seq = require_integer(r, "seq", line);
    const json& bands = require(r, "bands", line);
    if (!bands.is_object()) throw error(errc::parse, "field 'bands' must be an object", line);
    for (const auto& [name, values] : bands.items()) {
      if (!parse_band(name)) {
        if (opts.strict) throw error(errc::validation, "unknown band '" + name + "'", line);
      }
    }
    for (Band band : kAllBands) {
      const std::string name(to_string(band));
      auto it = bands.find(name);
      if (it == bands.end()) throw error(errc::validation, "missing band '" + name + "'", line);
      if (!it->is_array()) throw error(errc::parse, "band '" + name + "' must be an array", line);
      if (it->size() != kElectrodeCount)
        throw error(errc::validation,
                    "band '" + name + "' has " + std::to_string(it->size()) + " values, expected " +
                        std::to_string(kElectrodeCount),
                    line);
      auto& row = rec.bands[static_cast<std::size_t>(band)];
      for (std::size_t e = 0; e < kElectrodeCount; ++e) {
        const json& v = (*it)[e];
        if (!v.is_number()) throw error(errc::parse, "band '" + name + "' contains a non-number", line);
        row[e] = v.get<double>();
        if (!std::isfinite(row[e])) throw error(errc::validation, "band '" + name + "' contains a non-finite value", line);
      }
    }
    if (!seen.emplace(rec.subject, rec.sentence_id, rec.seq).second)
      throw error(errc::validation, "duplicate EEG record for (" + rec.subject + ", " + rec.sentence_id + ", " +
                                        std::to_string(rec.seq) + ")",
                  line);
    if (fixations) {
      auto g = fixations->find(TrialKey{rec.subject, rec.sentence_id});
      const bool found =
          g != fixations->end() && std::ranges::binary_search(g->second, rec.seq, {}, &FixationEvent::seq);
      if (!found)
        throw error(errc::dangling_record,
                    "EEG record (" + rec.subject + ", " + rec.sentence_id + ", " + std::to_string(rec.seq) +
                        ") has no matching fixation",
                    line);
    }
    records.push_back(std::move(rec));
  });
  return records;
}

ValidationReport validate_coverage(const Corpus& corpus, const FixationLog& fixations,
                                   std::span<const EegFixationRecord> eeg) {
  ValidationReport report;
  report.sentences = corpus.sentences.size();
  report.tokens = corpus.token_count();
  report.subjects = subjects_of(fixations);
  report.eeg_records = eeg.size();
  for (const auto& [key, events] : fixations) report.fixations += events.size();
  for (const auto& subject : report.subjects)
    for (const auto& s : corpus.sentences)
      if (!fixations.contains(TrialKey{subject, s.id})) report.missing_trials.push_back(TrialKey{subject, s.id});
  if (!eeg.empty()) {
    std::set<std::tuple<std::string, std::string, std::int64_t>> keys;
    for (const auto& r : eeg) keys.emplace(r.subject, r.sentence_id, r.seq);
    std::size_t without_eeg = 0;
    for (const auto& [key, events] : fixations)
      for (const auto& e : events)
        if (!keys.contains({e.subject, e.sentence_id, e.seq})) ++without_eeg;
    if (without_eeg > 0)
      report.warnings.push_back(std::to_string(without_eeg) + " fixation(s) have no EEG record");
  }
  if (!report.missing_trials.empty())
    report.warnings.push_back(std::to_string(report.missing_trials.size()) + " (subject, sentence) trial(s) missing");
  return report;
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& s : corpus.sentences) {
    ordered_json j;
    j["id"] = s.id;
    j["tokens"] = s.tokens;
    if (corpus.task == Task::sentiment2 || corpus.task == Task::sentiment3)
      j["labels"] = s.labels.front();
    else
      j["labels"] = s.labels;
    out << dump_line(j);
  }
}

void write_fixations(std::ostream& out, const FixationLog& log) {
  for (const auto& [key, events] : log) {
    for (const auto& e : events) {
      ordered_json j;
      j["subject"] = e.subject;
      j["sentence_id"] = e.sentence_id;
      j["seq"] = e.seq;
      j["word_index"] = e.word_index;
      j["duration_ms"] = e.duration_ms;
      if (e.onset_ms) j["onset_ms"] = *e.onset_ms;
      out << dump_line(j);
    }
  }
}

void write_eeg(std::ostream& out, std::span<const EegFixationRecord> records) {
  for (const auto& r : records) {
    ordered_json j;
    j["subject"] = r.subject;
    j["sentence_id"] = r.sentence_id;
    j["seq"] = r.seq;
    ordered_json bands;
    for (Band band : kAllBands) {
      const auto& row = r.bands[static_cast<std::size_t>(band)];
      bands[std::string(to_string(band))] = std::vector<double>(row.begin(), row.end());
    }
    j["bands"] = std::move(bands);
    out << dump_line(j);
  }
}

}  // namespace cogsig
