#include "cogsig/gaze.hpp"

#include <array>
#include <istream>
#include <ostream>
#include <unordered_map>

#include "cogsig/error.hpp"
#include "cogsig/jsonio.hpp"
#include "cogsig/parallel.hpp"

namespace cogsig {

namespace {

constexpr std::array<std::string_view, 6> kGazeNames = {"NFIX", "FFD", "GD", "TRT", "GPT", "MFD"};

}  // namespace

std::span<const std::string_view> gaze_feature_names() { return kGazeNames; }

double gaze_value(const WordGazeFeatures& f, std::string_view name) {
  if (name == "NFIX") return f.nfix;
  if (name == "FFD") return f.ffd;
  if (name == "GD") return f.gd;
  if (name == "TRT") return f.trt;
  if (name == "GPT") return f.gpt;
  if (name == "MFD") return f.mfd;
  throw error(errc::config, "unknown gaze feature '" + std::string(name) + "'");
}

std::vector<FixationEvent> filter_fixations(std::span<const FixationEvent> events, double min_duration_ms) {
  std::vector<FixationEvent> kept;
  kept.reserve(events.size());
  for (const auto& e : events)
    if (e.duration_ms >= min_duration_ms) kept.push_back(e);
  return kept;
}

std::vector<WordGazeFeatures> compute_word_gaze(std::span<const FixationEvent> events, std::size_t sentence_length,
                                                bool strict, double min_duration_ms) {
  constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::vector<WordGazeFeatures> words(sentence_length);
  std::vector<std::size_t> first(sentence_length, npos);

  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (e.word_index < 0 || static_cast<std::size_t>(e.word_index) >= sentence_length)
      throw error(errc::validation, "word_index " + std::to_string(e.word_index) + " out of range for sentence '" +
                                        e.sentence_id + "' of length " + std::to_string(sentence_length));
    if (strict && e.duration_ms < min_duration_ms)
      throw error(errc::precondition, "unfiltered fixation of " + std::to_string(e.duration_ms) + " ms in sentence '" +
                                          e.sentence_id + "'");
    if (i > 0 && e.seq <= events[i - 1].seq)
      throw error(errc::precondition, "fixations not ordered by seq in sentence '" + e.sentence_id + "'");
    const auto w = static_cast<std::size_t>(e.word_index);
    auto& f = words[w];
    ++f.nfix;
    f.trt += e.duration_ms;
    if (first[w] == npos) {
      first[w] = i;
      f.ffd = e.duration_ms;
    }
  }

  for (std::size_t w = 0; w < sentence_length; ++w) {
    if (first[w] == npos) continue;
    auto& f = words[w];
    const auto wi = static_cast<std::int64_t>(w);
    // First-pass run: consecutive events on w starting at its first event.
    std::size_t i = first[w];
    for (; i < events.size() && events[i].word_index == wi; ++i) f.gd += events[i].duration_ms;
    // Go-past window: everything up to the first event right of w, which
    // includes regressions and later re-fixations of w.
    for (i = first[w]; i < events.size() && events[i].word_index <= wi; ++i) f.gpt += events[i].duration_ms;
    f.mfd = f.trt / f.nfix;
  }
  return words;
}

double fixation_probability(std::span<const std::optional<int>> nfix_by_subject) {
  if (nfix_by_subject.empty()) throw error(errc::config, "fixation probability needs a non-empty subject set");
  std::size_t with_trial = 0;
  std::size_t fixated = 0;
  for (const auto& n : nfix_by_subject) {
    if (!n) continue;
    ++with_trial;
    if (*n >= 1) ++fixated;
  }
  if (with_trial == 0) throw error(errc::validation, "no subject in the set has a trial for this sentence");
  return static_cast<double>(fixated) / static_cast<double>(with_trial);
}

std::vector<double> fixation_probability(const GazeTable& table, std::string_view sentence_id,
                                         std::span<const std::string> subjects) {
  if (subjects.empty()) throw error(errc::config, "fixation probability needs a non-empty subject set");
  std::vector<const std::vector<WordGazeFeatures>*> trials;
  for (const auto& s : subjects) {
    auto it = table.find(TrialKey{s, std::string(sentence_id)});
    trials.push_back(it == table.end() ? nullptr : &it->second);
  }
  std::size_t length = 0;
  for (const auto* t : trials)
    if (t) length = t->size();
  std::vector<double> out(length, 0.0);
  std::vector<std::optional<int>> nfix(trials.size());
  for (std::size_t w = 0; w < length; ++w) {
    for (std::size_t k = 0; k < trials.size(); ++k)
      nfix[k] = trials[k] ? std::optional<int>((*trials[k])[w].nfix) : std::nullopt;
    out[w] = fixation_probability(nfix);
  }
  return out;
}

GazeTable extract_gaze(const Corpus& corpus, const FixationLog& fixations, const GazeOptions& opts) {
  std::unordered_map<std::string, std::size_t> lengths;
  for (const auto& s : corpus.sentences) lengths.emplace(s.id, s.tokens.size());

  std::vector<const FixationLog::value_type*> trials;
  trials.reserve(fixations.size());
  for (const auto& entry : fixations) {
    if (!lengths.contains(entry.first.sentence_id))
      throw error(errc::validation, "fixations for unknown sentence '" + entry.first.sentence_id + "'");
    trials.push_back(&entry);
  }

  std::vector<std::vector<WordGazeFeatures>> results(trials.size());
  parallel_for(trials.size(), opts.threads, [&](std::size_t i) {
    const auto& [key, events] = *trials[i];
    auto kept = filter_fixations(events, opts.min_duration_ms);
    results[i] = compute_word_gaze(kept, lengths.at(key.sentence_id), opts.strict, opts.min_duration_ms);
  });

  GazeTable table;
  for (std::size_t i = 0; i < trials.size(); ++i) table.emplace(trials[i]->first, std::move(results[i]));
  return table;
}

void write_gaze_features(std::ostream& out, const GazeTable& table) {
  for (const auto& [key, words] : table) {
    for (std::size_t w = 0; w < words.size(); ++w) {
      const auto& f = words[w];
      ordered_json j;
      j["subject"] = key.subject;
      j["sentence_id"] = key.sentence_id;
      j["word_index"] = w;
      j["NFIX"] = f.nfix;
      j["FFD"] = f.ffd;
      j["GD"] = f.gd;
      j["TRT"] = f.trt;
      j["GPT"] = f.gpt;
      j["MFD"] = f.mfd;
      out << dump_line(j);
    }
  }
}

GazeTable parse_gaze_features(std::istream& in, const Corpus& corpus, const ParseOptions& opts) {
  std::unordered_map<std::string, std::size_t> lengths;
  for (const auto& s : corpus.sentences) lengths.emplace(s.id, s.tokens.size());
  GazeTable table;
  std::map<TrialKey, std::vector<bool>> seen;
  for_each_record(in, [&](const json& r, std::size_t line) {
    check_fields(r, {"subject", "sentence_id", "word_index", "NFIX", "FFD", "GD", "TRT", "GPT", "MFD"}, opts.strict,
                 line);
    TrialKey key{require_string(r, "subject", line), require_string(r, "sentence_id", line)};
    auto len = lengths.find(key.sentence_id);
    if (len == lengths.end())
      throw error(errc::validation, "gaze features for unknown sentence '" + key.sentence_id + "'", line);
    const std::int64_t w = require_integer(r, "word_index", line);
    if (w < 0 || static_cast<std::size_t>(w) >= len->second)
      throw error(errc::validation, "word_index out of range", line);
    auto [it, inserted] = table.try_emplace(key, len->second);
    auto& marks = seen.try_emplace(key, len->second, false).first->second;
    if (marks[w]) throw error(errc::validation, "duplicate gaze record", line);
    marks[w] = true;
    auto& f = it->second[static_cast<std::size_t>(w)];
    f.nfix = static_cast<int>(require_integer(r, "NFIX", line));
    f.ffd = require_number(r, "FFD", line);
    f.gd = require_number(r, "GD", line);
    f.trt = require_number(r, "TRT", line);
    f.gpt = require_number(r, "GPT", line);
    f.mfd = require_number(r, "MFD", line);
  });
  return table;
}

}  // namespace cogsig
