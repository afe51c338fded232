#pragma once

#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cogsig/error.hpp"
#include "cogsig/ingest.hpp"

namespace testsupport {

inline std::vector<cogsig::FixationEvent> trial(const std::vector<std::pair<int, double>>& word_duration,
                                                const std::string& subject = "A",
                                                const std::string& sentence = "s1") {
  std::vector<cogsig::FixationEvent> out;
  for (std::size_t i = 0; i < word_duration.size(); ++i) {
    cogsig::FixationEvent e;
    e.subject = subject;
    e.sentence_id = sentence;
    e.seq = static_cast<std::int64_t>(i);
    e.word_index = word_duration[i].first;
    e.duration_ms = word_duration[i].second;
    out.push_back(e);
  }
  return out;
}

inline cogsig::Corpus ner_corpus(const std::vector<std::vector<std::string>>& sentences) {
  cogsig::Corpus c;
  c.task = cogsig::Task::ner;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    cogsig::Sentence s;
    s.id = "s" + std::to_string(i + 1);
    s.tokens = sentences[i];
    s.labels.assign(s.tokens.size(), "O");
    c.sentences.push_back(s);
  }
  return c;
}

template <class Fn>
cogsig::errc error_code_of(Fn&& fn) {
  try {
    fn();
  } catch (const cogsig::error& e) {
    return e.code();
  }
  throw std::logic_error("expected a cogsig::error");
}

inline std::istringstream lines(const std::string& text) { return std::istringstream(text); }

}  // namespace testsupport
