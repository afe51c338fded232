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
#include <utility>
#include <vector>

namespace cogsig {

enum class Task { ner, relclass, sentiment2, sentiment3 };

std::string_view to_string(Task task);
Task parse_task(std::string_view name);
bool is_token_level(Task task);

// Relation inventory for relation classification, in canonical spelling.
std::span<const std::string_view> relation_types();

struct Sentence {
  std::string id;
  std::vector<std::string> tokens;
  // ner: one BIO tag per token; relclass: one or more relation types;
  // sentiment: exactly one of neg/neu/pos.
  std::vector<std::string> labels;

  bool operator==(const Sentence&) const = default;
};

struct Corpus {
  Task task = Task::ner;
  std::vector<Sentence> sentences;

  const Sentence* find(std::string_view id) const;
  std::size_t token_count() const;
  bool operator==(const Corpus&) const = default;
};

struct FixationEvent {
  std::string subject;
  std::string sentence_id;
  std::int64_t seq = 0;
  std::int64_t word_index = 0;
  double duration_ms = 0.0;
  std::optional<double> onset_ms;

  bool operator==(const FixationEvent&) const = default;
};

// One subject reading one sentence.
struct TrialKey {
  std::string subject;
  std::string sentence_id;

  auto operator<=>(const TrialKey&) const = default;
};

// Fixations grouped per trial, each group ordered by seq.
using FixationLog = std::map<TrialKey, std::vector<FixationEvent>>;

enum class Band : std::uint8_t { theta1, theta2, alpha1, alpha2, beta1, beta2, gamma1, gamma2 };

inline constexpr std::size_t kBandCount = 8;
inline constexpr std::size_t kElectrodeCount = 105;

std::string_view to_string(Band band);
std::optional<Band> parse_band(std::string_view name);
inline constexpr std::array<Band, kBandCount> kAllBands = {Band::theta1, Band::theta2, Band::alpha1, Band::alpha2,
                                                           Band::beta1,  Band::beta2,  Band::gamma1, Band::gamma2};

// Band-level amplitudes (microvolts) indexed [band][electrode].
using BandMatrix = std::array<std::array<double, kElectrodeCount>, kBandCount>;

struct EegFixationRecord {
  std::string subject;
  std::string sentence_id;
  std::int64_t seq = 0;
  BandMatrix bands{};

  bool operator==(const EegFixationRecord&) const = default;
};

struct ParseOptions {
  // Reject unknown fields instead of ignoring them; also enables the
  // precondition checks other modules perform in strict mode.
  bool strict = false;
};

// Missing trials are accepted but reported.
struct ValidationReport {
  std::size_t sentences = 0;
  std::size_t tokens = 0;
  std::size_t fixations = 0;
  std::size_t eeg_records = 0;
  std::vector<std::string> subjects;
  std::vector<TrialKey> missing_trials;
  std::vector<std::string> warnings;
};

Corpus parse_corpus(std::istream& in, Task task, const ParseOptions& opts = {});
FixationLog parse_fixations(std::istream& in, const ParseOptions& opts = {}, const Corpus* corpus = nullptr);
std::vector<EegFixationRecord> parse_eeg(std::istream& in, const ParseOptions& opts = {},
                                         const FixationLog* fixations = nullptr);

// Throws validation errors for corpus-level invariants (used by the parser
// and by the synthetic generator).
void validate_corpus(const Corpus& corpus);

// Sorted distinct subjects of any map keyed by TrialKey.
template <class TrialMap>
std::vector<std::string> subjects_of(const TrialMap& trials) {
  std::vector<std::string> out;
  for (const auto& entry : trials)
    if (out.empty() || out.back() != entry.first.subject) out.push_back(entry.first.subject);
  return out;
}
ValidationReport validate_coverage(const Corpus& corpus, const FixationLog& fixations,
                                   std::span<const EegFixationRecord> eeg = {});

// Canonical serializations: fixed key order, shortest round-trip numbers,
// one record per line, records in input order (fixations in trial order).
void write_corpus(std::ostream& out, const Corpus& corpus);
void write_fixations(std::ostream& out, const FixationLog& log);
void write_eeg(std::ostream& out, std::span<const EegFixationRecord> records);

std::string lowercase(std::string_view s);

}  // namespace cogsig
