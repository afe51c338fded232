#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cogsig/ingest.hpp"

namespace cogsig {

// Parameters of the synthetic reading corpus. Word types are drawn from a
// Zipf distribution; a fraction of types behave like names and usually start
// entities. Planted effects shift the reading signal on target tokens: tokens
// inside entity spans (ner), or all tokens of sentences carrying
// `effect_label` (sentence-level tasks).
struct SynthSpec {
  std::size_t sentences = 100;
  std::size_t subjects = 3;
  Task task = Task::ner;

  std::size_t vocab_size = 400;
  std::vector<std::string> vocabulary;  // overrides generated pseudo-words
  std::size_t min_length = 8;
  std::size_t max_length = 20;
  double zipf_exponent = 1.0;

  double name_type_fraction = 0.15;
  double name_entity_prob = 0.6;
  double other_entity_prob = 0.04;
  double continue_prob = 0.35;

  double base_duration_ms = 200.0;
  double duration_sd_ms = 60.0;
  double skip_prob = 0.1;
  double refixation_prob = 0.2;
  double regression_prob = 0.1;
  double micro_fixation_prob = 0.05;  // sub-100 ms fixations the filter removes
  double missing_trial_prob = 0.0;

  bool with_eeg = true;
  double eeg_noise_uv = 1.0;

  // "TRT" (milliseconds) or an EEG band name (microvolts) -> shift.
  std::map<std::string, double> effects;
  std::optional<std::string> effect_label;
};

struct SynthMetadata {
  std::uint64_t seed = 0;
  std::map<std::string, double> effects;
  std::string effect_label;
  std::vector<std::string> subjects;
  // Per sentence, whether each token received the planted shift.
  std::map<std::string, std::vector<bool>> targets;
};

struct SynthData {
  Corpus corpus;
  FixationLog fixations;
  std::vector<EegFixationRecord> eeg;
  SynthMetadata meta;
};

SynthData generate_synthetic(const SynthSpec& spec, std::uint64_t seed);

void write_synth_metadata(std::ostream& out, const SynthMetadata& meta);

}  // namespace cogsig
