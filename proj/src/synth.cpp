#include "cogsig/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>
#include <set>

#include "cogsig/error.hpp"
#include "cogsig/jsonio.hpp"
#include "cogsig/rng.hpp"

namespace cogsig {

namespace {

constexpr std::array<std::string_view, 3> kEntityClasses = {"PER", "LOC", "ORG"};
constexpr std::array<double, kBandCount> kBandBaseUv = {8.0, 7.0, 6.0, 5.5, 4.5, 4.0, 3.0, 2.5};

std::string two_digits(std::size_t i) {
  std::string s = std::to_string(i);
  return s.size() < 2 ? "0" + s : s;
}

std::string sentence_id(std::size_t i) {
  std::string s = std::to_string(i);
  return "s" + std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s;
}

std::vector<std::string> pseudo_words(std::size_t n, Rng& rng) {
  static constexpr std::string_view consonants = "bdfgklmnprstvz";
  static constexpr std::string_view vowels = "aeiou";
  std::set<std::string> seen;
  std::vector<std::string> words;
  words.reserve(n);
  while (words.size() < n) {
    const std::size_t syllables = 2 + rng.index(3);
    std::string w;
    for (std::size_t s = 0; s < syllables; ++s) {
      w += consonants[rng.index(consonants.size())];
      w += vowels[rng.index(vowels.size())];
    }
    if (seen.insert(w).second) words.push_back(std::move(w));
  }
  return words;
}

struct TypeProfile {
  bool name_like = false;
  std::string_view entity_class;
};

void check_spec(const SynthSpec& spec) {
  if (spec.sentences == 0) throw error(errc::config, "synthetic corpus needs at least one sentence");
  if (spec.subjects == 0) throw error(errc::config, "synthetic corpus needs at least one subject");
  if (spec.min_length == 0 || spec.min_length > spec.max_length)
    throw error(errc::config, "invalid sentence length range");
  if (spec.vocabulary.empty() && spec.vocab_size == 0) throw error(errc::config, "empty vocabulary");
  if (!(spec.skip_prob >= 0.0 && spec.skip_prob < 1.0)) throw error(errc::config, "skip_prob must lie in [0, 1)");
  for (const auto& [feature, delta] : spec.effects) {
    if (feature != "TRT" && !parse_band(feature))
      throw error(errc::config, "planted effect on unsupported feature '" + feature + "'");
    if (parse_band(feature) && !spec.with_eeg)
      throw error(errc::config, "EEG effect '" + feature + "' requires EEG generation");
    if (!std::isfinite(delta)) throw error(errc::config, "planted effect must be finite");
  }
}

std::string default_effect_label(Task task) {
  switch (task) {
    case Task::ner: return "entity";
    case Task::relclass: return "award";
    case Task::sentiment2:
    case Task::sentiment3: return "pos";
  }
  return "entity";
}

}  // namespace

SynthData generate_synthetic(const SynthSpec& spec, std::uint64_t seed) {
  check_spec(spec);
  SynthData data;
  data.corpus.task = spec.task;
  data.meta.seed = seed;
  data.meta.effects = spec.effects;
  data.meta.effect_label = spec.effect_label.value_or(default_effect_label(spec.task));

  Rng corpus_rng(derive_seed(seed, "corpus"));
  const auto vocab = spec.vocabulary.empty() ? pseudo_words(spec.vocab_size, corpus_rng) : spec.vocabulary;

  std::vector<TypeProfile> profiles(vocab.size());
  for (auto& p : profiles) {
    p.name_like = corpus_rng.bernoulli(spec.name_type_fraction);
    p.entity_class = kEntityClasses[corpus_rng.index(kEntityClasses.size())];
  }

  std::vector<double> cumulative(vocab.size());
  double total = 0.0;
  for (std::size_t r = 0; r < vocab.size(); ++r) {
    total += 1.0 / std::pow(static_cast<double>(r + 1), spec.zipf_exponent);
    cumulative[r] = total;
  }
  const auto draw_type = [&] {
    const double u = corpus_rng.uniform() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cumulative.begin(), vocab.size() - 1));
  };

  const auto relations = relation_types();
  for (std::size_t i = 0; i < spec.sentences; ++i) {
    Sentence s;
    s.id = sentence_id(i);
    const std::size_t length = spec.min_length + corpus_rng.index(spec.max_length - spec.min_length + 1);
    std::vector<std::size_t> types(length);
    for (auto& t : types) t = draw_type();
    for (auto t : types) s.tokens.push_back(vocab[t]);
    std::vector<bool> targets(length, false);

    switch (spec.task) {
      case Task::ner: {
        s.labels.assign(length, "O");
        for (std::size_t t = 0; t < length; ++t) {
          const auto& prof = profiles[types[t]];
          const double p = prof.name_like ? spec.name_entity_prob : spec.other_entity_prob;
          if (!corpus_rng.bernoulli(p)) continue;
          const std::string cls(prof.name_like ? prof.entity_class
                                               : kEntityClasses[corpus_rng.index(kEntityClasses.size())]);
          s.labels[t] = "B-" + cls;
          targets[t] = true;
          while (t + 1 < length && corpus_rng.bernoulli(spec.continue_prob)) {
            ++t;
            s.labels[t] = "I-" + cls;
            targets[t] = true;
          }
        }
        break;
      }
      case Task::relclass: {
        const std::size_t first = corpus_rng.index(relations.size());
        s.labels.emplace_back(relations[first]);
        if (corpus_rng.bernoulli(0.2)) {
          std::size_t second = corpus_rng.index(relations.size() - 1);
          if (second >= first) ++second;
          s.labels.emplace_back(relations[second]);
        }
        const bool hit = std::find(s.labels.begin(), s.labels.end(), data.meta.effect_label) != s.labels.end();
        targets.assign(length, hit);
        break;
      }
      case Task::sentiment2:
      case Task::sentiment3: {
        static constexpr std::array<std::string_view, 3> three = {"neg", "neu", "pos"};
        static constexpr std::array<std::string_view, 2> two = {"neg", "pos"};
        s.labels.emplace_back(spec.task == Task::sentiment3 ? three[corpus_rng.index(3)] : two[corpus_rng.index(2)]);
        targets.assign(length, s.labels.front() == data.meta.effect_label);
        break;
      }
    }
    data.meta.targets.emplace(s.id, std::move(targets));
    data.corpus.sentences.push_back(std::move(s));
  }
  validate_corpus(data.corpus);

  // Reading simulation: one independent stream per (subject, sentence).
  Rng subject_rng(derive_seed(seed, "subjects"));
  std::vector<double> speed(spec.subjects);
  for (std::size_t k = 0; k < spec.subjects; ++k) {
    speed[k] = subject_rng.uniform(0.85, 1.15);
    data.meta.subjects.push_back("S" + two_digits(k + 1));
  }
  std::array<double, kElectrodeCount> electrode_gain{};
  for (auto& g : electrode_gain) g = 1.0 + 0.05 * subject_rng.normal();

  const double trt_shift = spec.effects.contains("TRT") ? spec.effects.at("TRT") / (1.0 - spec.skip_prob) : 0.0;
  std::array<double, kBandCount> band_shift{};
  for (const auto& [feature, delta] : spec.effects)
    if (auto b = parse_band(feature)) band_shift[static_cast<std::size_t>(*b)] = delta;

  for (std::size_t k = 0; k < spec.subjects; ++k) {
    const std::string& subject = data.meta.subjects[k];
    for (std::size_t i = 0; i < data.corpus.sentences.size(); ++i) {
      const auto& s = data.corpus.sentences[i];
      const auto& targets = data.meta.targets.at(s.id);
      Rng rng(derive_seed(seed, (static_cast<std::uint64_t>(k) << 32) | static_cast<std::uint64_t>(i)));
      if (rng.bernoulli(spec.missing_trial_prob)) continue;

      std::vector<FixationEvent> events;
      const auto duration = [&] {
        return std::max(100.0, rng.normal(spec.base_duration_ms * speed[k], spec.duration_sd_ms));
      };
      const auto emit = [&](std::size_t w, double d) {
        FixationEvent e;
        e.subject = subject;
        e.sentence_id = s.id;
        e.seq = static_cast<std::int64_t>(events.size());
        e.word_index = static_cast<std::int64_t>(w);
        e.duration_ms = std::round(d);
        events.push_back(std::move(e));
      };
      for (std::size_t w = 0; w < s.tokens.size(); ++w) {
        if (rng.bernoulli(spec.skip_prob)) continue;
        if (rng.bernoulli(spec.micro_fixation_prob)) emit(w, rng.uniform(50.0, 99.0));
        emit(w, duration() + (targets[w] ? trt_shift : 0.0));
        if (rng.bernoulli(spec.refixation_prob)) emit(w, duration());
        if (w > 0 && rng.bernoulli(spec.regression_prob)) {
          emit(w - 1, duration());
          if (rng.bernoulli(0.5)) emit(w, duration());
        }
      }

      if (spec.with_eeg) {
        for (const auto& e : events) {
          EegFixationRecord rec;
          rec.subject = subject;
          rec.sentence_id = s.id;
          rec.seq = e.seq;
          const bool target = targets[static_cast<std::size_t>(e.word_index)];
          for (std::size_t b = 0; b < kBandCount; ++b)
            for (std::size_t el = 0; el < kElectrodeCount; ++el)
              rec.bands[b][el] = kBandBaseUv[b] * electrode_gain[el] + spec.eeg_noise_uv * rng.normal() +
                                 (target ? band_shift[b] : 0.0);
          data.eeg.push_back(std::move(rec));
        }
      }
      if (!events.empty()) data.fixations.emplace(TrialKey{subject, s.id}, std::move(events));
    }
  }
  return data;
}

void write_synth_metadata(std::ostream& out, const SynthMetadata& meta) {
  ordered_json j;
  j["seed"] = meta.seed;
  ordered_json effects = ordered_json::object();
  for (const auto& [k, v] : meta.effects) effects[k] = v;
  j["effects"] = std::move(effects);
  j["effect_label"] = meta.effect_label;
  j["subjects"] = meta.subjects;
  ordered_json targets = ordered_json::object();
  for (const auto& [sid, flags] : meta.targets) {
    ordered_json idx = ordered_json::array();
    for (std::size_t t = 0; t < flags.size(); ++t)
      if (flags[t]) idx.push_back(t);
    targets[sid] = std::move(idx);
  }
  j["target_tokens"] = std::move(targets);
  out << j.dump(1) << '\n';
}

}  // namespace cogsig
