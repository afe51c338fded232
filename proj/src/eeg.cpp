#include "cogsig/eeg.hpp"

#include <algorithm>
#include <array>
#include <istream>
#include <ostream>
#include <unordered_map>

#include "cogsig/error.hpp"
#include "cogsig/gaze.hpp"
#include "cogsig/jsonio.hpp"
#include "cogsig/parallel.hpp"

namespace cogsig {

namespace {

constexpr std::array<FrequencyInterval, kBandCount> kIntervals = {{
    {4.0, 6.0},
    {6.5, 8.0},
    {8.5, 10.0},
    {10.5, 13.0},
    {13.5, 18.0},
    {18.5, 30.0},
    {30.5, 40.0},
    {40.0, 49.5},
}};

constexpr std::array<std::string_view, 4> kCombinedNames = {"EEG_t", "EEG_a", "EEG_b", "EEG_g"};

}  // namespace

FrequencyInterval band_interval(Band band) { return kIntervals[static_cast<std::size_t>(band)]; }

std::optional<Band> band_of_frequency(double hz) {
  if (!(hz > 0.0)) throw error(errc::domain, "frequency must be positive");
  for (std::size_t b = 0; b < kBandCount; ++b)
    if (hz >= kIntervals[b].lo_hz && hz <= kIntervals[b].hi_hz) return static_cast<Band>(b);
  return std::nullopt;
}

std::string_view to_string(EegWindow w) { return w == EegWindow::ffd ? "ffd" : "trt"; }

std::string_view to_string(EegReduction r) {
  switch (r) {
    case EegReduction::electrode_mean: return "electrode_mean";
    case EegReduction::band_mean: return "band_mean";
    case EegReduction::none: return "none";
  }
  return "none";
}

EegWindow parse_eeg_window(std::string_view s) {
  if (s == "ffd") return EegWindow::ffd;
  if (s == "trt") return EegWindow::trt;
  throw error(errc::config, "unknown EEG window '" + std::string(s) + "'");
}

EegReduction parse_eeg_reduction(std::string_view s) {
  if (s == "electrode_mean") return EegReduction::electrode_mean;
  if (s == "band_mean") return EegReduction::band_mean;
  if (s == "none") return EegReduction::none;
  throw error(errc::config, "unknown EEG reduction '" + std::string(s) + "'");
}

WordEegResult word_eeg(std::span<const EegFixationRecord> records, std::span<const FixationEvent> events,
                       std::size_t sentence_length, EegWindow window, EegWeighting weighting, bool strict) {
  std::unordered_map<std::int64_t, const EegFixationRecord*> by_seq;
  for (const auto& r : records) by_seq.emplace(r.seq, &r);

  // Fixations per word in seq order.
  std::vector<std::vector<const FixationEvent*>> per_word(sentence_length);
  for (const auto& e : events) {
    if (e.word_index < 0 || static_cast<std::size_t>(e.word_index) >= sentence_length)
      throw error(errc::validation, "word_index out of range in sentence '" + e.sentence_id + "'");
    per_word[static_cast<std::size_t>(e.word_index)].push_back(&e);
  }

  WordEegResult result;
  result.words.resize(sentence_length);
  for (std::size_t w = 0; w < sentence_length; ++w) {
    if (per_word[w].empty()) continue;
    std::vector<std::pair<const FixationEvent*, const EegFixationRecord*>> usable;
    for (const auto* e : per_word[w]) {
      auto it = by_seq.find(e->seq);
      if (it == by_seq.end()) {
        const std::string msg = "fixation (" + e->subject + ", " + e->sentence_id + ", " + std::to_string(e->seq) +
                                ") on word " + std::to_string(w) + " has no EEG record";
        if (strict) throw error(errc::dangling_fixation, msg);
        result.warnings.push_back(msg);
        continue;
      }
      usable.emplace_back(e, it->second);
      if (window == EegWindow::ffd) break;
    }
    if (usable.empty()) continue;
    // ffd uses the first fixation only; if that one lacks a record the word is
    // skipped rather than falling back to a later fixation.
    if (window == EegWindow::ffd && usable.front().first != per_word[w].front()) continue;

    WordEegFeatures f;
    f.window = window;
    if (usable.size() == 1) {
      f.bands = usable.front().second->bands;
    } else {
      // Normalized weights; summation in seq order per electrode per band.
      std::vector<double> weights(usable.size());
      double total = 0.0;
      for (std::size_t k = 0; k < usable.size(); ++k) {
        weights[k] = weighting == EegWeighting::duration ? usable[k].first->duration_ms : 1.0;
        total += weights[k];
      }
      for (auto& wk : weights) wk /= total;
      for (std::size_t b = 0; b < kBandCount; ++b) {
        for (std::size_t e = 0; e < kElectrodeCount; ++e) {
          double acc = 0.0;
          double lo = usable.front().second->bands[b][e];
          double hi = lo;
          for (std::size_t k = 0; k < usable.size(); ++k) {
            const double v = usable[k].second->bands[b][e];
            acc += weights[k] * v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
          }
          // Rounding can push a convex combination just past its extremes.
          f.bands[b][e] = std::clamp(acc, lo, hi);
        }
      }
    }
    result.words[w] = std::move(f);
  }
  return result;
}

std::size_t reduced_size(EegReduction reduction) {
  switch (reduction) {
    case EegReduction::electrode_mean: return kBandCount;
    case EegReduction::band_mean: return kElectrodeCount;
    case EegReduction::none: return kBandCount * kElectrodeCount;
  }
  return 0;
}

std::vector<double> reduce_flat(std::span<const double> v, EegReduction reduction) {
  if (v.size() != kBandCount * kElectrodeCount)
    throw error(errc::dimension_mismatch, "EEG vector must have " + std::to_string(kBandCount * kElectrodeCount) +
                                              " values");
  const auto at = [&](std::size_t b, std::size_t e) { return v[b * kElectrodeCount + e]; };
  std::vector<double> out;
  switch (reduction) {
    case EegReduction::electrode_mean:
      out.resize(kBandCount);
      for (std::size_t b = 0; b < kBandCount; ++b) {
        double acc = 0.0;
        for (std::size_t e = 0; e < kElectrodeCount; ++e) acc += at(b, e);
        out[b] = acc / static_cast<double>(kElectrodeCount);
      }
      break;
    case EegReduction::band_mean:
      out.resize(kElectrodeCount);
      for (std::size_t e = 0; e < kElectrodeCount; ++e) {
        double acc = 0.0;
        for (std::size_t b = 0; b < kBandCount; ++b) acc += at(b, e);
        out[e] = acc / static_cast<double>(kBandCount);
      }
      break;
    case EegReduction::none:
      out.assign(v.begin(), v.end());
      break;
  }
  return out;
}

std::vector<double> reduce_eeg(const BandMatrix& bands, EegReduction reduction) {
  std::vector<double> flat;
  flat.reserve(kBandCount * kElectrodeCount);
  for (const auto& row : bands) flat.insert(flat.end(), row.begin(), row.end());
  return reduce_flat(flat, reduction);
}

std::vector<std::string> eeg_dim_names(EegReduction reduction) {
  std::vector<std::string> names;
  const auto electrode = [](std::size_t e) {
    std::string s = std::to_string(e);
    return "e" + std::string(3 - s.size(), '0') + s;
  };
  switch (reduction) {
    case EegReduction::electrode_mean:
      for (Band b : kAllBands) names.emplace_back(to_string(b));
      break;
    case EegReduction::band_mean:
      for (std::size_t e = 0; e < kElectrodeCount; ++e) names.push_back(electrode(e));
      break;
    case EegReduction::none:
      for (Band b : kAllBands)
        for (std::size_t e = 0; e < kElectrodeCount; ++e) names.push_back(std::string(to_string(b)) + "_" + electrode(e));
      break;
  }
  return names;
}

CombinedBands combine_bands(std::span<const double, kBandCount> x) {
  return {(x[0] + x[1]) / 2.0, (x[2] + x[3]) / 2.0, (x[4] + x[5]) / 2.0, (x[6] + x[7]) / 2.0};
}

std::span<const std::string_view> combined_band_names() { return kCombinedNames; }

EegExtraction extract_eeg(const Corpus& corpus, const FixationLog& fixations,
                          std::span<const EegFixationRecord> records, const EegOptions& opts) {
  std::unordered_map<std::string, std::size_t> lengths;
  for (const auto& s : corpus.sentences) lengths.emplace(s.id, s.tokens.size());

  std::map<TrialKey, std::vector<EegFixationRecord>> by_trial;
  for (const auto& r : records) by_trial[TrialKey{r.subject, r.sentence_id}].push_back(r);

  std::vector<const FixationLog::value_type*> trials;
  for (const auto& entry : fixations) {
    if (!lengths.contains(entry.first.sentence_id))
      throw error(errc::validation, "fixations for unknown sentence '" + entry.first.sentence_id + "'");
    trials.push_back(&entry);
  }

  std::vector<std::vector<std::optional<std::vector<double>>>> rows(trials.size());
  std::vector<std::vector<std::string>> warnings(trials.size());
  static const std::vector<EegFixationRecord> kNone;
  parallel_for(trials.size(), opts.threads, [&](std::size_t i) {
    const auto& [key, events] = *trials[i];
    auto kept = filter_fixations(events, opts.min_duration_ms);
    auto rec = by_trial.find(key);
    const auto& trial_records = rec == by_trial.end() ? kNone : rec->second;
    auto words = word_eeg(trial_records, kept, lengths.at(key.sentence_id), opts.window, opts.weighting, opts.strict);
    rows[i].resize(words.words.size());
    for (std::size_t w = 0; w < words.words.size(); ++w)
      if (words.words[w]) rows[i][w] = reduce_eeg(words.words[w]->bands, opts.reduction);
    warnings[i] = std::move(words.warnings);
  });

  EegExtraction out;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    out.table.emplace(trials[i]->first, std::move(rows[i]));
    for (auto& w : warnings[i]) out.warnings.push_back(std::move(w));
  }
  return out;
}

void write_eeg_features(std::ostream& out, const EegTable& table, EegWindow window, EegReduction reduction) {
  for (const auto& [key, words] : table) {
    for (std::size_t w = 0; w < words.size(); ++w) {
      if (!words[w]) continue;
      ordered_json j;
      j["subject"] = key.subject;
      j["sentence_id"] = key.sentence_id;
      j["word_index"] = w;
      j["mode"] = std::string(to_string(window));
      j["reduction"] = std::string(to_string(reduction));
      j["values"] = *words[w];
      out << dump_line(j);
    }
  }
}

EegFeatureFile parse_eeg_features(std::istream& in, const Corpus& corpus, const ParseOptions& opts) {
  std::unordered_map<std::string, std::size_t> lengths;
  for (const auto& s : corpus.sentences) lengths.emplace(s.id, s.tokens.size());
  EegFeatureFile file;
  for_each_record(in, [&](const json& r, std::size_t line) {
    check_fields(r, {"subject", "sentence_id", "word_index", "mode", "reduction", "values"}, opts.strict, line);
    TrialKey key{require_string(r, "subject", line), require_string(r, "sentence_id", line)};
    auto len = lengths.find(key.sentence_id);
    if (len == lengths.end())
      throw error(errc::validation, "EEG features for unknown sentence '" + key.sentence_id + "'", line);
    const std::int64_t w = require_integer(r, "word_index", line);
    if (w < 0 || static_cast<std::size_t>(w) >= len->second)
      throw error(errc::validation, "word_index out of range", line);
    const auto window = parse_eeg_window(require_string(r, "mode", line));
    const auto reduction = parse_eeg_reduction(require_string(r, "reduction", line));
    if ((file.window && *file.window != window) || (file.reduction && *file.reduction != reduction))
      throw error(errc::validation, "mixed EEG window/reduction settings in one file", line);
    file.window = window;
    file.reduction = reduction;
    const json& values = require(r, "values", line);
    if (!values.is_array() || values.size() != reduced_size(reduction))
      throw error(errc::validation, "EEG values must have " + std::to_string(reduced_size(reduction)) + " entries", line);
    std::vector<double> v;
    v.reserve(values.size());
    for (const auto& x : values) {
      if (!x.is_number()) throw error(errc::parse, "EEG values must be numbers", line);
      v.push_back(x.get<double>());
    }
    auto& row = file.table.try_emplace(key, len->second).first->second;
    if (row[static_cast<std::size_t>(w)]) throw error(errc::validation, "duplicate EEG feature record", line);
    row[static_cast<std::size_t>(w)] = std::move(v);
  });
  return file;
}

}  // namespace cogsig
