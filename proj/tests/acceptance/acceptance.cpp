// Acceptance suite: one line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cogsig/aggregate.hpp"
#include "cogsig/cli.hpp"
#include "cogsig/datasets.hpp"
#include "cogsig/eeg.hpp"
#include "cogsig/eval.hpp"
#include "cogsig/gaze.hpp"
#include "cogsig/models.hpp"
#include "cogsig/mtl.hpp"
#include "cogsig/parallel.hpp"
#include "cogsig/rng.hpp"
#include "cogsig/synth.hpp"
#include "gradcheck.hpp"

using namespace cogsig;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::size_t worker_count() { return std::max<std::size_t>(1, std::min<std::size_t>(8, std::thread::hardware_concurrency())); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<FixationEvent> trial(const std::vector<std::pair<int, double>>& word_duration) {
  std::vector<FixationEvent> out;
  for (std::size_t i = 0; i < word_duration.size(); ++i) {
    FixationEvent e;
    e.subject = "A";
    e.sentence_id = "s1";
    e.seq = static_cast<std::int64_t>(i);
    e.word_index = word_duration[i].first;
    e.duration_ms = word_duration[i].second;
    out.push_back(e);
  }
  return out;
}

// ---------------------------------------------------------------- AC1

// Each measure read off its own definition with index arithmetic over the
// event list, no shared state between measures.
WordGazeFeatures brute_force(const std::vector<FixationEvent>& ev, int w) {
  WordGazeFeatures f;
  std::vector<std::size_t> on;
  for (std::size_t i = 0; i < ev.size(); ++i)
    if (ev[i].word_index == w) on.push_back(i);
  if (on.empty()) return f;
  f.nfix = static_cast<int>(on.size());
  for (auto i : on) f.trt += ev[i].duration_ms;
  f.ffd = ev[on.front()].duration_ms;
  for (std::size_t i = on.front(); i < ev.size() && ev[i].word_index == w; ++i) f.gd += ev[i].duration_ms;
  std::size_t end = ev.size();
  for (std::size_t i = on.front() + 1; i < ev.size(); ++i)
    if (ev[i].word_index > w) {
      end = i;
      break;
    }
  for (std::size_t i = on.front(); i < end; ++i) f.gpt += ev[i].duration_ms;
  f.mfd = f.trt / f.nfix;
  return f;
}

Outcome ac1() {
  const double durations[2] = {100.0, 150.0};
  std::size_t sequences = 0, mismatches = 0;
  for (std::size_t len = 0; len <= 5; ++len) {
    std::size_t combos = 1;
    for (std::size_t i = 0; i < len; ++i) combos *= 6;
    for (std::size_t code = 0; code < combos; ++code) {
      std::vector<std::pair<int, double>> wd;
      for (std::size_t i = 0, c = code; i < len; ++i, c /= 6) wd.emplace_back(static_cast<int>(c % 3), durations[c / 3 % 2]);
      const auto ev = trial(wd);
      const auto got = compute_word_gaze(ev, 3);
      for (int w = 0; w < 3; ++w)
        if (!(got[static_cast<std::size_t>(w)] == brute_force(ev, w))) ++mismatches;
      ++sequences;
    }
  }
  Rng rng(99);
  std::size_t violations = 0;
  for (int t = 0; t < 10000; ++t) {
    std::vector<std::pair<int, double>> wd;
    const std::size_t n = 1 + rng.index(20);
    for (std::size_t i = 0; i < n; ++i)
      wd.emplace_back(static_cast<int>(rng.index(8)), 100.0 + static_cast<double>(rng.index(500)));
    for (const auto& f : compute_word_gaze(trial(wd), 8))
      if (!(f.ffd <= f.gd && f.gd <= f.trt && f.gd <= f.gpt)) ++violations;
  }
  return {sequences == 9331 && mismatches == 0 && violations == 0,
          fmt("%zu sequences, %zu mismatches, %zu chain violations in 1e4 trials", sequences, mismatches, violations)};
}

// ---------------------------------------------------------------- AC2

Outcome ac2() {
  // The worked trace, once as given and once with sub-threshold fixations
  // the filter has to remove.
  const auto clean = trial({{1, 150}, {0, 120}, {1, 130}, {2, 200}});
  const auto noisy = trial({{1, 150}, {2, 60}, {0, 120}, {1, 130}, {1, 99.9}, {2, 200}, {0, 40}});
  const auto a = compute_word_gaze(clean, 3)[1];
  const auto b = compute_word_gaze(filter_fixations(noisy), 3)[1];
  const auto expect = [](const WordGazeFeatures& f) {
    return f.nfix == 2 && f.ffd == 150.0 && f.gd == 150.0 && f.trt == 280.0 && f.gpt == 400.0;
  };
  return {expect(a) && expect(b) && a == b,
          fmt("w1 NFIX/FFD/GD/TRT/GPT = %d/%g/%g/%g/%g (filtered: %d/%g/%g/%g/%g)", a.nfix, a.ffd, a.gd, a.trt, a.gpt,
              b.nfix, b.ffd, b.gd, b.trt, b.gpt)};
}

// ---------------------------------------------------------------- AC3

EegFixationRecord eeg_record(std::int64_t seq) {
  EegFixationRecord r;
  r.subject = "A";
  r.sentence_id = "s1";
  r.seq = seq;
  return r;
}

Outcome ac3() {
  Rng rng(5);
  std::size_t unequal = 0;
  for (int t = 0; t < 500; ++t) {
    const auto ev = trial({{0, 100.0 + static_cast<double>(rng.index(400))}, {1, 180.0}, {2, 210.0}});
    std::vector<EegFixationRecord> recs;
    for (std::int64_t s = 0; s < 3; ++s) {
      auto r = eeg_record(s);
      for (auto& band : r.bands)
        for (auto& v : band) v = rng.normal(3.0, 2.0);
      recs.push_back(r);
    }
    const auto f = word_eeg(recs, ev, 3, EegWindow::ffd);
    const auto g = word_eeg(recs, ev, 3, EegWindow::trt);
    for (std::size_t w = 0; w < 3; ++w)
      if (!(f.words[w]->bands == g.words[w]->bands)) ++unequal;
  }

  const auto ev = trial({{0, 150}, {1, 300}, {0, 130}});
  std::vector<EegFixationRecord> recs = {eeg_record(0), eeg_record(1), eeg_record(2)};
  recs[0].bands[0][42] = 2.0;
  recs[2].bands[0][42] = 4.0;
  const double got = word_eeg(recs, ev, 2, EegWindow::trt).words[0]->bands[0][42];
  const double want = 820.0 / 280.0;
  const double rel = std::abs(got - want) / want;

  BandMatrix m{};
  const std::array<std::size_t, 3> dims = {reduce_eeg(m, EegReduction::electrode_mean).size(),
                                           reduce_eeg(m, EegReduction::band_mean).size(),
                                           reduce_eeg(m, EegReduction::none).size()};
  const bool names_match = eeg_dim_names(EegReduction::electrode_mean).size() == 8 &&
                           eeg_dim_names(EegReduction::band_mean).size() == 105 &&
                           eeg_dim_names(EegReduction::none).size() == 840;
  return {unequal == 0 && rel <= 1e-12 && dims == std::array<std::size_t, 3>{8, 105, 840} && names_match,
          fmt("single-fixation trt!=ffd: %zu; 820/280 rel err %.2e; dims %zu/%zu/%zu", unequal, rel, dims[0], dims[1],
              dims[2])};
}

// ---------------------------------------------------------------- AC4

Outcome ac4() {
  const auto r = bonferroni(0.0005, 0.01, 12);
  const double rounded_cut = std::round(r.threshold * 1e4) / 1e4;
  const Stars s1 = r.stars;
  const Stars s2 = bonferroni(0.005, 0.01, 12).stars;
  const Stars s3 = bonferroni(0.02, 0.01, 12).stars;
  const bool pass = r.threshold == 0.01 / 12.0 && rounded_cut == 0.0008 && s1 == Stars::two && s2 == Stars::one &&
                    s3 == Stars::none;
  return {pass, fmt("threshold %.6g (rounded %.4f); probes 0.0005/0.005/0.02 -> '%s'/'%s'/'%s'", r.threshold,
                    rounded_cut, std::string(to_string(s1)).c_str(), std::string(to_string(s2)).c_str(),
                    std::string(to_string(s3)).c_str())};
}

// ---------------------------------------------------------------- AC5

Outcome ac5() {
  const std::size_t comparisons = 500, instances = 200;
  const std::vector<std::string> labels = {"neg", "neu", "pos"};
  std::vector<double> p(comparisons);
  parallel_for(comparisons, worker_count(), [&](std::size_t c) {
    Rng rng(derive_seed(2024, c));
    std::vector<Prediction> gold, a, b;
    const auto noisy = [&](const std::string& g) {
      if (rng.bernoulli(0.7)) return g;
      std::string other;
      do other = labels[rng.index(3)];
      while (other == g);
      return other;
    };
    for (std::size_t i = 0; i < instances; ++i) {
      const auto g = labels[rng.index(3)];
      gold.push_back({g});
      a.push_back({noisy(g)});
      b.push_back({noisy(g)});
    }
    PermutationOptions opts;
    opts.replicates = 2000;
    opts.seed = derive_seed(77, c);
    p[c] = permutation_test(a, b, gold, accuracy_scorer(), opts).p_value;
  });
  const auto rejected = static_cast<std::size_t>(std::count_if(p.begin(), p.end(), [](double v) { return v < 0.05; }));
  const double rate = static_cast<double>(rejected) / static_cast<double>(comparisons);
  return {rate >= 0.03 && rate <= 0.07, fmt("null rejection rate %.3f (%zu/%zu) at alpha 0.05, R=2000", rate, rejected,
                                            comparisons)};
}

// ---------------------------------------------------------------- AC6

Outcome ac6() {
  Rng rng(606);
  double worst = 0.0;
  std::string worst_where;
  std::size_t checked = 0;
  std::set<std::string> groups_seen;
  for (int c = 0; c < 20; ++c) {
    const std::size_t vocab = 2 + rng.index(8);
    const std::size_t cognitive = rng.index(4);
    TrunkConfig cfg;
    cfg.embedding_dim = 1 + rng.index(5);
    cfg.hidden_dim = 1 + rng.index(6);
    std::vector<HeadSpec> heads;
    const std::size_t n_heads = 1 + rng.index(3);
    for (std::size_t h = 0; h < n_heads; ++h) heads.push_back({"h" + std::to_string(h), 2 + rng.index(5)});
    TrunkNet net(vocab, cognitive, heads, cfg, derive_seed(1, static_cast<std::uint64_t>(c)));
    testsupport::randomize(net, derive_seed(2, static_cast<std::uint64_t>(c)));
    for (std::size_t h = 0; h < n_heads; ++h) {
      TokenBatch b;
      const std::size_t n = 1 + rng.index(6);
      for (std::size_t i = 0; i < n; ++i) {
        b.tokens.push_back(rng.index(vocab));
        b.labels.push_back(rng.index(heads[h].classes));
        for (std::size_t k = 0; k < cognitive; ++k) b.cognitive.push_back(rng.uniform());
      }
      const auto r = testsupport::gradient_check(net, b, h);
      checked += r.checked;
      for (std::size_t g = 0; g < net.group_count(); ++g) groups_seen.insert(net.group_name(g));
      if (r.worst > worst) {
        worst = r.worst;
        worst_where = fmt("config %d head %zu group %s", c, h, r.worst_group.c_str());
      }
    }
  }
  return {worst < 1e-4, fmt("20 configs, %zu parameter checks, worst relative error %.2e (%s)", checked, worst,
                            worst_where.empty() ? "-" : worst_where.c_str())};
}

// ---------------------------------------------------------------- shared: planted corpora

SynthData planted_ner(std::uint64_t seed) {
  SynthSpec spec;
  spec.task = Task::ner;
  spec.sentences = 500;
  spec.subjects = 3;
  spec.with_eeg = false;
  spec.effects["TRT"] = 100.0;
  return generate_synthetic(spec, seed);
}

TokenFeatures gaze_block(const Corpus& corpus, const FixationLog& fixations, std::string_view set) {
  GazeOptions opts;
  opts.threads = worker_count();
  const auto table = extract_gaze(corpus, fixations, opts);
  return build_gaze_features(table, corpus, SubjectAggregation::parse("mean"), gaze_feature_set(set));
}

struct CvResult {
  double mean_f1 = 0.0;
  std::vector<Prediction> gold, pred;  // test predictions, all folds, in fold order
  std::vector<std::string> groups;
};

// The protocol of `cogsig train` for a tagger: k folds with one dev and one
// test fold, fold-local normalization, mean entity F1 over folds.
CvResult cross_validate(const Dataset& ds, std::uint64_t seed, std::size_t k = 10) {
  const double kd = static_cast<double>(k);
  const auto plan = kfold_split(ds, k, {(kd - 2.0) / kd, 1.0 / kd, 1.0 / kd}, derive_seed(seed, "folds"));
  std::vector<std::vector<Prediction>> preds(k);
  std::vector<std::vector<std::size_t>> tests(k);
  parallel_for(k, worker_count(), [&](std::size_t fold) {
    const auto train = section_indices(ds, plan, fold, Section::train);
    tests[fold] = section_indices(ds, plan, fold, Section::test);
    TaggerConfig cfg;
    cfg.seed = derive_seed(derive_seed(seed, "train"), fold);
    preds[fold] = predict_tagger(train_tagger(ds, train, cfg), ds, tests[fold]);
  });
  CvResult r;
  for (std::size_t fold = 0; fold < k; ++fold) {
    std::vector<Prediction> gold;
    for (auto i : tests[fold]) {
      gold.push_back(ds.instances[i].labels);
      r.groups.push_back(ds.instances[i].group);
    }
    r.mean_f1 += entity_prf1(gold, preds[fold]).f1 / kd;
    r.gold.insert(r.gold.end(), gold.begin(), gold.end());
    r.pred.insert(r.pred.end(), preds[fold].begin(), preds[fold].end());
  }
  return r;
}

// ---------------------------------------------------------------- AC7

Outcome ac7() {
  std::vector<double> base_f1, gaze_f1;
  std::vector<Prediction> gold, a, b;
  std::vector<std::string> groups;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto data = planted_ner(seed);
    const auto gaze = gaze_block(data.corpus, data.fixations, "extended");
    const auto base = assemble(data.corpus, {});
    const std::vector<FeatureBlock> blocks = {{"gaze", &gaze}};
    const auto aug = assemble(data.corpus, blocks);
    const auto rb = cross_validate(base, seed);
    const auto rg = cross_validate(aug, seed);
    if (rb.gold != rg.gold) return {false, "baseline and gaze runs disagree on the test instances"};
    base_f1.push_back(rb.mean_f1);
    gaze_f1.push_back(rg.mean_f1);
    gold.insert(gold.end(), rb.gold.begin(), rb.gold.end());
    a.insert(a.end(), rb.pred.begin(), rb.pred.end());
    b.insert(b.end(), rg.pred.begin(), rg.pred.end());
    for (const auto& g : rb.groups) groups.push_back(std::to_string(seed) + ":" + g);
  }
  PermutationOptions opts;
  opts.replicates = 10000;
  opts.seed = 7;
  opts.threads = worker_count();
  opts.groups = groups;
  const auto perm = permutation_test(a, b, gold, entity_f1_scorer(), opts);
  const double delta = median(gaze_f1) - median(base_f1);
  return {delta >= 2.0 && perm.p_value < 0.01,
          fmt("median F1 baseline %.2f, gaze %.2f, delta %+.2f; pooled permutation p=%.5f (R=10000)", median(base_f1),
              median(gaze_f1), delta, perm.p_value)};
}

// ---------------------------------------------------------------- AC8

std::string ascii_lower(std::string s) {
  for (auto& c : s)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return s;
}

Outcome ac8() {
  std::vector<double> deltas;
  std::size_t coverage_mismatches = 0;
  double last_unknown = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto data = planted_ner(derive_seed(seed, "lexicon"));
    // First half of the sentences records gaze and builds the lexicon; the
    // second half only ever sees lexicon values.
    Corpus built, held_out;
    built.task = held_out.task = data.corpus.task;
    const std::size_t half = data.corpus.sentences.size() / 2;
    for (std::size_t i = 0; i < data.corpus.sentences.size(); ++i)
      (i < half ? built : held_out).sentences.push_back(data.corpus.sentences[i]);
    FixationLog built_fix;
    for (const auto& [key, events] : data.fixations)
      if (built.find(key.sentence_id)) built_fix[key] = events;

    const auto lexicon = build_type_lexicon(built, gaze_block(built, built_fix, "extended"));
    const auto applied = apply_type_lexicon(lexicon, held_out);

    std::set<std::string> known;
    for (const auto& s : built.sentences)
      for (const auto& t : s.tokens) known.insert(ascii_lower(t));
    std::size_t tokens = 0, unknown = 0;
    for (const auto& s : held_out.sentences)
      for (const auto& t : s.tokens) {
        ++tokens;
        if (!known.count(ascii_lower(t))) ++unknown;
      }
    const double unknown_percent = 100.0 * static_cast<double>(unknown) / static_cast<double>(tokens);
    if (applied.coverage.tokens != tokens || applied.coverage.unknown != unknown ||
        applied.coverage.unknown_percent != unknown_percent)
      ++coverage_mismatches;
    last_unknown = unknown_percent;

    const auto base = assemble(held_out, {});
    const std::vector<FeatureBlock> blocks = {{"lexicon", &applied.features}};
    const auto aug = assemble(held_out, blocks);
    deltas.push_back(cross_validate(aug, seed).mean_f1 - cross_validate(base, seed).mean_f1);
  }
  const double d = median(deltas);
  return {d > 0.0 && coverage_mismatches == 0,
          fmt("median F1 delta %+.2f over 10 seeds (min %+.2f, max %+.2f); coverage mismatches %zu (last unknown %.4f%%)",
              d, *std::min_element(deltas.begin(), deltas.end()), *std::max_element(deltas.begin(), deltas.end()),
              coverage_mismatches, last_unknown)};
}

// ---------------------------------------------------------------- AC9

// The protocol of `cogsig mtl` with its defaults: five folds, no dev section.
double mtl_main_accuracy(const Dataset& ds, std::uint64_t seed, const std::vector<std::string>& aux) {
  const std::size_t k = 5;
  const auto plan = kfold_split(ds, k, {0.8, 0.0, 0.2}, derive_seed(seed, "folds"));
  const auto main = make_main_task(ds);
  std::vector<double> acc(k);
  parallel_for(k, worker_count(), [&](std::size_t fold) {
    const auto train = section_indices(ds, plan, fold, Section::train);
    const auto test = section_indices(ds, plan, fold, Section::test);
    std::vector<MtlTask> tasks = {main};
    for (const auto& a : aux) tasks.push_back(make_aux_task(ds, AuxTaskSpec::parse(a), train));
    MtlConfig cfg;
    cfg.seed = derive_seed(derive_seed(seed, "mtl"), fold);
    acc[fold] = evaluate_multitask(train_multitask(ds, tasks, train, cfg), ds, tasks, test).front().accuracy;
  });
  double mean = 0.0;
  for (double a : acc) mean += a / static_cast<double>(k);
  return mean;
}

Outcome ac9() {
  std::vector<double> single, with_trt;
  std::size_t trajectory_mismatch = 0, checked_steps = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto data = planted_ner(seed);
    const auto gaze = gaze_block(data.corpus, data.fixations, "basic");
    const std::vector<FeatureBlock> blocks = {{"gaze", &gaze}};
    const auto ds = assemble(data.corpus, blocks);

    if (seed <= 3) {
      const auto plan = kfold_split(ds, 5, {0.8, 0.0, 0.2}, derive_seed(seed, "folds"));
      const auto train = section_indices(ds, plan, 0, Section::train);
      const auto test = section_indices(ds, plan, 0, Section::test);
      const std::vector<MtlTask> alone = {make_main_task(ds)};
      const std::vector<MtlTask> muted = {alone[0], make_aux_task(ds, AuxTaskSpec::parse("TRT:10:0"), train),
                                          make_aux_task(ds, AuxTaskSpec::parse("FFD:5:0"), train)};
      MtlConfig cfg;
      cfg.seed = seed;
      cfg.epochs = 3;
      Trajectory ta, tb;
      const auto ma = train_multitask(ds, alone, train, cfg, &ta);
      const auto mb = train_multitask(ds, muted, train, cfg, &tb);
      checked_steps += ta.size();
      if (ta != tb || ta.empty()) ++trajectory_mismatch;
      if (evaluate_multitask(ma, ds, alone, test).front().accuracy !=
          evaluate_multitask(mb, ds, muted, test).front().accuracy)
        ++trajectory_mismatch;
    }
    single.push_back(mtl_main_accuracy(ds, seed, {}));
    with_trt.push_back(mtl_main_accuracy(ds, seed, {"TRT"}));
  }
  const double ms = median(single), mt = median(with_trt);
  return {trajectory_mismatch == 0 && mt >= ms,
          fmt("lambda=0 trajectories identical over %zu steps (mismatches %zu); median main accuracy single %.3f, "
              "+TRT aux %.3f",
              checked_steps, trajectory_mismatch, ms, mt)};
}

// ---------------------------------------------------------------- AC10

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    files[fs::relative(entry.path(), root).string()] = s.str();
  }
  return files;
}

// Every command of the suite, run in `work/run` with the given thread count.
bool run_pipeline(const fs::path& work, const std::string& threads, std::string& failure) {
  const fs::path run = work / "run";
  fs::remove_all(run);
  fs::create_directories(run);
  const auto p = [&](const std::string& leaf) { return (run / leaf).string(); };
  const std::vector<std::vector<std::string>> steps = {
      {"synth", "--task", "ner", "--sentences", "80", "--subjects", "3", "--effect", "TRT=80", "--out-dir", p("ner")},
      {"ingest-validate", "--corpus", p("ner/corpus.jsonl"), "--fixations", p("ner/fixations.jsonl"), "--eeg",
       p("ner/eeg.jsonl"), "--out", p("validate.json")},
      {"extract-gaze", "--corpus", p("ner/corpus.jsonl"), "--fixations", p("ner/fixations.jsonl"), "--out",
       p("gaze.jsonl")},
      {"extract-eeg", "--corpus", p("ner/corpus.jsonl"), "--fixations", p("ner/fixations.jsonl"), "--eeg",
       p("ner/eeg.jsonl"), "--eeg-window", "trt", "--out", p("eeg.jsonl")},
      {"build-lexicon", "--corpus", p("ner/corpus.jsonl"), "--gaze", p("gaze.jsonl"), "--eeg-features",
       p("eeg.jsonl"), "--out", p("lexicon.json")},
      {"apply-lexicon", "--corpus", p("ner/corpus.jsonl"), "--lexicon", p("lexicon.json"), "--out",
       p("lexfeat.jsonl")},
      {"assemble", "--corpus", p("ner/corpus.jsonl"), "--out", p("base.jsonl")},
      {"assemble", "--corpus", p("ner/corpus.jsonl"), "--gaze", p("gaze.jsonl"), "--eeg-features", p("eeg.jsonl"),
       "--out", p("ge.jsonl"), "--conll-dir", p("conll"), "--folds", "4"},
      {"train", "--dataset", p("base.jsonl"), "--folds", "4", "--out-dir", p("run_base")},
      {"train", "--dataset", p("ge.jsonl"), "--folds", "4", "--out-dir", p("run_ge")},
      {"evaluate", "--run", "baseline=" + p("run_base"), "--run", "gaze+eeg=" + p("run_ge"), "--compare",
       "baseline,gaze+eeg", "--replicates", "1000", "--out-dir", p("report")},
      {"significance", "--a", p("run_base/predictions.jsonl"), "--b", p("run_ge/predictions.jsonl"), "--replicates",
       "1000", "--out", p("sig.json")},
      {"mtl", "--dataset", p("ge.jsonl"), "--aux", "TRT:5", "--aux", "EEG_a:4:0.5", "--aux", "word_frequency",
       "--folds", "3", "--epochs", "2", "--out-dir", p("mtl")},
      {"synth", "--task", "sentiment3", "--sentences", "90", "--subjects", "2", "--effect", "TRT=50", "--out-dir",
       p("sst")},
      {"extract-gaze", "--task", "sentiment3", "--corpus", p("sst/corpus.jsonl"), "--fixations",
       p("sst/fixations.jsonl"), "--out", p("sst_gaze.jsonl")},
      {"assemble", "--task", "sentiment3", "--as-task", "sentiment2", "--corpus", p("sst/corpus.jsonl"), "--gaze",
       p("sst_gaze.jsonl"), "--out", p("sst2.jsonl")},
      {"train", "--dataset", p("sst2.jsonl"), "--folds", "3", "--out-dir", p("run_sst2")},
  };
  for (const auto& step : steps) {
    std::vector<std::string> args = {"--seed", "42", "--threads", threads};
    args.insert(args.end(), step.begin(), step.end());
    std::ostringstream out, err;
    if (run_cli(args, out, err) != 0) {
      failure = step.front() + ": " + err.str();
      return false;
    }
  }
  return true;
}

Outcome ac10() {
  const fs::path work = fs::temp_directory_path() / "cogsig_acceptance_determinism";
  fs::remove_all(work);
  std::vector<std::map<std::string, std::string>> snaps;
  for (const char* threads : {"1", "1", "4"}) {
    std::string failure;
    if (!run_pipeline(work, threads, failure)) return {false, "pipeline failed: " + failure};
    snaps.push_back(snapshot(work / "run"));
  }
  fs::remove_all(work);
  std::size_t differing = 0;
  std::string first;
  for (std::size_t i = 1; i < snaps.size(); ++i) {
    std::set<std::string> names;
    for (const auto& m : {snaps[0], snaps[i]})
      for (const auto& [k, v] : m) names.insert(k);
    for (const auto& n : names) {
      auto a = snaps[0].find(n), b = snaps[i].find(n);
      if (a == snaps[0].end() || b == snaps[i].end() || a->second != b->second) {
        ++differing;
        if (first.empty()) first = n;
      }
    }
  }
  return {differing == 0 && snaps[0].size() > 30,
          fmt("%zu files per run across 17 commands; rerun and 4-thread run differ in %zu files%s%s", snaps[0].size(),
              differing, first.empty() ? "" : ", first: ", first.c_str())};
}

}  // namespace

int main() {
  struct Criterion {
    const char* id;
    const char* name;
    std::function<Outcome()> run;
    double budget_s;  // 0 = no runtime bound
  };
  const std::vector<Criterion> criteria = {
      {"AC1", "gaze oracle equivalence", ac1, 10.0},
      {"AC2", "100 ms filter and hand trace", ac2, 0.0},
      {"AC3", "EEG windowing and reductions", ac3, 0.0},
      {"AC4", "Bonferroni threshold and stars", ac4, 0.0},
      {"AC5", "permutation test null calibration", ac5, 120.0},
      {"AC6", "trunk gradient check", ac6, 0.0},
      {"AC7", "planted gaze effect on NER", ac7, 300.0},
      {"AC8", "type lexicon on a disjoint split", ac8, 0.0},
      {"AC9", "MTL no-op and TRT auxiliary", ac9, 0.0},
      {"AC10", "deterministic pipeline", ac10, 0.0},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool pass = o.pass;
    std::string timing = fmt("%.2fs", secs);
    if (c.budget_s > 0.0) {
      timing += fmt(" of %.0fs", c.budget_s);
      if (secs >= c.budget_s) pass = false;
    }
    std::printf("[%s] %s %s: %s (%s)\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), timing.c_str());
    std::fflush(stdout);
    if (!pass) ++failed;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
