#include "cogsig/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "cogsig/aggregate.hpp"
#include "cogsig/datasets.hpp"
#include "cogsig/eeg.hpp"
#include "cogsig/error.hpp"
#include "cogsig/eval.hpp"
#include "cogsig/gaze.hpp"
#include "cogsig/ingest.hpp"
#include "cogsig/jsonio.hpp"
#include "cogsig/models.hpp"
#include "cogsig/mtl.hpp"
#include "cogsig/parallel.hpp"
#include "cogsig/rng.hpp"
#include "cogsig/synth.hpp"

namespace fs = std::filesystem;

namespace cogsig {
namespace {

// ---------------------------------------------------------------- plumbing

struct Globals {
  std::uint64_t seed = 1;
  bool strict = false;
  std::size_t threads = 1;
};

struct Context {
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;
  Globals globals;
  ordered_json config;
  std::string hash;

  ParseOptions parse_options() const { return ParseOptions{globals.strict}; }
  ordered_json provenance() const { return provenance_record(hash, globals.seed); }
};

// Options that only say where results go or how fast they are computed.
const std::set<std::string> kUnrecorded = {"help", "out", "out-dir", "threads", "config"};

ordered_json option_value(const CLI::Option* o) {
  if (o->get_expected_max() == 0) return o->count() > 0;
  if (o->count() == 0) return o->get_default_str();
  const auto& r = o->results();
  if (r.size() == 1 && o->get_expected_max() <= 1) return r.front();
  return r;
}

ordered_json resolve_config(const CLI::App& app, const CLI::App& sub, const Globals& g) {
  ordered_json j;
  j["command"] = sub.get_name();
  j["seed"] = g.seed;
  j["strict"] = g.strict;
  ordered_json opts = ordered_json::object();
  for (const CLI::Option* o : sub.get_options()) {
    if (o->get_lnames().empty() || kUnrecorded.count(o->get_lnames().front())) continue;
    opts[o->get_lnames().front()] = option_value(o);
  }
  j["options"] = std::move(opts);
  (void)app;
  return j;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw error(errc::io, "cannot open '" + path + "'");
  return f;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw error(errc::io, "cannot write '" + path.string() + "'");
  return f;
}

void finish(std::ofstream& f, const fs::path& path) {
  f.flush();
  if (!f) throw error(errc::io, "failed writing '" + path.string() + "'");
}

template <class Fn>
void write_jsonl(const Context& ctx, const fs::path& path, Fn&& body) {
  auto f = open_out(path);
  f << dump_line(ctx.provenance());
  body(f);
  finish(f, path);
}

ordered_json with_provenance(const Context& ctx, const ordered_json& doc) {
  ordered_json j;
  j[std::string(kProvenanceKey)] = ctx.provenance()[std::string(kProvenanceKey)];
  for (auto it = doc.begin(); it != doc.end(); ++it) j[it.key()] = it.value();
  return j;
}

void write_json(const Context& ctx, const fs::path& path, const ordered_json& doc) {
  auto f = open_out(path);
  f << with_provenance(ctx, doc).dump(1) << '\n';
  finish(f, path);
}

// Library writers that emit one JSON document.
template <class Fn>
void write_json_via(const Context& ctx, const fs::path& path, Fn&& writer) {
  std::ostringstream buf;
  writer(buf);
  write_json(ctx, path, ordered_json::parse(buf.str()));
}

void write_text(const Context& ctx, const fs::path& path, const std::string& text) {
  auto f = open_out(path);
  f << "# " << ctx.provenance().dump() << '\n' << text;
  finish(f, path);
}

void write_config_file(const Context& ctx, const fs::path& path) {
  auto f = open_out(path);
  f << ctx.config.dump(1) << '\n';
  finish(f, path);
}

// Resolved config beside a single output file, or inside an output dir.
fs::path config_beside(const fs::path& out) { return fs::path(out.string() + ".config.json"); }

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep))
    if (!cur.empty()) out.push_back(cur);
  return out;
}

// Empty means the train/dev/test split implied by k, with `dev_folds` dev folds.
std::array<double, 3> parse_ratios(const std::string& s, std::size_t k, std::size_t dev_folds) {
  if (s.empty()) {
    if (k < dev_folds + 2) throw error(errc::config, "--folds is too small for a train/dev/test split");
    const double kd = static_cast<double>(k);
    return {static_cast<double>(k - 1 - dev_folds) / kd, static_cast<double>(dev_folds) / kd, 1.0 / kd};
  }
  auto parts = split(s, ',');
  if (parts.size() != 3) throw error(errc::config, "--ratios needs three comma-separated values");
  std::array<double, 3> r{};
  for (std::size_t i = 0; i < 3; ++i) {
    try {
      r[i] = std::stod(parts[i]);
    } catch (const std::exception&) {
      throw error(errc::config, "--ratios value '" + parts[i] + "' is not a number");
    }
  }
  return r;
}

void warn(const Context& ctx, const std::string& message) {
  ordered_json j;
  j["warning"] = message;
  *ctx.err << j.dump() << '\n';
}

Corpus load_corpus(const Context& ctx, const std::string& path, const std::string& task) {
  auto in = open_in(path);
  return parse_corpus(in, parse_task(task), ctx.parse_options());
}

// ---------------------------------------------------------------- features

struct FeatureArgs {
  std::string gaze;
  std::string gaze_set = "basic";
  std::string gaze_dims;
  std::string eeg;
  std::string agg = "mean";
  std::vector<std::string> token_features;
};

void add_feature_options(CLI::App* sub, FeatureArgs& a) {
  sub->add_option("--gaze", a.gaze, "per-subject gaze features from extract-gaze");
  sub->add_option("--gaze-set", a.gaze_set, "basic | extended | mtl")->capture_default_str();
  sub->add_option("--gaze-dims", a.gaze_dims, "comma-separated gaze dims (overrides --gaze-set)");
  sub->add_option("--eeg-features", a.eeg, "per-subject EEG features from extract-eeg");
  sub->add_option("--agg", a.agg, "mean | single:ID | subset:ID,ID...")->capture_default_str();
  sub->add_option("--token-features", a.token_features, "aggregated token features (e.g. from apply-lexicon)");
}

std::vector<std::pair<std::string, TokenFeatures>> load_blocks(const Context& ctx, const FeatureArgs& a,
                                                               const Corpus& corpus) {
  std::vector<std::pair<std::string, TokenFeatures>> blocks;
  const auto agg = SubjectAggregation::parse(a.agg);
  if (!a.gaze.empty()) {
    auto in = open_in(a.gaze);
    const auto table = parse_gaze_features(in, corpus, ctx.parse_options());
    const auto dims = a.gaze_dims.empty() ? gaze_feature_set(a.gaze_set) : split(a.gaze_dims, ',');
    blocks.emplace_back("gaze", build_gaze_features(table, corpus, agg, dims));
  }
  if (!a.eeg.empty()) {
    auto in = open_in(a.eeg);
    const auto file = parse_eeg_features(in, corpus, ctx.parse_options());
    auto reduction = file.reduction;
    if (!reduction) {
      for (const auto& [key, words] : file.table)
        for (const auto& w : words)
          if (w && !reduction) {
            for (auto r : {EegReduction::electrode_mean, EegReduction::band_mean, EegReduction::none})
              if (reduced_size(r) == w->size()) reduction = r;
          }
      if (!reduction) reduction = EegReduction::electrode_mean;
    }
    blocks.emplace_back("eeg", average_subjects(eeg_subject_features(file.table, eeg_dim_names(*reduction)), agg));
  }
  for (const auto& path : a.token_features) {
    auto in = open_in(path);
    blocks.emplace_back(fs::path(path).stem().string(), parse_token_features(in, corpus, ctx.parse_options()));
  }
  return blocks;
}

// ---------------------------------------------------------------- predictions

struct PredictionRecord {
  std::size_t fold = 0;
  std::string id;
  std::string group;
  Prediction gold;
  Prediction pred;
};

struct PredictionFile {
  Task task = Task::ner;
  std::vector<std::string> manifest;
  std::size_t folds = 0;
  std::vector<PredictionRecord> records;
};

void write_predictions(const Context& ctx, const fs::path& path, const PredictionFile& p) {
  write_jsonl(ctx, path, [&](std::ostream& f) {
    ordered_json h;
    h["task"] = std::string(to_string(p.task));
    h["manifest"] = p.manifest;
    h["folds"] = p.folds;
    f << dump_line(h);
    for (const auto& r : p.records) {
      ordered_json j;
      j["fold"] = r.fold;
      j["id"] = r.id;
      j["group"] = r.group;
      j["gold"] = r.gold;
      j["pred"] = r.pred;
      f << dump_line(j);
    }
  });
}

PredictionFile read_predictions(const Context& ctx, const std::string& path) {
  auto in = open_in(path);
  PredictionFile p;
  bool header = false;
  for_each_record(in, [&](const json& r, std::size_t line) {
    if (!header) {
      check_fields(r, {"task", "manifest", "folds"}, ctx.globals.strict, line);
      p.task = parse_task(require_string(r, "task", line));
      p.manifest = require(r, "manifest", line).get<std::vector<std::string>>();
      p.folds = static_cast<std::size_t>(require_integer(r, "folds", line));
      header = true;
      return;
    }
    check_fields(r, {"fold", "id", "group", "gold", "pred"}, ctx.globals.strict, line);
    PredictionRecord rec;
    rec.fold = static_cast<std::size_t>(require_integer(r, "fold", line));
    rec.id = require_string(r, "id", line);
    rec.group = require_string(r, "group", line);
    rec.gold = require(r, "gold", line).get<Prediction>();
    rec.pred = require(r, "pred", line).get<Prediction>();
    if (rec.gold.size() != rec.pred.size())
      throw error(errc::validation, "gold and predicted lengths differ for '" + rec.id + "'", line);
    if (rec.fold >= p.folds) throw error(errc::validation, "fold index out of range", line);
    p.records.push_back(std::move(rec));
  });
  if (!header) throw error(errc::parse, "predictions file '" + path + "' has no header");
  return p;
}

Metrics score_records(Task task, const std::vector<const PredictionRecord*>& recs) {
  if (task == Task::ner) {
    std::vector<Prediction> gold, pred;
    for (const auto* r : recs) {
      gold.push_back(r->gold);
      pred.push_back(r->pred);
    }
    return entity_prf1(gold, pred);
  }
  std::vector<std::string> gold, pred;
  for (const auto* r : recs) {
    gold.push_back(r->gold.at(0));
    pred.push_back(r->pred.at(0));
  }
  return classification_metrics(gold, pred);
}

// ---------------------------------------------------------------- commands

struct SynthArgs {
  std::string task = "ner";
  std::size_t sentences = 100;
  std::size_t subjects = 3;
  std::size_t vocab = 400;
  std::vector<std::string> effects;
  std::string effect_label;
  bool no_eeg = false;
  double eeg_noise = 1.0;
  double missing_trial = 0.0;
  std::string out_dir;
};

void cmd_synth(const Context& ctx, const SynthArgs& a) {
  SynthSpec spec;
  spec.task = parse_task(a.task);
  spec.sentences = a.sentences;
  spec.subjects = a.subjects;
  spec.vocab_size = a.vocab;
  spec.with_eeg = !a.no_eeg;
  spec.eeg_noise_uv = a.eeg_noise;
  spec.missing_trial_prob = a.missing_trial;
  if (!a.effect_label.empty()) spec.effect_label = a.effect_label;
  for (const auto& e : a.effects) {
    auto eq = e.find('=');
    if (eq == std::string::npos || eq == 0) throw error(errc::config, "--effect expects NAME=VALUE");
    try {
      spec.effects[e.substr(0, eq)] = std::stod(e.substr(eq + 1));
    } catch (const std::invalid_argument&) {
      throw error(errc::config, "--effect value must be a number");
    }
  }
  const auto data = generate_synthetic(spec, ctx.globals.seed);
  const fs::path dir(a.out_dir);
  write_jsonl(ctx, dir / "corpus.jsonl", [&](std::ostream& f) { write_corpus(f, data.corpus); });
  write_jsonl(ctx, dir / "fixations.jsonl", [&](std::ostream& f) { write_fixations(f, data.fixations); });
  if (spec.with_eeg) write_jsonl(ctx, dir / "eeg.jsonl", [&](std::ostream& f) { write_eeg(f, data.eeg); });
  write_json_via(ctx, dir / "synth_meta.json", [&](std::ostream& f) { write_synth_metadata(f, data.meta); });
  write_config_file(ctx, dir / "config.json");
}

struct InputArgs {
  std::string task = "ner";
  std::string corpus;
  std::string fixations;
  std::string eeg;
  std::string out;
};

void cmd_validate(const Context& ctx, const InputArgs& a) {
  const auto corpus = load_corpus(ctx, a.corpus, a.task);
  FixationLog fixations;
  std::vector<EegFixationRecord> eeg;
  if (!a.fixations.empty()) {
    auto in = open_in(a.fixations);
    fixations = parse_fixations(in, ctx.parse_options(), &corpus);
  }
  if (!a.eeg.empty()) {
    if (a.fixations.empty()) throw error(errc::config, "--eeg needs --fixations");
    auto in = open_in(a.eeg);
    eeg = parse_eeg(in, ctx.parse_options(), &fixations);
  }
  const auto rep = validate_coverage(corpus, fixations, eeg);
  ordered_json j;
  j["valid"] = true;
  j["sentences"] = rep.sentences;
  j["tokens"] = rep.tokens;
  j["fixations"] = rep.fixations;
  j["eeg_records"] = rep.eeg_records;
  j["subjects"] = rep.subjects;
  ordered_json missing = ordered_json::array();
  for (const auto& k : rep.missing_trials) missing.push_back({{"subject", k.subject}, {"sentence_id", k.sentence_id}});
  j["missing_trials"] = std::move(missing);
  j["warnings"] = rep.warnings;
  *ctx.out << j.dump(1) << '\n';
  if (!a.out.empty()) {
    write_json(ctx, a.out, j);
    write_config_file(ctx, config_beside(a.out));
  }
}

void cmd_extract_gaze(const Context& ctx, const InputArgs& a, double min_duration) {
  const auto corpus = load_corpus(ctx, a.corpus, a.task);
  auto in = open_in(a.fixations);
  const auto fixations = parse_fixations(in, ctx.parse_options(), &corpus);
  GazeOptions opts;
  opts.min_duration_ms = min_duration;
  opts.strict = ctx.globals.strict;
  opts.threads = ctx.globals.threads;
  const auto table = extract_gaze(corpus, fixations, opts);
  write_jsonl(ctx, a.out, [&](std::ostream& f) { write_gaze_features(f, table); });
  write_config_file(ctx, config_beside(a.out));
}

struct EegArgs {
  std::string window = "ffd";
  std::string reduce = "electrode_mean";
  std::string weighting = "duration";
  double min_duration = kMinFixationMs;
};

void cmd_extract_eeg(const Context& ctx, const InputArgs& a, const EegArgs& e) {
  const auto corpus = load_corpus(ctx, a.corpus, a.task);
  auto fin = open_in(a.fixations);
  const auto fixations = parse_fixations(fin, ctx.parse_options(), &corpus);
  auto ein = open_in(a.eeg);
  const auto records = parse_eeg(ein, ctx.parse_options(), &fixations);
  EegOptions opts;
  opts.window = parse_eeg_window(e.window);
  opts.reduction = parse_eeg_reduction(e.reduce);
  if (e.weighting == "duration")
    opts.weighting = EegWeighting::duration;
  else if (e.weighting == "uniform")
    opts.weighting = EegWeighting::uniform;
  else
    throw error(errc::config, "--weighting must be duration or uniform");
  opts.min_duration_ms = e.min_duration;
  opts.strict = ctx.globals.strict;
  opts.threads = ctx.globals.threads;
  const auto res = extract_eeg(corpus, fixations, records, opts);
  for (const auto& w : res.warnings) warn(ctx, w);
  write_jsonl(ctx, a.out, [&](std::ostream& f) { write_eeg_features(f, res.table, opts.window, opts.reduction); });
  write_config_file(ctx, config_beside(a.out));
}

TokenFeatures concatenate(const Corpus& corpus, const std::vector<std::pair<std::string, TokenFeatures>>& blocks) {
  std::vector<FeatureBlock> refs;
  for (const auto& [name, f] : blocks) refs.push_back({name, &f});
  const auto ds = assemble(corpus, refs);
  TokenFeatures out;
  out.dims = ds.manifest;
  for (std::size_t i = 0; i < ds.instances.size(); ++i)
    out.sentences[corpus.sentences[i].id] = ds.instances[i].token_features;
  return out;
}

void cmd_build_lexicon(const Context& ctx, const InputArgs& a, const FeatureArgs& fa) {
  auto corpus = load_corpus(ctx, a.corpus, a.task);
  const auto blocks = load_blocks(ctx, fa, corpus);
  if (blocks.empty()) throw error(errc::config, "build-lexicon needs --gaze, --eeg-features or --token-features");
  // Relation corpora expand sentences; the lexicon only needs tokens.
  Corpus tokens_only = corpus;
  tokens_only.task = Task::ner;
  for (auto& s : tokens_only.sentences) s.labels.assign(s.tokens.size(), "O");
  const auto lexicon = build_type_lexicon(corpus, concatenate(tokens_only, blocks));
  write_json_via(ctx, a.out, [&](std::ostream& f) { write_lexicon(f, lexicon); });
  write_config_file(ctx, config_beside(a.out));
}

void cmd_apply_lexicon(const Context& ctx, const InputArgs& a, const std::string& lexicon_path) {
  const auto corpus = load_corpus(ctx, a.corpus, a.task);
  auto in = open_in(lexicon_path);
  const auto lexicon = parse_lexicon(in);
  const auto app = apply_type_lexicon(lexicon, corpus);
  write_jsonl(ctx, a.out, [&](std::ostream& f) { write_token_features(f, app.features); });
  ordered_json cov;
  cov["tokens"] = app.coverage.tokens;
  cov["unknown"] = app.coverage.unknown;
  cov["unknown_percent"] = app.coverage.unknown_percent;
  write_json(ctx, fs::path(a.out + ".coverage.json"), cov);
  *ctx.out << cov.dump() << '\n';
  write_config_file(ctx, config_beside(a.out));
}

struct AssembleArgs {
  std::string as_task;
  std::string neutral_policy = "drop_all";
  std::string conll_dir;
  std::size_t folds = 10;
  std::string ratios;
  std::size_t bins = 10;
};

void cmd_assemble(const Context& ctx, const InputArgs& a, const FeatureArgs& fa, const AssembleArgs& aa) {
  const auto corpus = load_corpus(ctx, a.corpus, a.task);
  const auto blocks = load_blocks(ctx, fa, corpus);
  std::vector<FeatureBlock> refs;
  for (const auto& [name, f] : blocks) refs.push_back({name, &f});
  AssembleOptions opts;
  if (!aa.as_task.empty()) opts.task = parse_task(aa.as_task);
  opts.neutral_policy = parse_neutral_policy(aa.neutral_policy);
  opts.strict = ctx.globals.strict;
  const auto ds = assemble(corpus, refs, opts);
  write_jsonl(ctx, a.out, [&](std::ostream& f) { write_dataset(f, ds); });
  if (!aa.conll_dir.empty()) {
    const auto plan = kfold_split(ds, aa.folds, parse_ratios(aa.ratios, aa.folds, 1), derive_seed(ctx.globals.seed, "folds"));
    for (std::size_t fold = 0; fold < aa.folds; ++fold) {
      const auto train = section_indices(ds, plan, fold, Section::train);
      const auto stats = fit_dataset_normalization(ds, train);
      for (auto section : {Section::train, Section::dev, Section::test}) {
        const auto idx = section_indices(ds, plan, fold, section);
        std::ostringstream text;
        emit_conll(text, ds, idx, &stats, aa.bins);
        const fs::path path =
            fs::path(aa.conll_dir) / ("fold" + std::to_string(fold) + "_" + std::string(to_string(section)) + ".conll");
        auto f = open_out(path);
        f << "#provenance\t" << ctx.provenance().dump() << '\n' << text.str();
        finish(f, path);
      }
    }
  }
  write_config_file(ctx, config_beside(a.out));
}

struct TrainArgs {
  std::string dataset;
  std::string model = "auto";
  std::size_t folds = 10;
  std::string ratios;
  std::size_t epochs = 0;  // 0 = model default
  double lr = 0.0;
  double l2 = -1.0;
  std::size_t batch_size = 0;
  std::size_t halve_every = 0;
  std::size_t bins = 10;
  bool global_norm = false;
  std::string out_dir;
};

void cmd_train(const Context& ctx, const TrainArgs& a) {
  auto in = open_in(a.dataset);
  const auto ds = parse_dataset(in, ctx.parse_options());
  std::string kind = a.model;
  if (kind == "auto") kind = ds.task == Task::ner ? "tagger" : "logistic";
  if (kind != "tagger" && kind != "logistic") throw error(errc::config, "--model must be auto, tagger or logistic");

  const auto plan = kfold_split(ds, a.folds, parse_ratios(a.ratios, a.folds, 1), derive_seed(ctx.globals.seed, "folds"));
  std::vector<std::size_t> all(ds.instances.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  std::optional<NormalizationStats> global;
  if (a.global_norm) global = fit_dataset_normalization(ds, all);

  std::vector<std::string> model_text(a.folds);
  std::vector<std::vector<PredictionRecord>> fold_records(a.folds);
  parallel_for(a.folds, ctx.globals.threads, [&](std::size_t fold) {
    const auto train = section_indices(ds, plan, fold, Section::train);
    const auto test = section_indices(ds, plan, fold, Section::test);
    const std::uint64_t seed = derive_seed(derive_seed(ctx.globals.seed, "train"), fold);
    std::ostringstream buf;
    std::vector<Prediction> preds;
    if (kind == "tagger") {
      TaggerConfig cfg;
      if (a.epochs) cfg.epochs = a.epochs;
      cfg.seed = seed;
      cfg.n_bins = a.bins;
      cfg.normalization = global;
      const auto m = train_tagger(ds, train, cfg);
      preds = predict_tagger(m, ds, test);
      write_model(buf, m);
    } else {
      LogisticConfig cfg;
      if (a.epochs) cfg.epochs = a.epochs;
      if (a.lr > 0.0) cfg.lr = a.lr;
      if (a.l2 >= 0.0) cfg.l2 = a.l2;
      cfg.batch_size = a.batch_size;
      cfg.halve_every = a.halve_every;
      cfg.seed = seed;
      cfg.normalization = global;
      const auto m = train_logistic(ds, train, cfg);
      preds = predict_logistic(m, ds, test);
      write_model(buf, m);
    }
    model_text[fold] = buf.str();
    for (std::size_t k = 0; k < test.size(); ++k) {
      const auto& inst = ds.instances[test[k]];
      fold_records[fold].push_back({fold, inst.id, inst.group, inst.labels, preds[k]});
    }
  });

  const fs::path dir(a.out_dir);
  write_json_via(ctx, dir / "folds.json", [&](std::ostream& f) { write_fold_plan(f, plan); });
  for (std::size_t fold = 0; fold < a.folds; ++fold)
    write_json(ctx, dir / "models" / ("fold" + std::to_string(fold) + ".json"), ordered_json::parse(model_text[fold]));
  PredictionFile p;
  p.task = ds.task;
  p.manifest = ds.manifest;
  p.folds = a.folds;
  for (auto& recs : fold_records)
    for (auto& r : recs) p.records.push_back(std::move(r));
  write_predictions(ctx, dir / "predictions.jsonl", p);
  write_config_file(ctx, dir / "config.json");
}

struct SignificanceArgs {
  double alpha = 0.01;
  std::size_t n_hyp = 12;
  std::size_t replicates = 10000;
};

struct Comparison {
  PermutationResult perm;
  SignificanceResult sig;
};

Comparison compare_runs(const Context& ctx, const PredictionFile& a, const PredictionFile& b,
                        const SignificanceArgs& s, std::string_view label) {
  if (a.task != b.task) throw error(errc::config, "compared runs are for different tasks");
  std::map<std::string, const PredictionRecord*> by_id;
  for (const auto& r : b.records) by_id[r.id] = &r;
  if (by_id.size() != a.records.size() || b.records.size() != a.records.size())
    throw error(errc::validation, "compared runs do not cover the same instances");
  std::vector<Prediction> pa, pb, gold;
  std::vector<std::string> groups;
  std::set<std::string> classes;
  for (const auto& r : a.records) {
    auto it = by_id.find(r.id);
    if (it == by_id.end()) throw error(errc::validation, "instance '" + r.id + "' is missing from one run");
    if (it->second->gold != r.gold) throw error(errc::validation, "runs disagree on the gold labels of '" + r.id + "'");
    pa.push_back(r.pred);
    pb.push_back(it->second->pred);
    gold.push_back(r.gold);
    groups.push_back(r.group);
    classes.insert(r.gold.begin(), r.gold.end());
    classes.insert(r.pred.begin(), r.pred.end());
    classes.insert(it->second->pred.begin(), it->second->pred.end());
  }
  PermutationOptions opts;
  opts.replicates = s.replicates;
  opts.seed = derive_seed(ctx.globals.seed, label);
  opts.threads = ctx.globals.threads;
  opts.groups = std::move(groups);
  const auto scorer = default_scorer(a.task, {classes.begin(), classes.end()});
  Comparison c;
  c.perm = permutation_test(pa, pb, gold, scorer, opts);
  c.sig = bonferroni(c.perm.p_value, s.alpha, s.n_hyp);
  return c;
}

struct EvaluateArgs {
  std::vector<std::string> runs;
  std::vector<std::string> compare;
  std::string out_dir;
};

void cmd_evaluate(const Context& ctx, const EvaluateArgs& a, const SignificanceArgs& s) {
  std::vector<std::string> names;
  std::map<std::string, PredictionFile> files;
  for (const auto& spec : a.runs) {
    auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw error(errc::config, "--run expects NAME=DIR");
    const auto name = spec.substr(0, eq);
    if (files.count(name)) throw error(errc::config, "run '" + name + "' given twice");
    files[name] = read_predictions(ctx, (fs::path(spec.substr(eq + 1)) / "predictions.jsonl").string());
    names.push_back(name);
  }
  const auto cell_name = [](const std::string& run) { return run.substr(0, run.find('@')); };

  std::vector<RunResult> results;
  for (const auto& name : names) {
    const auto& p = files[name];
    RunResult r;
    r.task = p.task;
    r.config = cell_name(name);
    for (std::size_t fold = 0; fold < p.folds; ++fold) {
      std::vector<const PredictionRecord*> recs;
      for (const auto& rec : p.records)
        if (rec.fold == fold) recs.push_back(&rec);
      if (recs.empty()) continue;
      r.folds.push_back({fold, score_records(p.task, recs)});
    }
    results.push_back(std::move(r));
  }

  ordered_json comparisons = ordered_json::array();
  std::ostringstream lines;
  for (const auto& spec : a.compare) {
    auto parts = split(spec, ',');
    if (parts.size() != 2) throw error(errc::config, "--compare expects A,B");
    for (const auto& p : parts)
      if (!files.count(p)) throw error(errc::config, "--compare names unknown run '" + p + "'");
    const auto c = compare_runs(ctx, files[parts[0]], files[parts[1]], s, "compare:" + spec);
    auto it = std::find(names.begin(), names.end(), parts[1]);
    auto& target = results[static_cast<std::size_t>(it - names.begin())];
    target.significance = c.sig;
    target.compared_with = cell_name(parts[0]);
    ordered_json j;
    j["a"] = parts[0];
    j["b"] = parts[1];
    j["observed_delta"] = c.perm.observed;
    j["p_value"] = c.perm.p_value;
    j["replicates"] = c.perm.replicates;
    j["threshold"] = c.sig.threshold;
    j["stars"] = std::string(to_string(c.sig.stars));
    comparisons.push_back(std::move(j));
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s vs %s: delta=%.4f p=%.6g %s\n", parts[1].c_str(), parts[0].c_str(),
                  c.perm.observed, c.perm.p_value, std::string(to_string(c.sig.stars)).c_str());
    lines << buf;
  }

  const auto report = make_report(results);
  for (const auto& w : report.warnings) warn(ctx, w);
  auto j = report_json(report);
  j["comparisons"] = std::move(comparisons);
  const auto table = render_table(report) + lines.str();
  *ctx.out << table;
  const fs::path dir(a.out_dir);
  write_json(ctx, dir / "report.json", j);
  write_text(ctx, dir / "report.txt", table);
  write_config_file(ctx, dir / "config.json");
}

void cmd_significance(const Context& ctx, const std::string& a, const std::string& b, const SignificanceArgs& s,
                      const std::string& out) {
  const auto pa = read_predictions(ctx, a);
  const auto pb = read_predictions(ctx, b);
  const auto c = compare_runs(ctx, pa, pb, s, "significance");
  ordered_json j;
  j["observed_delta"] = c.perm.observed;
  j["p_value"] = c.perm.p_value;
  j["replicates"] = c.perm.replicates;
  j["alpha"] = c.sig.alpha;
  j["n_hypotheses"] = c.sig.n_hypotheses;
  j["threshold"] = c.sig.threshold;
  j["stars"] = std::string(to_string(c.sig.stars));
  *ctx.out << j.dump() << '\n';
  if (!out.empty()) {
    write_json(ctx, out, j);
    write_config_file(ctx, config_beside(out));
  }
}

struct MtlArgs {
  std::string dataset;
  std::vector<std::string> aux;
  std::string frequencies;
  std::string labeling = "polarity";
  std::size_t folds = 5;
  std::string ratios;
  std::size_t epochs = 8;
  double lr = 0.2;
  std::size_t halve_every = 0;
  std::size_t embedding_dim = 32;
  std::size_t hidden_dim = 32;
  bool cognitive_inputs = false;
  std::string out_dir;
};

void cmd_mtl(const Context& ctx, const MtlArgs& a) {
  auto in = open_in(a.dataset);
  const auto ds = parse_dataset(in, ctx.parse_options());
  SentimentLabeling labeling;
  if (a.labeling == "polarity")
    labeling = SentimentLabeling::polarity;
  else if (a.labeling == "neutrality")
    labeling = SentimentLabeling::neutrality;
  else
    throw error(errc::config, "--labeling must be polarity or neutrality");
  std::vector<AuxTaskSpec> specs;
  for (const auto& s : a.aux) specs.push_back(AuxTaskSpec::parse(s));
  std::optional<FrequencyLexicon> given;
  if (!a.frequencies.empty()) {
    auto fin = open_in(a.frequencies);
    given = parse_frequency_lexicon(fin);
  }

  MtlConfig cfg;
  cfg.net.embedding_dim = a.embedding_dim;
  cfg.net.hidden_dim = a.hidden_dim;
  cfg.epochs = a.epochs;
  cfg.lr = a.lr;
  cfg.halve_every = a.halve_every;
  cfg.cognitive_inputs = a.cognitive_inputs;

  const auto plan = kfold_split(ds, a.folds, parse_ratios(a.ratios, a.folds, 0), derive_seed(ctx.globals.seed, "folds"));
  const auto main = make_main_task(ds, labeling);
  std::vector<std::vector<HeadAccuracy>> per_fold(a.folds);
  parallel_for(a.folds, ctx.globals.threads, [&](std::size_t fold) {
    const auto train = section_indices(ds, plan, fold, Section::train);
    const auto test = section_indices(ds, plan, fold, Section::test);
    FrequencyLexicon counted;
    if (!given) {
      for (auto i : train)
        for (const auto& t : ds.instances[i].tokens) ++counted[lowercase(t)];
    }
    const FrequencyLexicon* freq = given ? &*given : &counted;
    std::vector<MtlTask> tasks = {main};
    for (const auto& s : specs) tasks.push_back(make_aux_task(ds, s, train, freq));
    MtlConfig fold_cfg = cfg;
    fold_cfg.seed = derive_seed(derive_seed(ctx.globals.seed, "mtl"), fold);
    const auto model = train_multitask(ds, tasks, train, fold_cfg);
    per_fold[fold] = evaluate_multitask(model, ds, tasks, test);
  });

  const auto head_json = [](const HeadAccuracy& h) {
    ordered_json j;
    j["task"] = h.task;
    j["accuracy"] = h.accuracy;
    j["majority_accuracy"] = h.majority_accuracy;
    if (h.accuracy_without_o) j["accuracy_without_o"] = *h.accuracy_without_o;
    j["tokens"] = h.tokens;
    return j;
  };
  ordered_json folds = ordered_json::array();
  for (std::size_t f = 0; f < a.folds; ++f) {
    ordered_json heads = ordered_json::array();
    for (const auto& h : per_fold[f]) heads.push_back(head_json(h));
    folds.push_back({{"fold", f}, {"heads", std::move(heads)}});
  }
  ordered_json mean = ordered_json::array();
  std::ostringstream table;
  char buf[200];
  std::snprintf(buf, sizeof buf, "%-16s %10s %10s %12s\n", "task", "accuracy", "majority", "acc(no O)");
  table << buf;
  for (std::size_t t = 0; t < per_fold.front().size(); ++t) {
    HeadAccuracy m;
    m.task = per_fold.front()[t].task;
    double without_o = 0.0;
    bool has_without_o = false;
    for (const auto& fold : per_fold) {
      m.accuracy += fold[t].accuracy;
      m.majority_accuracy += fold[t].majority_accuracy;
      m.tokens += fold[t].tokens;
      if (fold[t].accuracy_without_o) {
        without_o += *fold[t].accuracy_without_o;
        has_without_o = true;
      }
    }
    const double n = static_cast<double>(per_fold.size());
    m.accuracy /= n;
    m.majority_accuracy /= n;
    if (has_without_o) m.accuracy_without_o = without_o / n;
    mean.push_back(head_json(m));
    std::snprintf(buf, sizeof buf, "%-16s %10.2f %10.2f %12s\n", m.task.c_str(), m.accuracy, m.majority_accuracy,
                  m.accuracy_without_o ? std::to_string(*m.accuracy_without_o).substr(0, 6).c_str() : "-");
    table << buf;
  }
  ordered_json rep;
  rep["main"] = main.name;
  rep["labeling"] = a.labeling;
  rep["aux"] = a.aux;
  rep["mean"] = std::move(mean);
  rep["folds"] = std::move(folds);
  *ctx.out << table.str();
  const fs::path dir(a.out_dir);
  write_json(ctx, dir / "mtl_report.json", rep);
  write_text(ctx, dir / "mtl_report.txt", table.str());
  write_config_file(ctx, dir / "config.json");
}

void write_error(std::ostream& err, std::string_view kind, const std::string& message,
                 std::optional<std::size_t> line = std::nullopt) {
  ordered_json e;
  e["kind"] = std::string(kind);
  e["message"] = message;
  if (line) e["line"] = *line;
  ordered_json j;
  j["error"] = std::move(e);
  err << j.dump() << '\n';
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cognitive signal features for NLP: extraction, aggregation, training and evaluation", "cogsig"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML/INI file of option values (sections per command)");
  Globals g;
  app.add_option("--seed", g.seed, "master seed")->capture_default_str();
  app.add_flag("--strict", g.strict, "reject unknown fields and missing records");
  app.add_option("--threads", g.threads, "worker threads (0 = all cores); never changes results")->capture_default_str();

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic corpus with planted effects");
  synth_cmd->add_option("--task", synth.task)->capture_default_str();
  synth_cmd->add_option("--sentences", synth.sentences)->capture_default_str();
  synth_cmd->add_option("--subjects", synth.subjects)->capture_default_str();
  synth_cmd->add_option("--vocab", synth.vocab)->capture_default_str();
  synth_cmd->add_option("--effect", synth.effects, "NAME=VALUE, NAME is TRT or an EEG band");
  synth_cmd->add_option("--effect-label", synth.effect_label);
  synth_cmd->add_flag("--no-eeg", synth.no_eeg);
  synth_cmd->add_option("--eeg-noise", synth.eeg_noise)->capture_default_str();
  synth_cmd->add_option("--missing-trial-prob", synth.missing_trial)->capture_default_str();
  synth_cmd->add_option("--out-dir", synth.out_dir)->required();

  InputArgs input;
  const auto add_inputs = [&](CLI::App* sub, bool fixations, bool eeg, bool out_required) {
    sub->add_option("--task", input.task, "ner | relclass | sentiment2 | sentiment3")->capture_default_str();
    sub->add_option("--corpus", input.corpus)->required();
    if (fixations) sub->add_option("--fixations", input.fixations);
    if (eeg) sub->add_option("--eeg", input.eeg);
    auto* o = sub->add_option("--out", input.out);
    if (out_required) o->required();
  };

  auto* validate_cmd = app.add_subcommand("ingest-validate", "parse inputs and report coverage");
  add_inputs(validate_cmd, true, true, false);

  double gaze_min = kMinFixationMs;
  auto* gaze_cmd = app.add_subcommand("extract-gaze", "per-subject word reading measures");
  add_inputs(gaze_cmd, true, false, true);
  gaze_cmd->add_option("--min-duration", gaze_min)->capture_default_str();

  EegArgs eeg;
  auto* eeg_cmd = app.add_subcommand("extract-eeg", "per-subject word EEG band features");
  add_inputs(eeg_cmd, true, true, true);
  eeg_cmd->add_option("--eeg-window", eeg.window, "ffd | trt")->capture_default_str();
  eeg_cmd->add_option("--eeg-reduce", eeg.reduce, "electrode_mean | band_mean | none")->capture_default_str();
  eeg_cmd->add_option("--weighting", eeg.weighting, "duration | uniform")->capture_default_str();
  eeg_cmd->add_option("--min-duration", eeg.min_duration)->capture_default_str();

  FeatureArgs features;
  auto* build_cmd = app.add_subcommand("build-lexicon", "type-aggregated feature lexicon");
  add_inputs(build_cmd, false, false, true);
  add_feature_options(build_cmd, features);

  std::string lexicon_path;
  auto* apply_cmd = app.add_subcommand("apply-lexicon", "token features from a type lexicon");
  add_inputs(apply_cmd, false, false, true);
  apply_cmd->add_option("--lexicon", lexicon_path)->required();

  AssembleArgs assemble_args;
  auto* assemble_cmd = app.add_subcommand("assemble", "build a dataset from a corpus and feature files");
  add_inputs(assemble_cmd, false, false, true);
  add_feature_options(assemble_cmd, features);
  assemble_cmd->add_option("--as-task", assemble_args.as_task, "e.g. sentiment2 from a sentiment3 corpus");
  assemble_cmd->add_option("--neutral-policy", assemble_args.neutral_policy, "drop_all | drop_train_only")
      ->capture_default_str();
  assemble_cmd->add_option("--conll-dir", assemble_args.conll_dir, "also emit per-fold CoNLL files (ner)");
  assemble_cmd->add_option("--folds", assemble_args.folds)->capture_default_str();
  assemble_cmd->add_option("--ratios", assemble_args.ratios, "train,dev,test (default: one dev and one test fold)")->capture_default_str();
  assemble_cmd->add_option("--bins", assemble_args.bins)->capture_default_str();

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "k-fold training with test-section predictions");
  train_cmd->add_option("--dataset", train.dataset)->required();
  train_cmd->add_option("--model", train.model, "auto | tagger | logistic")->capture_default_str();
  train_cmd->add_option("--folds", train.folds)->capture_default_str();
  train_cmd->add_option("--ratios", train.ratios, "train,dev,test (default: one dev and one test fold)")->capture_default_str();
  train_cmd->add_option("--epochs", train.epochs, "0 = model default")->capture_default_str();
  train_cmd->add_option("--lr", train.lr, "0 = model default")->capture_default_str();
  train_cmd->add_option("--l2", train.l2, "negative = model default")->capture_default_str();
  train_cmd->add_option("--batch-size", train.batch_size, "0 = full batch")->capture_default_str();
  train_cmd->add_option("--halve-every", train.halve_every)->capture_default_str();
  train_cmd->add_option("--bins", train.bins)->capture_default_str();
  train_cmd->add_flag("--global-norm", train.global_norm, "fit normalization on all instances");
  train_cmd->add_option("--out-dir", train.out_dir)->required();

  SignificanceArgs sig;
  const auto add_sig = [&](CLI::App* sub) {
    sub->add_option("--alpha", sig.alpha)->capture_default_str();
    sub->add_option("--n-hyp", sig.n_hyp)->capture_default_str();
    sub->add_option("--replicates", sig.replicates)->capture_default_str();
  };

  EvaluateArgs evaluate;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "metrics report with optional significance tests");
  evaluate_cmd->add_option("--run", evaluate.runs, "NAME=DIR of a train run")->required();
  evaluate_cmd->add_option("--compare", evaluate.compare, "A,B: test B against A");
  add_sig(evaluate_cmd);
  evaluate_cmd->add_option("--out-dir", evaluate.out_dir)->required();

  std::string sig_a, sig_b, sig_out;
  auto* sig_cmd = app.add_subcommand("significance", "permutation test between two prediction files");
  sig_cmd->add_option("--a", sig_a)->required();
  sig_cmd->add_option("--b", sig_b)->required();
  add_sig(sig_cmd);
  sig_cmd->add_option("--out", sig_out);

  MtlArgs mtl;
  auto* mtl_cmd = app.add_subcommand("mtl", "multi-task training with auxiliary cognitive targets");
  mtl_cmd->add_option("--dataset", mtl.dataset)->required();
  mtl_cmd->add_option("--aux", mtl.aux, "SOURCE[:BINS[:LAMBDA]]");
  mtl_cmd->add_option("--frequencies", mtl.frequencies, "word<TAB>count file");
  mtl_cmd->add_option("--labeling", mtl.labeling, "polarity | neutrality")->capture_default_str();
  mtl_cmd->add_option("--folds", mtl.folds)->capture_default_str();
  mtl_cmd->add_option("--ratios", mtl.ratios, "train,dev,test (default: one test fold, no dev)")->capture_default_str();
  mtl_cmd->add_option("--epochs", mtl.epochs)->capture_default_str();
  mtl_cmd->add_option("--lr", mtl.lr)->capture_default_str();
  mtl_cmd->add_option("--halve-every", mtl.halve_every)->capture_default_str();
  mtl_cmd->add_option("--embedding-dim", mtl.embedding_dim)->capture_default_str();
  mtl_cmd->add_option("--hidden-dim", mtl.hidden_dim)->capture_default_str();
  mtl_cmd->add_flag("--cognitive-inputs", mtl.cognitive_inputs);
  mtl_cmd->add_option("--out-dir", mtl.out_dir)->required();

  std::vector<std::string> argv_storage = {"cogsig"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : argv_storage) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    write_error(err, "usage", e.what());
    return 2;
  }

  const CLI::App* sub = app.get_subcommands().front();
  Context ctx;
  ctx.out = &out;
  ctx.err = &err;
  ctx.globals = g;
  ctx.config = resolve_config(app, *sub, g);
  ctx.hash = hex64(fnv1a64(ctx.config.dump()));

  try {
    if (sub == synth_cmd) cmd_synth(ctx, synth);
    else if (sub == validate_cmd) cmd_validate(ctx, input);
    else if (sub == gaze_cmd) cmd_extract_gaze(ctx, input, gaze_min);
    else if (sub == eeg_cmd) cmd_extract_eeg(ctx, input, eeg);
    else if (sub == build_cmd) cmd_build_lexicon(ctx, input, features);
    else if (sub == apply_cmd) cmd_apply_lexicon(ctx, input, lexicon_path);
    else if (sub == assemble_cmd) cmd_assemble(ctx, input, features, assemble_args);
    else if (sub == train_cmd) cmd_train(ctx, train);
    else if (sub == evaluate_cmd) cmd_evaluate(ctx, evaluate, sig);
    else if (sub == sig_cmd) cmd_significance(ctx, sig_a, sig_b, sig, sig_out);
    else if (sub == mtl_cmd) cmd_mtl(ctx, mtl);
  } catch (const error& e) {
    write_error(err, to_string(e.code()), e.detail(), e.line());
    return 1;
  } catch (const fs::filesystem_error& e) {
    write_error(err, to_string(errc::io), e.what());
    return 1;
  } catch (const json::exception& e) {
    write_error(err, to_string(errc::parse), e.what());
    return 1;
  }
  return 0;
}

}  // namespace cogsig
