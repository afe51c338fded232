#include "cogsig/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "cogsig/error.hpp"
#include "cogsig/parallel.hpp"
#include "cogsig/rng.hpp"

namespace cogsig {

double f1_of(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

std::vector<EntitySpan> extract_spans(std::span<const std::string> tags) {
  std::vector<EntitySpan> spans;
  std::optional<EntitySpan> open;
  const auto close = [&](std::size_t at) {
    if (open) {
      open->end = at;
      spans.push_back(std::move(*open));
      open.reset();
    }
  };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const auto& t = tags[i];
    if (t.size() > 2 && (t[0] == 'B' || t[0] == 'I') && t[1] == '-') {
      const std::string type = t.substr(2);
      if (t[0] == 'I' && open && open->type == type) continue;
      close(i);
      open = EntitySpan{i, 0, type};
    } else {
      close(i);
    }
  }
  close(tags.size());
  return spans;
}

namespace {

void check_aligned(std::size_t a, std::size_t b, std::string_view what) {
  if (a != b)
    throw error(errc::dimension_mismatch, std::string(what) + " length mismatch (" + std::to_string(a) + " vs " +
                                              std::to_string(b) + ")");
}

double percent(double num, double den) { return den > 0.0 ? 100.0 * num / den : 0.0; }

void entity_stats(const Prediction& gold, const Prediction& pred, std::span<double> s) {
  check_aligned(gold.size(), pred.size(), "tag sequence");
  const auto g = extract_spans(gold);
  const auto p = extract_spans(pred);
  std::size_t correct = 0;
  for (const auto& span : p) correct += std::binary_search(g.begin(), g.end(), span);
  s[0] = static_cast<double>(correct);
  s[1] = static_cast<double>(p.size());
  s[2] = static_cast<double>(g.size());
}

double entity_f1_score(std::span<const double> t) {
  return f1_of(percent(t[0], t[1]), percent(t[0], t[2]));
}

}  // namespace

Metrics entity_prf1(std::span<const Prediction> gold, std::span<const Prediction> pred) {
  check_aligned(gold.size(), pred.size(), "prediction set");
  double stats[3] = {0, 0, 0};
  std::size_t tokens = 0, token_correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    double s[3];
    entity_stats(gold[i], pred[i], s);
    for (int k = 0; k < 3; ++k) stats[k] += s[k];
    tokens += gold[i].size();
    for (std::size_t j = 0; j < gold[i].size(); ++j) token_correct += gold[i][j] == pred[i][j];
  }
  Metrics m;
  m.correct = static_cast<std::size_t>(stats[0]);
  m.predicted = static_cast<std::size_t>(stats[1]);
  m.support = static_cast<std::size_t>(stats[2]);
  m.precision = percent(stats[0], stats[1]);
  m.recall = percent(stats[0], stats[2]);
  m.f1 = f1_of(m.precision, m.recall);
  m.accuracy = percent(static_cast<double>(token_correct), static_cast<double>(tokens));
  return m;
}

double accuracy(std::span<const std::string> gold, std::span<const std::string> pred) {
  check_aligned(gold.size(), pred.size(), "label sequence");
  if (gold.empty()) throw error(errc::precondition, "accuracy of an empty sequence");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) correct += gold[i] == pred[i];
  return percent(static_cast<double>(correct), static_cast<double>(gold.size()));
}

Metrics classification_metrics(std::span<const std::string> gold, std::span<const std::string> pred) {
  Metrics m;
  m.accuracy = accuracy(gold, pred);
  std::set<std::string> classes(gold.begin(), gold.end());
  classes.insert(pred.begin(), pred.end());
  double p_sum = 0.0, r_sum = 0.0, f_sum = 0.0;
  for (const auto& c : classes) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      tp += gold[i] == c && pred[i] == c;
      fp += gold[i] != c && pred[i] == c;
      fn += gold[i] == c && pred[i] != c;
    }
    const double p = percent(static_cast<double>(tp), static_cast<double>(tp + fp));
    const double r = percent(static_cast<double>(tp), static_cast<double>(tp + fn));
    p_sum += p;
    r_sum += r;
    f_sum += f1_of(p, r);
  }
  const double k = static_cast<double>(classes.size());
  m.precision = p_sum / k;
  m.recall = r_sum / k;
  m.f1 = f_sum / k;
  m.support = gold.size();
  m.predicted = pred.size();
  for (std::size_t i = 0; i < gold.size(); ++i) m.correct += gold[i] == pred[i];
  return m;
}

Scorer entity_f1_scorer() {
  return {"entity_f1", 3, entity_stats, entity_f1_score};
}

Scorer accuracy_scorer() {
  return {"accuracy", 2,
          [](const Prediction& gold, const Prediction& pred, std::span<double> s) {
            check_aligned(gold.size(), pred.size(), "label sequence");
            std::size_t correct = 0;
            for (std::size_t i = 0; i < gold.size(); ++i) correct += gold[i] == pred[i];
            s[0] = static_cast<double>(correct);
            s[1] = static_cast<double>(gold.size());
          },
          [](std::span<const double> t) { return percent(t[0], t[1]); }};
}

Scorer macro_f1_scorer(std::vector<std::string> classes) {
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.empty()) throw error(errc::config, "macro F1 needs at least one class");
  const std::size_t k = classes.size();
  auto find = [classes](const std::string& l) {
    auto it = std::lower_bound(classes.begin(), classes.end(), l);
    if (it == classes.end() || *it != l) throw error(errc::validation, "label '" + l + "' is not a known class");
    return static_cast<std::size_t>(it - classes.begin());
  };
  // per class: tp, fp, fn
  return {"macro_f1", 3 * k,
          [find, k](const Prediction& gold, const Prediction& pred, std::span<double> s) {
            check_aligned(gold.size(), pred.size(), "label sequence");
            std::fill(s.begin(), s.end(), 0.0);
            for (std::size_t i = 0; i < gold.size(); ++i) {
              const auto g = find(gold[i]);
              const auto p = find(pred[i]);
              if (g == p) {
                s[3 * g] += 1;
              } else {
                s[3 * p + 1] += 1;
                s[3 * g + 2] += 1;
              }
            }
            (void)k;
          },
          [k](std::span<const double> t) {
            double sum = 0.0;
            std::size_t used = 0;
            for (std::size_t c = 0; c < k; ++c) {
              const double tp = t[3 * c], fp = t[3 * c + 1], fn = t[3 * c + 2];
              if (tp + fp + fn == 0.0) continue;
              ++used;
              sum += f1_of(percent(tp, tp + fp), percent(tp, tp + fn));
            }
            return used == 0 ? 0.0 : sum / static_cast<double>(used);
          }};
}

Scorer default_scorer(Task task, std::vector<std::string> classes) {
  if (task == Task::ner) return entity_f1_scorer();
  return macro_f1_scorer(std::move(classes));
}

double score_predictions(const Scorer& scorer, std::span<const Prediction> gold, std::span<const Prediction> pred) {
  check_aligned(gold.size(), pred.size(), "prediction set");
  std::vector<double> totals(scorer.stat_count, 0.0), s(scorer.stat_count);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    scorer.stats(gold[i], pred[i], s);
    for (std::size_t k = 0; k < s.size(); ++k) totals[k] += s[k];
  }
  return scorer.score(totals);
}

PermutationResult permutation_test(std::span<const Prediction> a, std::span<const Prediction> b,
                                   std::span<const Prediction> gold, const Scorer& scorer,
                                   const PermutationOptions& options) {
  check_aligned(a.size(), gold.size(), "system A predictions");
  check_aligned(b.size(), gold.size(), "system B predictions");
  if (!options.groups.empty()) check_aligned(options.groups.size(), gold.size(), "group list");
  if (options.replicates == 0) throw error(errc::config, "permutation test needs at least one replicate");
  const std::size_t S = scorer.stat_count;

  // Swap units in first-seen order.
  std::vector<std::vector<std::size_t>> units;
  if (options.groups.empty()) {
    for (std::size_t i = 0; i < gold.size(); ++i) units.push_back({i});
  } else {
    std::map<std::string, std::size_t> unit_of;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      auto [it, fresh] = unit_of.try_emplace(options.groups[i], units.size());
      if (fresh) units.emplace_back();
      units[it->second].push_back(i);
    }
  }

  std::vector<double> total_a(S, 0.0), total_b(S, 0.0), sa(S), sb(S);
  std::vector<double> diff(units.size() * S, 0.0);  // stats(B) - stats(A) per unit
  for (std::size_t u = 0; u < units.size(); ++u) {
    for (auto i : units[u]) {
      scorer.stats(gold[i], a[i], sa);
      scorer.stats(gold[i], b[i], sb);
      for (std::size_t k = 0; k < S; ++k) {
        total_a[k] += sa[k];
        total_b[k] += sb[k];
        diff[u * S + k] += sb[k] - sa[k];
      }
    }
  }

  PermutationResult res;
  res.replicates = options.replicates;
  res.observed = std::abs(scorer.score(total_a) - scorer.score(total_b));
  const double tolerance = 1e-9 * std::max(1.0, res.observed);

  std::vector<char> extreme(options.replicates, 0);
  parallel_for(options.replicates, options.threads, [&](std::size_t r) {
    Rng rng(derive_seed(options.seed, r));
    std::vector<double> ta = total_a, tb = total_b;
    for (std::size_t u = 0; u < units.size(); ++u) {
      if (!rng.bernoulli(0.5)) continue;
      for (std::size_t k = 0; k < S; ++k) {
        ta[k] += diff[u * S + k];
        tb[k] -= diff[u * S + k];
      }
    }
    extreme[r] = std::abs(scorer.score(ta) - scorer.score(tb)) >= res.observed - tolerance;
  });
  const auto count = static_cast<double>(std::count(extreme.begin(), extreme.end(), 1));
  res.p_value = (1.0 + count) / (1.0 + static_cast<double>(options.replicates));
  return res;
}

std::string_view to_string(Stars s) {
  switch (s) {
    case Stars::none: return "";
    case Stars::one: return "*";
    case Stars::two: return "**";
  }
  return "";
}

SignificanceResult bonferroni(double p, double alpha, std::size_t n) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw error(errc::precondition, "alpha must lie in (0, 1)");
  if (n < 1) throw error(errc::precondition, "at least one hypothesis is required");
  if (!(p >= 0.0 && p <= 1.0)) throw error(errc::domain, "p-value must lie in [0, 1]");
  SignificanceResult r;
  r.p_value = p;
  r.alpha = alpha;
  r.n_hypotheses = n;
  r.threshold = alpha / static_cast<double>(n);
  r.stars = p < r.threshold ? Stars::two : p < alpha ? Stars::one : Stars::none;
  return r;
}

// ---------------------------------------------------------------- report

namespace {

const std::vector<std::string>& standard_configs() {
  static const std::vector<std::string> c = {"baseline", "gaze", "eeg", "gaze+eeg"};
  return c;
}

std::string display_config(const std::string& c) {
  if (c == "eeg") return "EEG";
  if (c == "gaze+eeg") return "gaze+EEG";
  return c;
}

std::string display_task(Task t) {
  switch (t) {
    case Task::ner: return "NER";
    case Task::relclass: return "RelClass";
    case Task::sentiment2: return "Sentiment(2)";
    case Task::sentiment3: return "Sentiment(3)";
  }
  return "";
}

std::size_t config_rank(const std::string& c) {
  const auto& s = standard_configs();
  auto it = std::find(s.begin(), s.end(), c);
  return static_cast<std::size_t>(it - s.begin());
}

ordered_json metrics_json(const Metrics& m) {
  ordered_json j;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["accuracy"] = m.accuracy;
  j["support"] = m.support;
  j["predicted"] = m.predicted;
  j["correct"] = m.correct;
  return j;
}

}  // namespace

MetricsReport make_report(std::span<const RunResult> runs) {
  if (runs.empty()) throw error(errc::precondition, "report needs at least one run");
  MetricsReport rep;
  for (const auto& run : runs) {
    if (run.folds.empty()) throw error(errc::precondition, "run '" + run.config + "' has no folds");
    for (const auto& c : rep.cells)
      if (c.task == run.task && c.config == run.config)
        throw error(errc::config, "duplicate run for " + std::string(to_string(run.task)) + "/" + run.config);
    ReportCell cell;
    cell.task = run.task;
    cell.config = run.config;
    cell.folds = run.folds;
    std::sort(cell.folds.begin(), cell.folds.end(),
              [](const FoldMetrics& x, const FoldMetrics& y) { return x.fold < y.fold; });
    for (std::size_t i = 1; i < cell.folds.size(); ++i)
      if (cell.folds[i].fold == cell.folds[i - 1].fold)
        throw error(errc::config, "run '" + run.config + "' repeats fold " + std::to_string(cell.folds[i].fold));
    for (const auto& f : cell.folds) {
      cell.mean.precision += f.metrics.precision;
      cell.mean.recall += f.metrics.recall;
      cell.mean.f1 += f.metrics.f1;
      cell.mean.accuracy += f.metrics.accuracy;
      cell.mean.support += f.metrics.support;
      cell.mean.predicted += f.metrics.predicted;
      cell.mean.correct += f.metrics.correct;
    }
    const double n = static_cast<double>(cell.folds.size());
    cell.mean.precision /= n;
    cell.mean.recall /= n;
    cell.mean.f1 /= n;
    cell.mean.accuracy /= n;
    cell.significance = run.significance;
    cell.compared_with = run.compared_with;
    rep.cells.push_back(std::move(cell));
  }
  std::sort(rep.cells.begin(), rep.cells.end(), [](const ReportCell& x, const ReportCell& y) {
    if (x.task != y.task) return x.task < y.task;
    const auto rx = config_rank(x.config), ry = config_rank(y.config);
    if (rx != ry) return rx < ry;
    return x.config < y.config;
  });

  std::map<Task, std::map<std::string, std::size_t>> counts;
  for (const auto& c : rep.cells) counts[c.task][c.config] = c.folds.size();
  for (const auto& [task, per_config] : counts) {
    std::set<std::size_t> distinct;
    for (const auto& [config, n] : per_config) distinct.insert(n);
    if (distinct.size() > 1) {
      std::string msg = std::string(to_string(task)) + ": fold counts differ across configs (";
      bool first = true;
      for (const auto& [config, n] : per_config) {
        msg += (first ? "" : ", ") + config + " " + std::to_string(n);
        first = false;
      }
      rep.warnings.push_back(msg + ")");
    }
  }
  return rep;
}

ordered_json report_json(const MetricsReport& report) {
  ordered_json tasks = ordered_json::object();
  for (const auto& c : report.cells) {
    ordered_json cell;
    cell["mean"] = metrics_json(c.mean);
    cell["n_folds"] = c.folds.size();
    ordered_json folds = ordered_json::array();
    for (const auto& f : c.folds) {
      ordered_json fj;
      fj["fold"] = f.fold;
      fj["metrics"] = metrics_json(f.metrics);
      folds.push_back(std::move(fj));
    }
    cell["folds"] = std::move(folds);
    if (c.significance) {
      ordered_json s;
      s["compared_with"] = c.compared_with;
      s["p_value"] = c.significance->p_value;
      s["alpha"] = c.significance->alpha;
      s["n_hypotheses"] = c.significance->n_hypotheses;
      s["threshold"] = c.significance->threshold;
      s["stars"] = std::string(to_string(c.significance->stars));
      cell["significance"] = std::move(s);
    }
    tasks[std::string(to_string(c.task))][c.config] = std::move(cell);
  }
  ordered_json j;
  j["tasks"] = std::move(tasks);
  j["warnings"] = report.warnings;
  return j;
}

std::string render_table(const MetricsReport& report) {
  std::vector<Task> tasks;
  std::vector<std::string> configs = standard_configs();
  for (const auto& c : report.cells) {
    if (std::find(tasks.begin(), tasks.end(), c.task) == tasks.end()) tasks.push_back(c.task);
    if (std::find(configs.begin(), configs.end(), c.config) == configs.end()) configs.push_back(c.config);
  }
  std::sort(tasks.begin(), tasks.end());
  const auto find = [&](Task t, const std::string& config) -> const ReportCell* {
    for (const auto& c : report.cells)
      if (c.task == t && c.config == config) return &c;
    return nullptr;
  };

  constexpr int kLabel = 12;
  constexpr int kCol = 8;
  std::ostringstream out;
  char buf[64];
  const auto pad = [&](const std::string& s, int width) {
    out << s;
    for (int i = static_cast<int>(s.size()); i < width; ++i) out << ' ';
  };
  pad("", kLabel);
  for (Task t : tasks) {
    out << "| ";
    pad(display_task(t), 3 * kCol + 1);
  }
  out << '\n';
  pad("", kLabel);
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    out << "| ";
    for (const char* h : {"P", "R", "F1"}) {
      std::snprintf(buf, sizeof buf, "%6s  ", h);
      pad(buf, kCol);
    }
    out << ' ';
  }
  out << '\n';
  for (const auto& config : configs) {
    pad(display_config(config), kLabel);
    for (Task t : tasks) {
      out << "| ";
      const auto* cell = find(t, config);
      if (!cell) {
        for (int k = 0; k < 3; ++k) {
          std::snprintf(buf, sizeof buf, "%6s  ", "-");
          pad(buf, kCol);
        }
      } else {
        std::snprintf(buf, sizeof buf, "%6.2f  ", cell->mean.precision);
        pad(buf, kCol);
        std::snprintf(buf, sizeof buf, "%6.2f  ", cell->mean.recall);
        pad(buf, kCol);
        const std::string stars = cell->significance ? std::string(to_string(cell->significance->stars)) : "";
        std::snprintf(buf, sizeof buf, "%6.2f%-2s", cell->mean.f1, stars.c_str());
        pad(buf, kCol);
      }
      out << ' ';
    }
    out << '\n';
  }
  for (const auto& w : report.warnings) out << "warning: " << w << '\n';
  return out.str();
}

}  // namespace cogsig
