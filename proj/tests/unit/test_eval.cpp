#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <tuple>

#include "cogsig/eval.hpp"
#include "cogsig/rng.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cogsig;
using testsupport::error_code_of;

namespace {

using Spans = std::set<std::tuple<std::size_t, std::size_t, std::string>>;

// Every [b, e) is an entity iff tag b is B-X (or an I-X not continuing X),
// tags b+1..e-1 are I-X and tag e does not continue it.
Spans enumerate_spans(const std::vector<std::string>& tags) {
  Spans out;
  const auto type_of = [](const std::string& t) { return t.size() > 2 ? t.substr(2) : std::string(); };
  for (std::size_t b = 0; b < tags.size(); ++b) {
    if (tags[b] == "O") continue;
    const auto type = type_of(tags[b]);
    const bool starts = tags[b][0] == 'B' || b == 0 || tags[b - 1] == "O" || type_of(tags[b - 1]) != type;
    if (!starts) continue;
    for (std::size_t e = b + 1; e <= tags.size(); ++e) {
      bool inside = true;
      for (std::size_t k = b + 1; k < e; ++k) inside = inside && tags[k] == "I-" + type;
      const bool closed = e == tags.size() || tags[e] != "I-" + type;
      if (inside && closed) out.insert({b, e, type});
    }
  }
  return out;
}

double reference_f1(const std::vector<Prediction>& gold, const std::vector<Prediction>& pred) {
  double correct = 0, predicted = 0, actual = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    auto g = enumerate_spans(gold[i]);
    auto p = enumerate_spans(pred[i]);
    predicted += static_cast<double>(p.size());
    actual += static_cast<double>(g.size());
    for (const auto& s : p) correct += g.count(s);
  }
  const double P = predicted > 0 ? 100 * correct / predicted : 0;
  const double R = actual > 0 ? 100 * correct / actual : 0;
  return P + R > 0 ? 2 * P * R / (P + R) : 0;
}

std::vector<std::string> random_tags(Rng& rng, std::size_t n) {
  static const char* tags[] = {"O", "O", "B-PER", "I-PER", "B-LOC", "I-LOC"};
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(tags[rng.index(6)]);
  return out;
}

std::vector<Prediction> singletons(const std::vector<std::string>& labels) {
  std::vector<Prediction> out;
  for (const auto& l : labels) out.push_back({l});
  return out;
}

// Replicate r flips unit u iff the r-th stream's u-th draw is below 1/2;
// each replicate is re-scored from scratch.
double naive_p(const std::vector<Prediction>& a, const std::vector<Prediction>& b,
               const std::vector<Prediction>& gold, const Scorer& scorer, std::size_t R, std::uint64_t seed) {
  const double observed = std::abs(score_predictions(scorer, gold, a) - score_predictions(scorer, gold, b));
  std::size_t hits = 0;
  for (std::size_t r = 0; r < R; ++r) {
    Rng rng(derive_seed(seed, r));
    auto x = a, y = b;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (rng.uniform() < 0.5) std::swap(x[i], y[i]);
    const double d = std::abs(score_predictions(scorer, gold, x) - score_predictions(scorer, gold, y));
    hits += d >= observed - 1e-9 * std::max(1.0, observed);
  }
  return (1.0 + static_cast<double>(hits)) / (1.0 + static_cast<double>(R));
}

Metrics with_f1(double f1) {
  Metrics m;
  m.f1 = f1;
  m.precision = f1;
  m.recall = f1;
  return m;
}

}  // namespace

TEST_CASE("entity scoring examples") {
  std::vector<Prediction> gold = {{"B-PER", "O"}};
  CHECK(entity_prf1(gold, gold).f1 == 100.0);
  CHECK(entity_prf1(gold, gold).precision == 100.0);
  std::vector<Prediction> none = {{"O", "O"}};
  auto m = entity_prf1(gold, none);
  CHECK(m.precision == 0.0);
  CHECK(m.recall == 0.0);
  CHECK(m.f1 == 0.0);
  std::vector<Prediction> loc = {{"B-LOC", "I-LOC"}};
  std::vector<Prediction> partial = {{"B-LOC", "O"}};
  CHECK(entity_prf1(loc, partial).f1 == 0.0);
  CHECK(reference_f1(loc, partial) == 0.0);
  std::vector<Prediction> short_pred = {{"O"}};
  CHECK(error_code_of([&] { entity_prf1(gold, short_pred); }) == errc::dimension_mismatch);
}

TEST_CASE("span extraction") {
  std::vector<std::string> tags = {"B-PER", "I-PER", "I-LOC", "O", "I-ORG", "B-ORG", "I-ORG"};
  auto spans = extract_spans(tags);
  std::vector<EntitySpan> expected = {{0, 2, "PER"}, {2, 3, "LOC"}, {4, 5, "ORG"}, {5, 7, "ORG"}};
  CHECK(spans == expected);
}

TEST_CASE("entity F1 agrees with span enumeration on random tag sequences") {
  Rng rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Prediction> gold, pred;
    const auto sentences = 1 + rng.index(4);
    for (std::size_t s = 0; s < sentences; ++s) {
      const auto n = 1 + rng.index(8);
      gold.push_back(random_tags(rng, n));
      pred.push_back(random_tags(rng, n));
    }
    CHECK(entity_prf1(gold, pred).f1 == doctest::Approx(reference_f1(gold, pred)).epsilon(1e-12));
  }
}

TEST_CASE("entity F1 is symmetric under relabeling types") {
  Rng rng(3);
  const auto swap_types = [](Prediction p) {
    for (auto& t : p) {
      if (t.size() > 2) t = t.substr(0, 2) + (t.substr(2) == "PER" ? "LOC" : "PER");
    }
    return p;
  };
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Prediction> gold = {random_tags(rng, 10)}, pred = {random_tags(rng, 10)};
    std::vector<Prediction> g2 = {swap_types(gold[0])}, p2 = {swap_types(pred[0])};
    CHECK(entity_prf1(gold, pred) == entity_prf1(g2, p2));
  }
}

TEST_CASE("accuracy examples") {
  std::vector<std::string> g = {"a", "b", "c", "d"};
  CHECK(accuracy(g, g) == 100.0);
  std::vector<std::string> disjoint = {"x", "x", "x", "x"};
  CHECK(accuracy(g, disjoint) == 0.0);
  std::vector<std::string> three = {"a", "b", "c", "x"};
  CHECK(accuracy(g, three) == 75.0);
  CHECK(error_code_of([] { accuracy({}, {}); }) == errc::precondition);
  CHECK(error_code_of([&] { accuracy(g, std::vector<std::string>{"a"}); }) == errc::dimension_mismatch);
}

TEST_CASE("macro classification metrics") {
  std::vector<std::string> gold = {"pos", "pos", "neg", "neg"};
  std::vector<std::string> pred = {"pos", "neg", "neg", "neg"};
  auto m = classification_metrics(gold, pred);
  CHECK(m.accuracy == 75.0);
  // pos: P 100 R 50, neg: P 66.7 R 100
  CHECK(m.precision == doctest::Approx((100.0 + 200.0 / 3.0) / 2.0));
  CHECK(m.recall == doctest::Approx(75.0));
  CHECK(m.f1 == doctest::Approx((200.0 / 3.0 + 80.0) / 2.0));
  auto scorer = macro_f1_scorer({"neg", "pos"});
  CHECK(score_predictions(scorer, singletons(gold), singletons(pred)) == doctest::Approx(m.f1));
}

TEST_CASE("identical systems give p = 1") {
  Rng rng(5);
  std::vector<Prediction> gold, a;
  for (int i = 0; i < 30; ++i) {
    gold.push_back(random_tags(rng, 6));
    a.push_back(random_tags(rng, 6));
  }
  PermutationOptions opts;
  opts.replicates = 500;
  auto r = permutation_test(a, a, gold, entity_f1_scorer(), opts);
  CHECK(r.observed == 0.0);
  CHECK(r.p_value == 1.0);
}

TEST_CASE("permutation test matches a from-scratch reference") {
  Rng rng(8);
  std::vector<std::string> classes = {"neg", "neu", "pos"};
  std::vector<std::string> gold, a, b;
  for (int i = 0; i < 40; ++i) {
    gold.push_back(classes[rng.index(3)]);
    a.push_back(rng.bernoulli(0.7) ? gold.back() : classes[rng.index(3)]);
    b.push_back(rng.bernoulli(0.5) ? gold.back() : classes[rng.index(3)]);
  }
  const auto G = singletons(gold), A = singletons(a), B = singletons(b);
  for (const auto& scorer : {accuracy_scorer(), macro_f1_scorer(classes)}) {
    PermutationOptions opts;
    opts.replicates = 300;
    opts.seed = 77;
    auto r = permutation_test(A, B, G, scorer, opts);
    CHECK(r.p_value == doctest::Approx(naive_p(A, B, G, scorer, 300, 77)).epsilon(1e-15));
    CHECK(r.p_value >= 1.0 / 301.0);
    CHECK(r.p_value <= 1.0);
  }
}

TEST_CASE("permutation test is deterministic and schedule independent") {
  Rng rng(9);
  std::vector<Prediction> gold, a, b;
  for (int i = 0; i < 50; ++i) {
    gold.push_back(random_tags(rng, 5));
    a.push_back(rng.bernoulli(0.6) ? gold.back() : random_tags(rng, 5));
    b.push_back(random_tags(rng, 5));
  }
  PermutationOptions opts;
  opts.replicates = 10000;
  opts.seed = 4;
  auto r1 = permutation_test(a, b, gold, entity_f1_scorer(), opts);
  auto r2 = permutation_test(a, b, gold, entity_f1_scorer(), opts);
  opts.threads = 4;
  auto r3 = permutation_test(a, b, gold, entity_f1_scorer(), opts);
  CHECK(r1.p_value == r2.p_value);
  CHECK(r1.p_value == r3.p_value);
  CHECK(r1.observed > 0.0);
}

TEST_CASE("grouped instances swap together") {
  // Two instances per group with opposite errors: swapping a whole group
  // changes nothing, so every replicate reproduces the observed gap.
  std::vector<Prediction> gold = singletons({"x", "x", "x", "x"});
  std::vector<Prediction> a = singletons({"x", "y", "x", "y"});
  std::vector<Prediction> b = singletons({"y", "x", "y", "x"});
  PermutationOptions opts;
  opts.replicates = 200;
  opts.groups = {"g1", "g1", "g2", "g2"};
  auto r = permutation_test(a, b, gold, accuracy_scorer(), opts);
  CHECK(r.observed == 0.0);
  CHECK(r.p_value == 1.0);
  opts.groups = {"g1"};
  CHECK(error_code_of([&] { permutation_test(a, b, gold, accuracy_scorer(), opts); }) == errc::dimension_mismatch);
  opts.groups.clear();
  std::vector<Prediction> shorter(a.begin(), a.end() - 1);
  CHECK(error_code_of([&] { permutation_test(shorter, b, gold, accuracy_scorer(), opts); }) ==
        errc::dimension_mismatch);
}

TEST_CASE("Bonferroni correction") {
  auto s = bonferroni(0.0005, 0.01, 12);
  CHECK(s.threshold == doctest::Approx(0.01 / 12).epsilon(1e-15));
  // rounds to the 0.0008 cut at four decimals
  CHECK(std::round(s.threshold * 1e4) / 1e4 == doctest::Approx(0.0008).epsilon(1e-12));
  CHECK(s.stars == Stars::two);
  CHECK(bonferroni(0.005, 0.01, 12).stars == Stars::one);
  CHECK(bonferroni(0.02, 0.01, 12).stars == Stars::none);
  CHECK(bonferroni(0.01, 0.01, 12).stars == Stars::none);
  CHECK(to_string(Stars::two) == "**");
  CHECK(error_code_of([] { bonferroni(0.1, 0.0, 2); }) == errc::precondition);
  CHECK(error_code_of([] { bonferroni(0.1, 0.05, 0); }) == errc::precondition);
}

TEST_CASE("report means folds per cell") {
  RunResult one{Task::ner, "baseline", {{0, with_f1(80.0)}}, std::nullopt, ""};
  std::vector<RunResult> runs = {one};
  auto rep = make_report(runs);
  REQUIRE(rep.cells.size() == 1);
  CHECK(rep.cells[0].mean == with_f1(80.0));

  RunResult two{Task::ner, "gaze", {{1, with_f1(90.0)}, {0, with_f1(80.0)}}, bonferroni(0.0001, 0.01, 12),
                "baseline"};
  RunResult swapped = two;
  std::swap(swapped.folds[0], swapped.folds[1]);
  std::vector<RunResult> a = {two}, b = {swapped};
  CHECK(make_report(a).cells[0].mean.f1 == 85.0);
  CHECK(report_json(make_report(a)) == report_json(make_report(b)));
}

TEST_CASE("report warns on inconsistent fold counts and renders the four rows") {
  std::vector<RunResult> runs = {
      {Task::sentiment2, "eeg", {{0, with_f1(70.0)}}, std::nullopt, ""},
      {Task::ner, "gaze", {{0, with_f1(82.0)}, {1, with_f1(84.0)}}, bonferroni(0.0004, 0.01, 12), "baseline"},
      {Task::ner, "baseline", {{0, with_f1(80.0)}}, std::nullopt, ""},
  };
  auto rep = make_report(runs);
  CHECK(rep.warnings.size() == 1);
  auto table = render_table(rep);
  const auto row = [&](const std::string& label) { return table.find("\n" + label + " "); };
  REQUIRE(row("baseline") != std::string::npos);
  CHECK(row("baseline") < row("gaze"));
  CHECK(row("gaze") < row("EEG"));
  CHECK(row("EEG") < row("gaze+EEG"));
  CHECK(table.find("83.00**") != std::string::npos);
  CHECK(table.find("NER") < table.find("Sentiment(2)"));

  auto j = report_json(rep);
  CHECK(j["tasks"]["ner"]["gaze"]["n_folds"] == 2);
  CHECK(j["tasks"]["ner"]["gaze"]["significance"]["stars"] == "**");
  CHECK(j["tasks"]["ner"]["gaze"]["folds"][1]["metrics"]["f1"] == 84.0);

  std::vector<RunResult> dup = {runs[2], runs[2]};
  CHECK(error_code_of([&] { make_report(dup); }) == errc::config);
  CHECK(error_code_of([] { make_report({}); }) == errc::precondition);
}
