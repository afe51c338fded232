#include <cmath>
#include <numeric>
#include <sstream>

#include "cogsig/datasets.hpp"
#include "cogsig/models.hpp"
#include "cogsig/synth.hpp"
#include "doctest.h"
#include "gradcheck.hpp"
#include "support.hpp"

using namespace cogsig;
using testsupport::error_code_of;

namespace {

Dataset toy_sentiment() {
  Corpus c;
  c.task = Task::sentiment2;
  c.sentences = {{"s1", {"good", "great"}, {"pos"}},
                 {"s2", {"fine", "nice"}, {"pos"}},
                 {"s3", {"bad", "awful"}, {"neg"}},
                 {"s4", {"poor", "sad"}, {"neg"}}};
  return assemble(c, {});
}

std::vector<std::size_t> iota(std::size_t n, std::size_t from = 0) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), from);
  return v;
}

TokenFeatures zeros(const Corpus& c, std::size_t dims) {
  TokenFeatures f;
  for (std::size_t d = 0; d < dims; ++d) f.dims.push_back("z" + std::to_string(d));
  for (const auto& s : c.sentences) f.sentences[s.id].assign(s.tokens.size(), FeatureRow(dims, 0.0));
  return f;
}

SynthData synth(Task task, std::size_t n, std::uint64_t seed) {
  SynthSpec spec;
  spec.task = task;
  spec.sentences = n;
  spec.with_eeg = false;
  return generate_synthetic(spec, seed);
}

}  // namespace

TEST_CASE("illegal I- tags become B-") {
  std::vector<std::string> tags = {"I-PER", "I-PER", "O", "I-LOC", "B-PER", "I-LOC"};
  repair_bio(tags);
  CHECK(tags == std::vector<std::string>{"B-PER", "I-PER", "O", "B-LOC", "B-PER", "B-LOC"});
}

TEST_CASE("logistic regression fits a separable toy set") {
  auto ds = toy_sentiment();
  auto all = iota(4);
  auto m = train_logistic(ds, all, {});
  for (auto i : all) {
    CHECK(m.predict(ds.instances[i]) == ds.instances[i].labels.front());
    auto p = m.predict_proba(ds.instances[i]);
    CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) < 1e-9);
  }
  REQUIRE(m.loss_history.size() == 200);
  CHECK(m.loss_history.back() < m.loss_history.front());
  for (std::size_t e = 1; e < m.loss_history.size(); ++e) CHECK(m.loss_history[e] <= m.loss_history[e - 1] + 1e-12);
}

TEST_CASE("logistic regression rejects empty training sets and token tasks") {
  auto ds = toy_sentiment();
  CHECK(error_code_of([&] { train_logistic(ds, {}, {}); }) == errc::precondition);
  auto ner = assemble(testsupport::ner_corpus({{"a"}}), {});
  std::vector<std::size_t> one = {0};
  CHECK(error_code_of([&] { train_logistic(ner, one, {}); }) == errc::unsupported_task);
}

TEST_CASE("duplicating the training set keeps the decision function") {
  auto d = synth(Task::sentiment2, 80, 21);
  auto ds = assemble(d.corpus, {});
  auto train = iota(60);
  auto twice = train;
  twice.insert(twice.end(), train.begin(), train.end());
  auto a = train_logistic(ds, train, {});
  auto b = train_logistic(ds, twice, {});
  auto held = iota(20, 60);
  CHECK(predict_logistic(a, ds, held) == predict_logistic(b, ds, held));
}

TEST_CASE("logistic padding with zero dims leaves predictions unchanged") {
  auto d = synth(Task::sentiment2, 60, 4);
  auto base = assemble(d.corpus, {});
  auto z = zeros(d.corpus, 3);
  FeatureBlock blocks[] = {{"gaze", &z}};
  auto padded = assemble(d.corpus, blocks);
  auto train = iota(40);
  auto held = iota(20, 40);
  CHECK(predict_logistic(train_logistic(base, train, {}), base, held) ==
        predict_logistic(train_logistic(padded, train, {}), padded, held));
}

TEST_CASE("training is reproducible and models round-trip") {
  auto d = synth(Task::sentiment2, 30, 2);
  auto ds = assemble(d.corpus, {});
  auto train = iota(30);
  LogisticConfig cfg;
  cfg.batch_size = 4;
  cfg.epochs = 20;
  std::ostringstream a, b;
  write_model(a, train_logistic(ds, train, cfg));
  write_model(b, train_logistic(ds, train, cfg));
  CHECK(a.str() == b.str());
  std::istringstream in(a.str());
  std::ostringstream again;
  write_model(again, parse_logistic_model(in));
  CHECK(again.str() == a.str());

  auto n = synth(Task::ner, 20, 2);
  auto nds = assemble(n.corpus, {});
  auto ntrain = iota(20);
  std::ostringstream t1, t2;
  write_model(t1, train_tagger(nds, ntrain, {}));
  write_model(t2, train_tagger(nds, ntrain, {}));
  CHECK(t1.str() == t2.str());
  std::istringstream tin(t1.str());
  auto parsed = parse_tagger_model(tin);
  CHECK(predict_tagger(parsed, nds, ntrain) == predict_tagger(train_tagger(nds, ntrain, {}), nds, ntrain));
}

TEST_CASE("tagger memorizes a single sentence") {
  auto c = testsupport::ner_corpus({{"Ann", "Lee", "met", "Bob", "in", "Rome", "today"}});
  c.sentences[0].labels = {"B-PER", "I-PER", "O", "B-PER", "O", "B-LOC", "O"};
  auto ds = assemble(c, {});
  std::vector<std::size_t> one = {0};
  auto m = train_tagger(ds, one, {});
  CHECK(m.tag(ds.instances[0]) == c.sentences[0].labels);
}

TEST_CASE("all-O training data predicts O") {
  auto d = synth(Task::ner, 10, 3);
  for (auto& s : d.corpus.sentences) s.labels.assign(s.tokens.size(), "O");
  auto ds = assemble(d.corpus, {});
  auto m = train_tagger(ds, iota(5), {});
  for (const auto& p : predict_tagger(m, ds, iota(5, 5)))
    for (const auto& t : p) CHECK(t == "O");
}

TEST_CASE("zero cognitive bins give the baseline tagger") {
  auto d = synth(Task::ner, 40, 6);
  auto base = assemble(d.corpus, {});
  auto z = zeros(d.corpus, 4);
  FeatureBlock blocks[] = {{"gaze", &z}};
  auto padded = assemble(d.corpus, blocks);
  auto train = iota(30);
  auto held = iota(10, 30);
  CHECK(predict_tagger(train_tagger(base, train, {}), base, held) ==
        predict_tagger(train_tagger(padded, train, {}), padded, held));
}

TEST_CASE("prediction contracts") {
  auto d = synth(Task::ner, 10, 1);
  auto base = assemble(d.corpus, {});
  auto z = zeros(d.corpus, 2);
  FeatureBlock blocks[] = {{"gaze", &z}};
  auto padded = assemble(d.corpus, blocks);
  auto m = train_tagger(base, iota(10), {});
  CHECK(predict_tagger(m, base, {}).empty());
  CHECK(predict_tagger(m, base, iota(10)) == predict_tagger(m, base, iota(10)));
  CHECK(error_code_of([&] { predict_tagger(m, padded, iota(10)); }) == errc::dimension_mismatch);
  CHECK(error_code_of([&] { train_tagger(base, {}, {}); }) == errc::precondition);
  auto senti = toy_sentiment();
  CHECK(error_code_of([&] { train_tagger(senti, iota(4), {}); }) == errc::unsupported_task);
}

TEST_CASE("trunk parameter count") {
  TrunkConfig cfg;
  cfg.embedding_dim = 4;
  cfg.hidden_dim = 5;
  TrunkNet net(7, 3, {{"main", 3}, {"aux", 10}}, cfg, 1);
  CHECK(net.parameter_count() == 7 * 4 + (4 + 3) * 5 + 5 + (5 * 3 + 3) + (5 * 10 + 10));
  std::size_t total = 0;
  for (std::size_t g = 0; g < net.group_count(); ++g) total += net.group(g).size();
  CHECK(total == net.parameter_count());
}

TEST_CASE("untrained head is uniform and inactive heads get no gradient") {
  TrunkConfig cfg;
  cfg.embedding_dim = 3;
  cfg.hidden_dim = 4;
  TrunkNet net(5, 0, {{"main", 4}, {"aux", 6}}, cfg, 9);
  TokenBatch b{{1, 2, 3}, {}, {0, 3, 1}};
  TrunkGradients g;
  CHECK(net.forward_backward(b, 0, &g) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  for (double v : g.dense(net, 5)) CHECK(v == 0.0);
  for (double v : g.dense(net, 6)) CHECK(v == 0.0);
}

TEST_CASE("trunk gradients match central differences") {
  TrunkConfig cfg;
  cfg.embedding_dim = 3;
  cfg.hidden_dim = 4;
  TrunkNet net(6, 2, {{"main", 3}, {"aux", 2}}, cfg, 5);
  testsupport::randomize(net, 17);
  TokenBatch b{{1, 4, 1}, {0.2, 0.9, 0.0, 0.5, 1.0, 0.3}, {2, 0, 1}};
  for (std::size_t head = 0; head < 2; ++head) {
    TokenBatch hb = b;
    if (head == 1) hb.labels = {1, 0, 1};
    auto r = testsupport::gradient_check(net, hb, head);
    CHECK(r.checked == net.parameter_count());
    CHECK_MESSAGE(r.worst < 1e-4, r.worst_group);
  }
}

TEST_CASE("trunk rejects malformed batches") {
  TrunkConfig cfg;
  cfg.embedding_dim = 2;
  cfg.hidden_dim = 2;
  TrunkNet net(3, 1, {{"main", 2}}, cfg, 1);
  CHECK(error_code_of([&] { net.forward_backward({{0}, {}, {0}}, 0, nullptr); }) == errc::dimension_mismatch);
  CHECK(error_code_of([&] { net.forward_backward({{5}, {0.0}, {0}}, 0, nullptr); }) == errc::dimension_mismatch);
  CHECK(error_code_of([&] { net.forward_backward({{0}, {0.0}, {2}}, 0, nullptr); }) == errc::dimension_mismatch);
  CHECK(error_code_of([] { TrunkNet(3, 0, {{"main", 1}}, TrunkConfig{}, 1); }) == errc::config);
}

TEST_CASE("trunk padding with zero inputs follows the baseline trajectory") {
  TrunkConfig cfg;
  cfg.embedding_dim = 4;
  cfg.hidden_dim = 3;
  TrunkNet base(8, 0, {{"main", 3}}, cfg, 3);
  TrunkNet padded(8, 2, {{"main", 3}}, cfg, 3);
  Rng rng(1);
  for (int step = 0; step < 50; ++step) {
    TokenBatch b;
    for (int i = 0; i < 4; ++i) {
      b.tokens.push_back(rng.index(8));
      b.labels.push_back(rng.index(3));
    }
    TokenBatch pb = b;
    pb.cognitive.assign(8, 0.0);
    TrunkGradients g1, g2;
    CHECK(base.forward_backward(b, 0, &g1) == padded.forward_backward(pb, 0, &g2));
    base.apply(g1, 0.3);
    padded.apply(g2, 0.3);
  }
  CHECK(base.group(0) == padded.group(0));
  CHECK(base.group(3) == padded.group(3));
  TokenBatch probe{{0, 1, 2, 3, 4, 5, 6, 7}, {}, {}};
  TokenBatch pprobe = probe;
  pprobe.cognitive.assign(16, 0.0);
  CHECK(base.predict(probe, 0) == padded.predict(pprobe, 0));
}
