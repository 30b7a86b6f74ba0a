#include <cmath>
#include <set>

#include "crf_oracle.hpp"
#include "doctest.h"
#include "dsner/crf.hpp"
#include "dsner/rng.hpp"
#include "testutil.hpp"

using namespace dsner;
using testutil::enumerate;
using testutil::random_crf;
using testutil::random_input;

namespace {

double rel_err(double a, double b) { return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)}); }

LabeledSentence sent(std::vector<std::string> toks, std::vector<std::string> labels, const std::string& d = "news") {
  return {std::move(toks), std::move(labels), DomainId(d)};
}

FeatureTemplateSet unigram_only() {
  FeatureTemplateSet t;
  t.bigrams = t.shape = t.affixes = t.numpunct = false;
  return t;
}

}  // namespace

TEST_CASE("label set is closed under the BILOU grammar") {
  LabelSet ls({"PER", "ORG", "PER"});
  CHECK(ls.size() == 9);
  CHECK(ls.label(0) == "O");
  CHECK(ls.label(1) == "B-ORG");
  CHECK(ls.entity_types() == std::vector<std::string>{"ORG", "PER"});
  CHECK(ls.allowed(ls.id("B-PER"), ls.id("I-PER")));
  CHECK_FALSE(ls.allowed(ls.id("B-PER"), ls.id("L-ORG")));
  CHECK_FALSE(ls.allowed(ls.id("O"), ls.id("I-PER")));
  CHECK(ls.allowed(ls.id("U-PER"), ls.id("B-ORG")));
  CHECK_FALSE(ls.allowed_start(ls.id("L-PER")));
  CHECK_FALSE(ls.allowed_end(ls.id("B-PER")));
  CHECK_THROWS_AS(ls.id("U-LOC"), Error);
}

TEST_CASE("zero weights: logZ = T ln L and confidence = L^-T") {
  Rng rng(1);
  for (std::size_t L : {3u, 5u}) {
    for (std::size_t T = 1; T <= 6; ++T) {
      auto m = random_crf(rng, L, 4);
      std::fill(m.state_weights.begin(), m.state_weights.end(), 0.0);
      std::fill(m.transitions.begin(), m.transitions.end(), 0.0);
      auto in = random_input(rng, T, 4);
      CHECK(std::abs(log_partition(m, in) - static_cast<double>(T) * std::log(static_cast<double>(L))) < 1e-12);
      const double expect = 1.0 / std::pow(static_cast<double>(L), static_cast<double>(T));
      CHECK(sequence_confidence(m, in) == expect);
      CHECK(viterbi(m, in).label_ids == std::vector<std::size_t>(T, 0));  // ties go to the lowest id
    }
  }
}

TEST_CASE("inference matches exhaustive enumeration") {
  Rng rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    auto m = random_crf(rng, 3, 5, 1.5);
    const std::size_t T = 1 + rng.below(6);
    auto in = random_input(rng, T, 5);
    const auto e = enumerate(m, in);
    CHECK(std::abs(log_partition(m, in) - e.log_z) < 1e-8);
    const auto p = viterbi(m, in);
    CHECK(p.label_ids == e.best);
    CHECK(p.log_score == doctest::Approx(e.best_score).epsilon(1e-12));
    CHECK(std::abs(p.confidence - std::exp(e.best_score - e.log_z)) < 1e-10);
    CHECK(p.confidence > 0);
    CHECK(p.confidence <= 1);

    double total = 0;
    testutil::for_each_path(3, T, [&](const std::vector<std::size_t>& path) {
      const double pr = std::exp(path_score(m, in, path) - e.log_z);
      total += pr;
      CHECK(pr <= p.confidence + 1e-12);
    });
    CHECK(std::abs(total - 1.0) < 1e-9);
  }
}

TEST_CASE("single token: argmax of state scores") {
  Rng rng(5);
  auto m = random_crf(rng, 5, 3);
  auto in = random_input(rng, 1, 3);
  auto s = state_scores(m, in);
  std::size_t best = 0;
  for (std::size_t y = 1; y < 5; ++y)
    if (s(0, y) > s(0, best)) best = y;
  CHECK(viterbi(m, in).label_ids[0] == best);
}

TEST_CASE("marginals are normalized and consistent") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    auto m = random_crf(rng, 4, 4, 2.0);
    const std::size_t T = 1 + rng.below(5);
    auto in = random_input(rng, T, 4);
    auto mg = forward_backward(m, in);
    for (std::size_t t = 0; t < T; ++t) {
      double s = 0;
      for (std::size_t y = 0; y < 4; ++y) s += mg.unary(t, y);
      CHECK(std::abs(s - 1.0) < 1e-9);
    }
    double pair_total = 0;
    for (double v : mg.pair.data()) pair_total += v;
    CHECK(std::abs(pair_total - static_cast<double>(T - 1)) < 1e-9);
    // unary marginal at t=0 by enumeration
    const auto e = enumerate(m, in);
    std::vector<double> u0(4, 0.0);
    testutil::for_each_path(4, T, [&](const std::vector<std::size_t>& p) {
      u0[p[0]] += std::exp(path_score(m, in, p) - e.log_z);
    });
    for (std::size_t y = 0; y < 4; ++y) CHECK(std::abs(u0[y] - mg.unary(0, y)) < 1e-9);
  }
}

TEST_CASE("gradient matches central differences") {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    auto m = random_crf(rng, 3, 5, 0.8);
    m.l2 = rng.uniform(0, 0.5);
    std::vector<CompiledExample> data;
    for (int i = 0; i < 3; ++i) {
      CompiledExample ex;
      const std::size_t T = 1 + rng.below(4);
      ex.input = random_input(rng, T, 5);
      for (std::size_t t = 0; t < T; ++t) ex.gold.push_back(rng.below(3));
      data.push_back(ex);
    }
    std::vector<double> g;
    crf_objective(m, data, g);
    auto w = pack_weights(m);
    const double h = 1e-6;
    for (std::size_t j = 0; j < w.size(); ++j) {
      auto mp = m, mm = m;
      auto wp = w, wm = w;
      wp[j] += h;
      wm[j] -= h;
      unpack_weights(mp, wp);
      unpack_weights(mm, wm);
      std::vector<double> scratch;
      const double fd = (crf_objective(mp, data, scratch) - crf_objective(mm, data, scratch)) / (2 * h);
      if (std::abs(fd) < 1e-7 && std::abs(g[j]) < 1e-7) continue;
      CHECK(rel_err(fd, g[j]) < 1e-4);
    }
  }
}

TEST_CASE("objective is thread-count independent") {
  Rng rng(3);
  auto m = random_crf(rng, 5, 5);
  std::vector<CompiledExample> data;
  for (int i = 0; i < 30; ++i) {
    CompiledExample ex;
    ex.input = random_input(rng, 4, 5);
    ex.gold = {0, 1, 2, 3};
    data.push_back(ex);
  }
  std::vector<double> g1, g4;
  const double v1 = crf_objective(m, data, g1, 1), v4 = crf_objective(m, data, g4, 4);
  CHECK(v1 == v4);
  CHECK(g1 == g4);
}

TEST_CASE("empty sentence is an error") {
  Rng rng(1);
  auto m = random_crf(rng, 3, 2);
  CrfInput empty;
  CHECK_THROWS_AS(log_partition(m, empty), Error);
  CHECK_THROWS_AS(viterbi(m, empty), Error);
}

TEST_CASE("constrained decoding yields valid BILOU") {
  Rng rng(77);
  LabelSet ls({"PER", "ORG"});
  for (int trial = 0; trial < 30; ++trial) {
    CrfModel m;
    m.labels = ls;
    m.feature_keys = {"a", "b", "c"};
    m.rebuild_index();
    m.state_weights.resize(3 * ls.size());
    m.transitions.resize(ls.size() * ls.size());
    for (auto& w : m.state_weights) w = rng.uniform(-3, 3);
    for (auto& w : m.transitions) w = rng.uniform(-3, 3);
    auto in = random_input(rng, 1 + rng.below(7), 3);
    auto p = viterbi(m, in, true);
    CHECK(is_valid_bilou(p.labels));
  }
}

TEST_CASE("separable toy data is fit exactly") {
  std::vector<LabeledSentence> data{
      sent({"alice", "met", "bob"}, {"U-PER", "O", "U-PER"}),
      sent({"acme", "hired", "alice"}, {"U-ORG", "O", "U-PER"}),
      sent({"bob", "left", "acme", "corp"}, {"U-PER", "O", "B-ORG", "L-ORG"}),
      sent({"corp", "met", "bob"}, {"U-ORG", "O", "U-PER"}),
  };
  CrfTrainOptions o;
  o.l2 = 0.01;
  CrfTrainStats st;
  auto m = train_crf(data, unigram_only(), nullptr, o, &st);
  CHECK(m.labels.entity_types() == std::vector<std::string>{"ORG", "PER"});
  for (const auto& s : data) CHECK(viterbi(m, compile(m, s.tokens, s.domain, nullptr)).labels == s.labels);
  auto rep = evaluate(m, data, nullptr);
  CHECK(rep.micro.f1 == 1.0);
  for (const auto& [t, r] : rep.per_type) CHECK(r.f1 == 1.0);
  // optimizer contract: never worse than the zero-weight start, history non-increasing
  CHECK(st.objective <= st.initial_objective);
  for (std::size_t i = 1; i < st.history.size(); ++i) CHECK(st.history[i] <= st.history[i - 1]);
}

TEST_CASE("huge l2 shrinks to uniform predictions") {
  std::vector<LabeledSentence> data{sent({"alice", "met", "bob"}, {"U-PER", "O", "U-PER"})};
  CrfTrainOptions o;
  o.l2 = 1e6;
  auto m = train_crf(data, unigram_only(), nullptr, o);
  for (double w : pack_weights(m)) CHECK(std::abs(w) < 1e-5);
  auto in = compile(m, {"x", "y"}, DomainId("news"), nullptr);
  const double L = static_cast<double>(m.num_labels());
  CHECK(sequence_confidence(m, in) == doctest::Approx(1.0 / (L * L)).epsilon(1e-4));
}

TEST_CASE("training errors") {
  CHECK_THROWS_AS(train_crf({}, unigram_only(), nullptr, {}), Error);
  std::vector<LabeledSentence> bad{sent({"a", "b"}, {"O"})};
  CHECK_THROWS_AS(train_crf(bad, unigram_only(), nullptr, {}), Error);
  std::vector<LabeledSentence> data{sent({"a"}, {"U-PER"})};
  CrfTrainOptions o;
  o.entity_types = std::vector<std::string>{"ORG"};
  CHECK_THROWS_AS(train_crf(data, unigram_only(), nullptr, o), Error);
}

TEST_CASE("unseen features are ignored") {
  std::vector<LabeledSentence> data{sent({"alice"}, {"U-PER"}), sent({"the"}, {"O"})};
  auto m = train_crf(data, unigram_only(), nullptr, {});
  auto in = compile(m, {"zzz"}, DomainId("news"), nullptr);
  REQUIRE(in.tokens.size() == 1);
  for (auto [f, v] : in.tokens[0]) CHECK(m.feature_keys[static_cast<std::size_t>(f)].find("zzz") == std::string::npos);
}

TEST_CASE("entity scoring fixtures") {
  std::vector<std::vector<std::string>> gold{{"B-ORG", "L-ORG", "O", "U-PER"}};
  auto perfect = score_entities(gold, gold);
  CHECK(perfect.micro.precision == 1.0);
  CHECK(perfect.micro.recall == 1.0);
  CHECK(perfect.micro.f1 == 1.0);
  CHECK(perfect.per_type.at("ORG").f1 == 1.0);

  // one exact match, one spurious
  std::vector<std::vector<std::string>> pred{{"B-ORG", "L-ORG", "U-LOC", "O"}};
  auto half = score_entities(gold, pred);
  CHECK(half.micro.gold == 2);
  CHECK(half.micro.predicted == 2);
  CHECK(half.micro.correct == 1);
  CHECK(half.micro.precision == 0.5);
  CHECK(half.micro.recall == 0.5);
  CHECK(half.micro.f1 == 0.5);

  std::vector<std::vector<std::string>> nothing{{"O", "O", "O", "O"}};
  auto none = score_entities(gold, nothing);
  CHECK(none.micro.precision == 0.0);
  CHECK(none.micro.recall == 0.0);
  CHECK(none.micro.f1 == 0.0);

  // boundary mismatch is not a match
  auto shifted = score_entities(gold, {{"U-ORG", "O", "O", "U-PER"}});
  CHECK(shifted.micro.correct == 1);
  CHECK(shifted.micro.correct <= std::min(shifted.micro.gold, shifted.micro.predicted));
  CHECK(shifted.to_json()["micro"]["f1"].get<double>() == shifted.micro.f1);
}

TEST_CASE("model files round trip bit-exactly and detect corruption") {
  testutil::TempDir dir;
  std::vector<LabeledSentence> data{sent({"Alice", "met", "Bob"}, {"U-PER", "O", "U-PER"}),
                                    sent({"Acme", "Corp", "rose"}, {"B-ORG", "L-ORG", "O"})};
  CrfTrainOptions o;
  o.max_iter = 20;
  auto m = train_crf(data, FeatureTemplateSet{}, nullptr, o);
  m.save(dir.file("a.crf"));
  auto back = CrfModel::load(dir.file("a.crf"));
  CHECK(back.labels == m.labels);
  CHECK(back.feature_keys == m.feature_keys);
  CHECK(back.state_weights == m.state_weights);
  CHECK(back.transitions == m.transitions);
  CHECK(back.templates == m.templates);
  CHECK(back.serialize() == m.serialize());

  auto bytes = read_file(dir.file("a.crf"));
  bytes[bytes.size() / 2] ^= 0x01;
  write_file(dir.file("bad.crf"), bytes);
  CHECK_THROWS_WITH_AS(CrfModel::load(dir.file("bad.crf")), doctest::Contains("checksum"), Error);
  write_file(dir.file("junk.crf"), "nope");
  CHECK_THROWS_AS(CrfModel::load(dir.file("junk.crf")), Error);

  // determinism: identical data and config give identical files
  auto again = train_crf(data, FeatureTemplateSet{}, nullptr, o);
  CHECK(again.serialize() == m.serialize());
}

TEST_CASE("tagging and evaluation repair decoded labels") {
  std::vector<LabeledSentence> data{sent({"Alice", "met", "Bob"}, {"U-PER", "O", "U-PER"})};
  auto m = train_crf(data, unigram_only(), nullptr, {});
  auto preds = tag(m, {{"Alice", "met", "Carol"}}, DomainId("news"), nullptr);
  REQUIRE(preds.size() == 1);
  CHECK(preds[0].labels.size() == 3);
  CHECK(hash_sentences(data) == hash_sentences(data));
  CHECK(hash_sentences(data) != hash_sentences({sent({"Alice"}, {"U-PER"})}));
}
