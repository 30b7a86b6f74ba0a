#include <cmath>

#include "doctest.h"
#include "dsner/disambig.hpp"
#include "dsner/rng.hpp"
#include "testutil.hpp"

using namespace dsner;

namespace {

Vocabulary vocab_from(const std::vector<std::string>& words) {
  std::vector<Vocabulary::Entry> e;
  for (std::size_t i = 0; i < words.size(); ++i) e.push_back({words[i], 100 - i});
  return Vocabulary(e, 1);
}

DomainEmbeddingSet random_set(const Vocabulary& v, std::vector<DomainId> domains, std::uint64_t seed) {
  DomainDistHyper h;
  h.dim = 6;
  h.seed = seed;
  auto set = DomainEmbeddingSet::init(v, std::move(domains), h);
  Rng rng(seed + 100);
  for (auto& x : set.node_vectors().data()) x = static_cast<float>(rng.uniform(-1, 1));
  for (std::size_t k = 0; k < set.domains().size(); ++k)
    for (auto& x : set.delta(k).data()) x = static_cast<float>(rng.uniform(-0.5, 0.5));
  return set;
}

double sum(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

TEST_CASE("single domain gives posterior one") {
  auto v = vocab_from({"a", "b", "c"});
  auto set = random_set(v, {DomainId("x")}, 1);
  auto tables = UnigramTables::build(v, {DomainCorpus{DomainId("x"), {{0, 1, 2}}}});
  auto post = posterior_domains({"a", {"b", "c"}}, set, tables);
  REQUIRE(post.probs.size() == 1);
  CHECK(post.probs[0] == 1.0);
}

TEST_CASE("identical domains give a uniform posterior") {
  auto v = vocab_from({"a", "b", "c", "d"});
  DomainDistHyper h;
  h.dim = 5;
  auto set = DomainEmbeddingSet::init(v, {DomainId("x"), DomainId("y")}, h);
  Rng rng(2);
  for (auto& x : set.node_vectors().data()) x = static_cast<float>(rng.uniform(-1, 1));
  for (auto& x : set.delta(0).data()) x = static_cast<float>(rng.uniform(-1, 1));
  set.delta(1) = set.delta(0);
  DomainCorpus cx{DomainId("x"), {{0, 1, 2}, {3, 3}}};
  DomainCorpus cy{DomainId("y"), cx.sentences};
  auto tables = UnigramTables::build(v, {cx, cy});
  auto post = posterior_domains({"a", {"b", "d", "c"}}, set, tables);
  CHECK(std::abs(post.probs[0] - 0.5) < 1e-9);
  CHECK(std::abs(post.probs[1] - 0.5) < 1e-9);
  CHECK(post.argmax == 0);  // tie goes to the first domain
  auto uni = baseline_unigram({"a", {"b", "d"}}, v, tables);
  CHECK(std::abs(uni.probs[0] - 0.5) < 1e-9);
}

TEST_CASE("posterior decomposition matches an independent sum") {
  auto v = vocab_from({"o", "c1", "c2", "c3"});
  auto set = random_set(v, {DomainId("x"), DomainId("y")}, 3);
  DomainCorpus cx{DomainId("x"), {{0, 1, 1, 2}}};
  DomainCorpus cy{DomainId("y"), {{0, 3, 3, 2, 2}}};
  auto tables = UnigramTables::build(v, {cx, cy});
  UsageQuery q{"o", {"c1", "zzz", "c2"}};
  auto post = posterior_domains(q, set, tables);
  CHECK(post.used_contexts == 2);
  CHECK(post.skipped_contexts == 1);
  std::vector<double> logp(2);
  for (std::size_t d = 0; d < 2; ++d) {
    double s = std::log(0.5);
    for (std::int32_t c : {1, 2}) {
      auto phi = set.compose(c, d);
      s += path_log_prob(set.tree(), set.node_vectors(), 0, std::span<const float>(phi));
      s += std::log((tables.count(d, c) + 1.0) / (tables.total(d) + 4.0));
    }
    logp[d] = s;
  }
  const double p0 = 1.0 / (1.0 + std::exp(logp[1] - logp[0]));
  CHECK(post.probs[0] == doctest::Approx(p0).epsilon(1e-12));
  CHECK(std::abs(sum(post.probs) - 1.0) < 1e-9);
  CHECK(post.argmax == (post.probs[0] >= post.probs[1] ? 0u : 1u));
  auto j = post.to_json();
  CHECK(j["domains"][0]["prob"].get<double>() == post.probs[0]);
  CHECK(j["domains"][1].contains("log_output"));
}

TEST_CASE("posterior errors and long contexts") {
  auto v = vocab_from({"o", "c1", "c2"});
  auto set = random_set(v, {DomainId("x"), DomainId("y")}, 4);
  auto tables = UnigramTables::build(v, {DomainCorpus{DomainId("x"), {{0, 1}}}, DomainCorpus{DomainId("y"), {{0, 2}}}});
  CHECK_THROWS_AS(posterior_domains({"nope", {"c1"}}, set, tables), Error);
  CHECK_THROWS_WITH_AS(posterior_domains({"o", {"q1", "q2"}}, set, tables), doctest::Contains("no usable context"), Error);
  auto prior_only = posterior_domains({"o", {}}, set, tables);
  CHECK(prior_only.probs[0] == doctest::Approx(0.5));
  UsageQuery q{"o", {}, PriorMode::corpus_size};
  auto sized = posterior_domains(q, set, tables);
  CHECK(sized.probs[0] == doctest::Approx(0.5));

  // 64 contexts: no underflow to NaN
  UsageQuery many{"o", {}};
  for (int i = 0; i < 64; ++i) many.contexts.push_back(i % 2 ? "c1" : "c2");
  auto p = posterior_domains(many, set, tables);
  CHECK(std::isfinite(p.probs[0]));
  CHECK(std::abs(sum(p.probs) - 1.0) < 1e-9);
}

TEST_CASE("unigram baseline") {
  auto v = vocab_from({"o", "only_x", "shared"});
  DomainCorpus cx{DomainId("x"), {{0, 1, 2, 1}}};
  DomainCorpus cy{DomainId("y"), {{0, 2, 2, 0}}};
  auto tables = UnigramTables::build(v, {cx, cy});
  auto r = baseline_unigram({"o", {"only_x"}}, v, tables);
  CHECK(r.argmax_domain().str() == "x");
  CHECK(std::abs(sum(r.probs) - 1.0) < 1e-9);
}

TEST_CASE("distance baselines") {
  auto v = vocab_from({"o", "c1", "c2"});
  auto set = random_set(v, {DomainId("x"), DomainId("y")}, 5);
  auto dm = baseline_dm({"o", {"o"}}, set);
  CHECK(dm.scores[0] == doctest::Approx(1.0));
  CHECK(dm.scores[1] == doctest::Approx(1.0));
  auto cvm = baseline_cvm({"o", {"o"}}, set);
  CHECK(cvm.scores[0] == doctest::Approx(1.0));
  CHECK_THROWS_WITH_AS(baseline_dm({"o", {"zz"}}, set), doctest::Contains("no usable context"), Error);
  CHECK_THROWS_WITH_AS(baseline_cvm({"o", {"zz"}}, set), doctest::Contains("no usable context"), Error);

  // oracle: direct cosines
  auto r = baseline_dm({"o", {"c1", "c2"}}, set);
  for (std::size_t d = 0; d < 2; ++d) {
    auto o = set.compose(0, d);
    double m = 0;
    for (std::int32_t c : {1, 2}) {
      auto cv = set.compose(c, d);
      m += cosine(std::span<const float>(o), std::span<const float>(cv)) / 2;
    }
    CHECK(r.scores[d] == doctest::Approx(m).epsilon(1e-9));
  }
  auto rc = baseline_cvm({"o", {"c1", "c2"}}, set);
  for (std::size_t d = 0; d < 2; ++d) {
    auto o = set.compose(0, d);
    auto a = set.compose(1, d), b = set.compose(2, d);
    std::vector<float> mean(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) mean[k] = (a[k] + b[k]) / 2;
    CHECK(rc.scores[d] == doctest::Approx(cosine(std::span<const float>(o), std::span<const float>(mean))).epsilon(1e-6));
  }
}

TEST_CASE("method names and evaluation harness") {
  for (auto m : {DisambigMethod::ddpp, DisambigMethod::unigram, DisambigMethod::dm, DisambigMethod::cvm})
    CHECK(parse_disambig_method(method_name(m)) == m);
  CHECK_THROWS_AS(parse_disambig_method("bogus"), Error);

  auto v = vocab_from({"o", "only_x", "only_y"});
  auto set = random_set(v, {DomainId("x"), DomainId("y")}, 6);
  DomainCorpus cx{DomainId("x"), {{0, 1, 1, 1, 1, 1}}};
  DomainCorpus cy{DomainId("y"), {{0, 2, 2, 2, 2, 2}}};
  auto tables = UnigramTables::build(v, {cx, cy});
  std::vector<LabeledUsage> items;
  for (int i = 0; i < 2; ++i) {
    items.push_back({{"o", {"only_x"}}, DomainId("x")});
    items.push_back({{"o", {"only_y"}}, DomainId("y")});
  }
  auto ev = eval_disambig(items, {DisambigMethod::unigram}, set, tables);
  CHECK(ev.accuracy[0] == 1.0);
  CHECK(ev.correct[0].size() == 4);
  CHECK_THROWS_AS(eval_disambig({}, {DisambigMethod::unigram}, set, tables), Error);
  CHECK(ev.to_json(items).dump().find("unigram") != std::string::npos);
}

TEST_CASE("unigram tables round trip") {
  testutil::TempDir dir;
  auto v = vocab_from({"a", "b"});
  auto t = UnigramTables::build(v, {DomainCorpus{DomainId("x"), {{0, 1, 1}}}, DomainCorpus{DomainId("y"), {{0}}}});
  t.save(dir.file("u.tsv"), v);
  auto back = UnigramTables::load(dir.file("u.tsv"), v);
  CHECK(back.count(0, 1) == 2);
  CHECK(back.total(1) == 1);
  CHECK(back.log_prob(0, 1) == t.log_prob(0, 1));
}

TEST_CASE("trained pivot word picks the domain of its context") {
  // pivot (0) appears with {ball, match} in sports and {stock, profit} in finance;
  // ball/match/stock/profit also appear with filler in both domains with equal frequency.
  auto v = vocab_from({"pivot", "ball", "match", "stock", "profit", "the", "a", "of"});
  Rng rng(12);
  DomainCorpus sp{DomainId("sports"), {}}, fin{DomainId("finance"), {}};
  for (int i = 0; i < 600; ++i) {
    sp.sentences.push_back({5, 0, static_cast<std::int32_t>(1 + rng.below(2)), 6});
    fin.sentences.push_back({5, 0, static_cast<std::int32_t>(3 + rng.below(2)), 6});
    for (auto* c : {&sp, &fin}) {
      c->sentences.push_back({7, static_cast<std::int32_t>(1 + rng.below(4)), 5});
    }
  }
  DomainDistHyper h;
  h.dim = 10;
  h.window = 2;
  auto set = DomainEmbeddingSet::init(v, {DomainId("sports"), DomainId("finance")}, h);
  DomainDistTrainOptions opt;
  opt.epochs = 5;
  train_domaindist(set, {sp, fin}, opt);
  auto tables = UnigramTables::build(v, {sp, fin});
  auto a = posterior_domains({"pivot", {"ball", "match"}}, set, tables);
  CHECK(a.argmax_domain().str() == "sports");
  CHECK(a.probs[0] > 0.5);
  auto b = posterior_domains({"pivot", {"stock", "profit"}}, set, tables);
  CHECK(b.argmax_domain().str() == "finance");
}
