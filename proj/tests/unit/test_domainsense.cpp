#include <cmath>
#include <numeric>

#include "doctest.h"
#include "dsner/domainsense.hpp"
#include "dsner/rng.hpp"
#include "testutil.hpp"

using namespace dsner;

namespace {

Vocabulary vocab_of(std::size_t n) {
  std::vector<Vocabulary::Entry> e;
  for (std::size_t i = 0; i < n; ++i) e.push_back({"w" + std::to_string(i), 1000 - i});
  return Vocabulary(e, 1);
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

// Word 0 appears with cluster A (1..8) or cluster B (9..16); words 1..16 are otherwise single-topic.
DomainCorpus two_sense_corpus(std::uint64_t seed, std::size_t sentences, double share_a, const std::string& domain = "d") {
  Rng rng(seed);
  DomainCorpus c{DomainId(domain), {}};
  for (std::size_t s = 0; s < sentences; ++s) {
    const bool a = rng.uniform() < share_a;
    std::vector<std::int32_t> sent;
    for (int i = 0; i < 6; ++i) {
      if (i == 3) sent.push_back(0);
      sent.push_back((a ? 1 : 9) + static_cast<std::int32_t>(rng.below(8)));
    }
    c.sentences.push_back(sent);
  }
  return c;
}

}  // namespace

TEST_CASE("defaults and init errors") {
  SenseHyper h;
  CHECK(h.senses == 5);
  CHECK(h.min_count == 100);
  h.senses = 0;
  CHECK_THROWS_AS(SenseModel::init(vocab_of(4), h), Error);
}

TEST_CASE("prior is a distribution over all slots") {
  SenseHyper h;
  h.dim = 4;
  auto m = SenseModel::init(vocab_of(5), h);
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    const auto w = static_cast<std::int32_t>(rng.below(5));
    m.add_count(w, rng.below(5), rng.uniform(0, 50));
    const auto pi = m.prior(w);
    CHECK(std::abs(sum(pi) - 1.0) < 1e-9);
    for (double p : pi) CHECK(p >= 0);
  }
  // fresh word: stick-breaking expectation with zero counts
  const auto pi = SenseModel::init(vocab_of(5), h).prior(0);
  const double b = 1.0 / (1.0 + h.alpha_dp);
  CHECK(pi[0] == doctest::Approx(b));
  CHECK(pi[1] == doctest::Approx(b * (1 - b)));
}

TEST_CASE("disambiguation edge cases") {
  SenseHyper h;
  h.dim = 4;
  auto m = SenseModel::init(vocab_of(6), h);
  m.add_count(2, 0, 3);
  m.add_count(2, 1, 7);
  auto post = disambiguate(m, 2, {});
  auto pi = m.prior(2);
  for (std::size_t s = 0; s < 5; ++s) CHECK(post[s] == doctest::Approx(pi[s]).epsilon(1e-12));

  for (std::size_t s = 1; s < 5; ++s) m.deactivate(3, s);
  std::vector<std::int32_t> ctx{1, 4, 5};
  auto one = disambiguate(m, 3, ctx);
  CHECK(one[0] == 1.0);
  for (std::size_t s = 1; s < 5; ++s) CHECK(one[s] == 0.0);

  auto p = disambiguate(m, 2, ctx);
  CHECK(std::abs(sum(p) - 1.0) < 1e-9);
  CHECK_THROWS_AS(disambiguate(m, 17, ctx), Error);
  CHECK_THROWS_AS(disambiguate(m, std::string("nope"), {}), Error);
  // out-of-vocabulary context words are skipped
  CHECK(disambiguate(m, std::string("w2"), {"zzz", "qq"}) == disambiguate(m, 2, {}));
}

TEST_CASE("occurrence context window") {
  std::vector<std::int32_t> s{10, 11, 12, 13, 14};
  CHECK(occurrence_context(s, 0, 2) == std::vector<std::int32_t>{11, 12});
  CHECK(occurrence_context(s, 2, 1) == std::vector<std::int32_t>{11, 13});
  CHECK(occurrence_context(s, 4, 10) == std::vector<std::int32_t>{10, 11, 12, 13});
}

TEST_CASE("sense distribution counts hard assignments") {
  SenseHyper h;
  h.dim = 3;
  h.senses = 2;
  h.window = 1;
  auto m = SenseModel::init(vocab_of(3), h);
  m.add_count(0, 0, 50);
  m.add_count(0, 1, 50);
  auto v0 = m.sense_vector(0, 0), v1 = m.sense_vector(0, 1);
  for (std::size_t k = 0; k < 3; ++k) {
    v0[k] = 3.0f;
    v1[k] = -3.0f;
  }
  auto argmax = [&](std::int32_t c) {
    std::vector<std::int32_t> ctx{c};
    auto p = disambiguate(m, 0, ctx);
    return p[0] >= p[1] ? 0u : 1u;
  };
  // Pick node vectors under which the two context words prefer different senses.
  Rng rng(3);
  unsigned s1 = 0, s2 = 0;
  for (int attempt = 0; attempt < 100 && s1 == s2; ++attempt) {
    for (auto& x : m.node_vectors().data()) x = static_cast<float>(rng.uniform(-2, 2));
    s1 = argmax(1);
    s2 = argmax(2);
  }
  REQUIRE(s1 != s2);

  DomainCorpus c{DomainId("d"), {}};
  for (int i = 0; i < 7; ++i) c.sentences.push_back({0, 1});
  for (int i = 0; i < 3; ++i) c.sentences.push_back({2, 0});
  auto d = sense_distribution(m, "w0", c);
  CHECK(d.n == 10);
  CHECK(d.probs[s1] == 0.7);
  CHECK(d.probs[s2] == 0.3);
  CHECK(d.probs[0] + d.probs[1] == 1.0);

  DomainCorpus all_one{DomainId("d"), {}};
  for (int i = 0; i < 10; ++i) all_one.sentences.push_back({0, 1});
  auto d1 = sense_distribution(m, "w0", all_one);
  CHECK(d1.probs[s1] == 1.0);
  CHECK(d1.probs[s2] == 0.0);

  auto soft = sense_distribution(m, "w0", c, SenseAssignment::soft);
  CHECK(std::abs(sum(soft.probs) - 1.0) < 1e-12);

  DomainCorpus none{DomainId("d"), {{1, 2}}};
  CHECK_THROWS_WITH_AS(sense_distribution(m, "w0", none), doctest::Contains("word absent from domain"), Error);

  auto tally = tally_senses(m, c);
  CHECK(tally.occurrences[0] == 10);
  CHECK(tally.counts[0][s1] == 7);
}

TEST_CASE("sense neighbors") {
  SenseHyper h;
  h.dim = 4;
  h.senses = 2;
  auto m = SenseModel::init(vocab_of(4), h);
  CHECK(sense_neighbors(m, 0, 0, 0).empty());
  auto nb = sense_neighbors(m, 0, 0, 100);
  CHECK(nb.size() == 7);
  for (std::size_t i = 1; i < nb.size(); ++i) CHECK(nb[i - 1].similarity >= nb[i].similarity);
  m.deactivate(1, 1);
  CHECK_THROWS_AS(sense_neighbors(m, 1, 1, 3), Error);
  CHECK(sense_neighbors(m, 0, 0, 100).size() == 6);
}

TEST_CASE("expected sense vector") {
  SenseHyper h;
  h.dim = 2;
  h.senses = 2;
  auto m = SenseModel::init(vocab_of(3), h);
  m.add_count(0, 0, 9);
  std::vector<std::int32_t> ctx;
  auto post = disambiguate(m, 0, ctx);
  auto e = expected_sense_vector(m, 0, ctx);
  for (std::size_t k = 0; k < 2; ++k)
    CHECK(e[k] == doctest::Approx(post[0] * m.sense_vector(0, 0)[k] + post[1] * m.sense_vector(0, 1)[k]));
  auto a = expected_sense_vector(m, 0, ctx, true);
  CHECK(a[0] == m.sense_vector(0, 0)[0]);
}

TEST_CASE("training separates a two-sense word and prunes monotonically") {
  SenseHyper h;
  h.dim = 12;
  h.window = 3;
  h.epochs = 4;
  auto corpus = two_sense_corpus(5, 1500, 0.5);
  auto m = SenseModel::init(vocab_of(17), h);
  std::vector<std::uint8_t> prev(17 * 5, 1);
  bool monotone = true;
  auto report = train_adagram(m, {corpus}, [&](std::size_t, double) {
    for (std::int32_t w = 0; w < 17; ++w)
      for (std::size_t s = 0; s < 5; ++s) {
        if (!prev[static_cast<std::size_t>(w) * 5 + s] && m.active(w, s)) monotone = false;
        prev[static_cast<std::size_t>(w) * 5 + s] = m.active(w, s);
      }
  });
  CHECK(monotone);
  CHECK(report.epochs_run == 4);
  CHECK(report.epoch_loss.back() < report.epoch_loss.front());
  for (std::int32_t w = 0; w < 17; ++w) CHECK(std::abs(sum(m.prior(w)) - 1.0) < 1e-9);

  // the planted word should split between the clusters
  std::vector<std::int32_t> ca{1, 2, 3}, cb{9, 10, 11};
  auto pa = disambiguate(m, 0, ca), pb = disambiguate(m, 0, cb);
  auto am = [](const std::vector<double>& p) { return std::max_element(p.begin(), p.end()) - p.begin(); };
  CHECK(am(pa) != am(pb));

  auto again = SenseModel::init(vocab_of(17), h);
  train_adagram(again, {corpus});
  CHECK(again == m);
}

TEST_CASE("export/import is bit-exact") {
  testutil::TempDir dir;
  SenseHyper h;
  h.dim = 5;
  h.window = 2;
  h.epochs = 1;
  auto m = SenseModel::init(vocab_of(17), h);
  train_adagram(m, {two_sense_corpus(1, 100, 0.3)});
  m.export_dir(dir.str());
  auto back = SenseModel::import_dir(dir.str());
  CHECK(back == m);
  CHECK(read_file(dir.file("senses/priors.tsv")).find("w0\t0\t") != std::string::npos);
}
