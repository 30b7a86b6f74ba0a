#include <cmath>

#include "doctest.h"
#include "dsner/divergence.hpp"
#include "dsner/rng.hpp"
#include "json.hpp"

using namespace dsner;

namespace {

std::vector<double> random_dist(Rng& rng, std::size_t n, bool allow_zero) {
  std::vector<double> v(n);
  double s = 0;
  for (auto& x : v) {
    x = (allow_zero && rng.uniform() < 0.2) ? 0.0 : -std::log(1.0 - rng.uniform());
    s += x;
  }
  if (s == 0) v[0] = s = 1;
  for (auto& x : v) x /= s;
  return v;
}

// Closed form evaluated in long double, written independently of the library.
long double sigma_oracle(const std::vector<long double>& p, const std::vector<long double>& q, long double na,
                         long double nb) {
  long double v = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const long double m = p[i] + q[i];
    const long double cp = 0.5L * std::log(2 * p[i] / m), cq = 0.5L * std::log(2 * q[i] / m);
    v += cp * cp * p[i] * (1 - p[i]) / na + cq * cq * q[i] * (1 - q[i]) / nb;
  }
  return std::sqrt(v);
}

}  // namespace

TEST_CASE("jsd fixed values") {
  CHECK(jsd({0.3, 0.7}, {0.3, 0.7}) == 0.0);
  CHECK(std::abs(jsd({1, 0}, {0, 1}) - std::log(2.0)) < 1e-12);
  // reference value from a 50-digit evaluation
  CHECK(std::abs(jsd({0.5, 0.5}, {0.9, 0.1}) - 0.10174922507919668857) < 1e-12);
  CHECK(std::abs(jsd({0.7, 0.3}, {0.5, 0.5}) - 0.021005925701837049775) < 1e-12);
}

TEST_CASE("jsd input validation") {
  CHECK_THROWS_AS(jsd({0.5, 0.5}, {1.0}), Error);
  CHECK_THROWS_AS(jsd({0.5, 0.6}, {0.5, 0.5}), Error);
  CHECK_THROWS_AS(jsd({1.5, -0.5}, {0.5, 0.5}), Error);
  CHECK_THROWS_AS(jsd({}, {}), Error);
}

TEST_CASE("jsd symmetry and range over random pairs") {
  Rng rng(42);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 2 + rng.below(6);
    auto p = random_dist(rng, n, true), q = random_dist(rng, n, true);
    const double a = jsd(p, q), b = jsd(q, p);
    REQUIRE(a == b);
    REQUIRE(a >= 0.0);
    REQUIRE(a <= std::log(2.0) + 1e-12);
    REQUIRE(jsd(p, p) == 0.0);
  }
}

TEST_CASE("stddev closed form") {
  const double s = jsd_stddev({0.7, 0.3}, {0.5, 0.5}, 1000, 1000);
  // 50-digit reference
  CHECK(std::abs(s - 0.0032836132571645541125) < 1e-12);
  const long double o = sigma_oracle({0.7L, 0.3L}, {0.5L, 0.5L}, 1000, 1000);
  CHECK(std::abs(s - static_cast<double>(o)) < 1e-12);
  CHECK(jsd_stddev({0.2, 0.8}, {0.2, 0.8}, 50, 70) == 0.0);
  CHECK_THROWS_AS(jsd_stddev({0.5, 0.5}, {0.5, 0.5}, 0, 10), Error);
  CHECK_THROWS_AS(jsd_stddev({0.5, 0.5}, {0.5, 0.5}, 10, 0), Error);
}

TEST_CASE("stddev scaling and symmetry") {
  Rng rng(9);
  for (int i = 0; i < 500; ++i) {
    auto p = random_dist(rng, 3, true), q = random_dist(rng, 3, true);
    const std::uint64_t na = 1 + rng.below(5000), nb = 1 + rng.below(5000);
    const double s = jsd_stddev(p, q, na, nb);
    REQUIRE(s >= 0);
    REQUIRE(jsd_stddev(q, p, nb, na) == s);
    // the zero-component floor depends on n, so exact 1/sqrt(n) scaling needs full support
    auto pf = random_dist(rng, 3, false), qf = random_dist(rng, 3, false);
    REQUIRE(jsd_stddev(pf, qf, 4 * na, 4 * nb) == jsd_stddev(pf, qf, na, nb) / 2);
  }
}

TEST_CASE("zero components use the half-count floor") {
  // p has a zero; the floor 1/(2*max(n)) enters the log but the variance term p(1-p) is 0 for it.
  const double s = jsd_stddev({1.0, 0.0}, {0.5, 0.5}, 100, 200);
  const long double eps = 1.0L / 400;
  const long double o = sigma_oracle({1.0L, eps}, {0.5L, 0.5L}, 100, 200);
  // recompute the oracle with the zero component's own variance term removed (p(1-p) = 0 at p=0)
  long double v = o * o;
  const long double cp = 0.5L * std::log(2 * eps / (eps + 0.5L));
  v -= cp * cp * eps * (1 - eps) / 100;
  CHECK(std::abs(s - static_cast<double>(std::sqrt(v))) < 1e-12);
  CHECK(std::isfinite(jsd_stddev({1, 0}, {0, 1}, 10, 10)));
}

TEST_CASE("report filtering and ordering") {
  std::vector<Vocabulary::Entry> e{{"a", 10}, {"b", 9}, {"c", 8}};
  SenseHyper h;
  h.dim = 3;
  h.senses = 2;
  auto m = SenseModel::init(Vocabulary(e, 1), h);
  DomainCorpus A{DomainId("x"), {{0, 1, 2}, {0, 1}, {2, 0}}};
  DomainCorpus B{DomainId("y"), {{0, 2}, {1, 0, 2}}};
  JsdReportOptions opt;
  opt.min_report_count = 1000;
  CHECK(jsd_report(m, A, B, opt).empty());
  opt.min_report_count = 1;
  auto rows = jsd_report(m, A, B, opt);
  CHECK(rows.size() == 3);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i - 1].jsd >= rows[i].jsd);
    if (rows[i - 1].jsd == rows[i].jsd) CHECK(rows[i - 1].word_id < rows[i].word_id);
  }
  CHECK(rows[0].domain_a.str() == "x");
  opt.min_report_count = 3;
  auto few = jsd_report(m, A, B, opt);
  for (const auto& r : few) CHECK((r.n_a >= 3 && r.n_b >= 3));

  auto lines = jsd_report_jsonl(rows);
  auto first = nlohmann::json::parse(lines.substr(0, lines.find('\n')));
  for (const char* k : {"word", "domain_a", "domain_b", "jsd", "stddev", "n_a", "n_b", "probs_a", "probs_b"})
    CHECK(first.contains(k));
  CHECK(JsdReportOptions{}.min_report_count == 1000);
}
