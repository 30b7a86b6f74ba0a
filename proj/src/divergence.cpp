#include "dsner/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "json.hpp"

namespace dsner {

namespace {

void check_distribution(const std::vector<double>& p, const char* name) {
  double sum = 0;
  for (double v : p) {
    if (!(v >= 0) || !std::isfinite(v)) fail(ErrorKind::invalid_argument, std::string(name) + " has a negative or non-finite entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) fail(ErrorKind::invalid_argument, std::string(name) + " does not sum to 1");
}

double xlogx(double x) { return x > 0 ? x * std::log(x) : 0.0; }

}  // namespace

double jsd(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) fail(ErrorKind::invalid_argument, "distribution length mismatch");
  check_distribution(p, "p");
  check_distribution(q, "q");
  double v = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    v += 0.5 * xlogx(p[i]) + 0.5 * xlogx(q[i]) - xlogx(m);
  }
  return std::clamp(v, 0.0, std::numbers::ln2);
}

double jsd_stddev(const std::vector<double>& p, const std::vector<double>& q, std::uint64_t n_a, std::uint64_t n_b) {
  if (p.size() != q.size()) fail(ErrorKind::invalid_argument, "distribution length mismatch");
  check_distribution(p, "p");
  check_distribution(q, "q");
  if (n_a == 0 || n_b == 0) fail(ErrorKind::invalid_argument, "occurrence counts must be >= 1");
  const double floor = 1.0 / (2.0 * static_cast<double>(std::max(n_a, n_b)));
  double var_a = 0, var_b = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = p[i] > 0 ? p[i] : floor;
    const double qi = q[i] > 0 ? q[i] : floor;
    const double dp = 0.5 * std::log(2.0 * pi / (pi + qi));
    const double dq = 0.5 * std::log(2.0 * qi / (pi + qi));
    var_a += dp * dp * (p[i] * (1.0 - p[i]));
    var_b += dq * dq * (q[i] * (1.0 - q[i]));
  }
  return std::sqrt(var_a / static_cast<double>(n_a) + var_b / static_cast<double>(n_b));
}

std::vector<JsdEstimate> jsd_report(const SenseModel& model, const DomainCorpus& a, const DomainCorpus& b,
                                    const JsdReportOptions& options) {
  const auto ta = tally_senses(model, a, options.mode);
  const auto tb = tally_senses(model, b, options.mode);
  std::vector<JsdEstimate> rows;
  for (std::size_t w = 0; w < model.vocab().size(); ++w) {
    const auto n_a = ta.occurrences[w], n_b = tb.occurrences[w];
    if (n_a == 0 || n_b == 0 || n_a < options.min_report_count || n_b < options.min_report_count) continue;
    JsdEstimate e;
    e.word_id = static_cast<std::int32_t>(w);
    e.word = model.vocab().token(e.word_id);
    e.domain_a = a.domain;
    e.domain_b = b.domain;
    e.n_a = n_a;
    e.n_b = n_b;
    for (double c : ta.counts[w]) e.probs_a.push_back(c / static_cast<double>(n_a));
    for (double c : tb.counts[w]) e.probs_b.push_back(c / static_cast<double>(n_b));
    e.jsd = jsd(e.probs_a, e.probs_b);
    e.stddev = jsd_stddev(e.probs_a, e.probs_b, n_a, n_b);
    rows.push_back(std::move(e));
  }
  std::sort(rows.begin(), rows.end(), [](const JsdEstimate& x, const JsdEstimate& y) {
    if (x.jsd != y.jsd) return x.jsd > y.jsd;
    return x.word_id < y.word_id;
  });
  return rows;
}

std::string jsd_report_jsonl(const std::vector<JsdEstimate>& rows, bool bits) {
  const double scale = bits ? 1.0 / std::numbers::ln2 : 1.0;
  std::string out;
  for (const auto& r : rows) {
    nlohmann::json j = {{"word", r.word},         {"domain_a", r.domain_a.str()}, {"domain_b", r.domain_b.str()},
                        {"jsd", r.jsd * scale},   {"stddev", r.stddev * scale},  {"n_a", r.n_a},
                        {"n_b", r.n_b},           {"probs_a", r.probs_a},        {"probs_b", r.probs_b}};
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace dsner
