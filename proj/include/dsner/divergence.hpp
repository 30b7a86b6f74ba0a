#pragma once

#include <string>
#include <vector>

#include "dsner/corpus.hpp"
#include "dsner/domainsense.hpp"

namespace dsner {

// Jensen-Shannon divergence in nats; 0 ln 0 = 0. Inputs must be distributions
// of equal length (sum 1 within 1e-9).
double jsd(const std::vector<double>& p, const std::vector<double>& q);

// First-order (propagation of uncertainty) standard deviation of the plug-in
// JSD, treating every component as an independent binomial proportion:
//   sigma^2 = sum_i (dJS/dp_i)^2 p_i(1-p_i)/n_a + sum_i (dJS/dq_i)^2 q_i(1-q_i)/n_b
// with dJS/dp_i = 1/2 ln(2 p_i / (p_i + q_i)). Zero components are floored at
// 1/(2 max(n_a, n_b)) before the logarithms. Covariances between components are ignored.
double jsd_stddev(const std::vector<double>& p, const std::vector<double>& q, std::uint64_t n_a, std::uint64_t n_b);

struct JsdEstimate {
  std::string word;
  std::int32_t word_id = -1;
  DomainId domain_a, domain_b;
  double jsd = 0;
  double stddev = 0;
  std::uint64_t n_a = 0, n_b = 0;
  std::vector<double> probs_a, probs_b;
};

struct JsdReportOptions {
  std::uint64_t min_report_count = 1000;
  SenseAssignment mode = SenseAssignment::hard;
};

// Words seen at least min_report_count times in both domains, ranked by jsd
// descending (word id breaks ties).
std::vector<JsdEstimate> jsd_report(const SenseModel& model, const DomainCorpus& a, const DomainCorpus& b,
                                    const JsdReportOptions& options = {});

// One JSON object per line: word, domain_a, domain_b, jsd, stddev, n_a, n_b, probs_a, probs_b.
std::string jsd_report_jsonl(const std::vector<JsdEstimate>& rows, bool bits = false);

}  // namespace dsner
