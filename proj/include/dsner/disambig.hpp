#pragma once

#include <string>
#include <vector>

#include "dsner/corpus.hpp"
#include "dsner/domaindist.hpp"
#include "json.hpp"

namespace dsner {

// Per-domain token counts over a shared vocabulary; Pr(c | D=d) uses add-one
// smoothing: (count_d(c) + 1) / (total_d + |V|).
class UnigramTables {
 public:
  UnigramTables() = default;
  static UnigramTables build(const Vocabulary& vocab, const std::vector<DomainCorpus>& corpora);

  const std::vector<DomainId>& domains() const noexcept { return domains_; }
  std::size_t domain_index(const DomainId& d) const;
  std::uint64_t count(std::size_t d, std::int32_t w) const { return counts_.at(d).at(static_cast<std::size_t>(w)); }
  std::uint64_t total(std::size_t d) const { return totals_.at(d); }
  double log_prob(std::size_t d, std::int32_t w) const;

  // unigrams.tsv: header "#word<TAB>dom1<TAB>dom2...", then one row per vocabulary word.
  void save(const std::string& path, const Vocabulary& vocab) const;
  static UnigramTables load(const std::string& path, const Vocabulary& vocab);

 private:
  std::vector<DomainId> domains_;
  std::vector<std::vector<std::uint64_t>> counts_;
  std::vector<std::uint64_t> totals_;
  std::size_t vocab_size_ = 0;
};

enum class PriorMode { uniform, corpus_size };

struct UsageQuery {
  std::string target;
  std::vector<std::string> contexts;
  PriorMode prior = PriorMode::uniform;
};

struct DomainLogTerms {
  double log_output = 0;   // sum_c log Pr(o | c, D=d)
  double log_context = 0;  // sum_c log Pr(c | D=d)
  double log_prior = 0;
};

struct DomainPosterior {
  std::vector<DomainId> domains;
  std::vector<double> probs;
  std::size_t argmax = 0;
  std::vector<DomainLogTerms> terms;
  std::size_t used_contexts = 0;
  std::size_t skipped_contexts = 0;

  const DomainId& argmax_domain() const { return domains.at(argmax); }
  nlohmann::json to_json() const;
};

// log Pr(D=d | o, T) = log Pr(D=d) + sum_{c in T} [log Pr(o | phi_d(c)) + log Pr(c | D=d)] + const,
// accumulated in log space and normalized once.
DomainPosterior posterior_domains(const UsageQuery& query, const DomainEmbeddingSet& set, const UnigramTables& tables);

// argmax_d Pr(w | D=d) prod_c Pr(c | D=d), normalized for comparability.
DomainPosterior baseline_unigram(const UsageQuery& query, const Vocabulary& vocab, const UnigramTables& tables);

struct DomainScores {
  std::vector<DomainId> domains;
  std::vector<double> scores;
  std::size_t argmax = 0;
  std::size_t used_contexts = 0;
  std::size_t skipped_contexts = 0;

  const DomainId& argmax_domain() const { return domains.at(argmax); }
  nlohmann::json to_json() const;
};

// DistanceMean: mean over contexts of cos(phi_d(w), phi_d(c)).
DomainScores baseline_dm(const UsageQuery& query, const DomainEmbeddingSet& set);
// ContextVectorMean: cos(phi_d(w), mean_c phi_d(c)).
DomainScores baseline_cvm(const UsageQuery& query, const DomainEmbeddingSet& set);

enum class DisambigMethod { ddpp, unigram, dm, cvm };
DisambigMethod parse_disambig_method(const std::string& name);
std::string method_name(DisambigMethod m);

struct LabeledUsage {
  UsageQuery query;
  DomainId gold;
};

struct DisambigEval {
  std::vector<DisambigMethod> methods;
  std::vector<double> accuracy;                // per method
  std::vector<std::vector<bool>> correct;      // [method][item]
  std::vector<std::vector<DomainId>> predicted;
  nlohmann::json to_json(const std::vector<LabeledUsage>& testset) const;
};

DomainId predict_domain(DisambigMethod method, const UsageQuery& query, const DomainEmbeddingSet& set,
                        const UnigramTables& tables);

DisambigEval eval_disambig(const std::vector<LabeledUsage>& testset, const std::vector<DisambigMethod>& methods,
                           const DomainEmbeddingSet& set, const UnigramTables& tables);

}  // namespace dsner
