#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dsner/corpus.hpp"
#include "json.hpp"

namespace dsner {

// ---- two-domain corpus ----

struct TwoDomainConfig {
  std::uint64_t seed = 1;
  std::size_t tokens = 200000;  // approximate total before balancing sentences
  std::size_t pivots = 5;
  std::size_t cluster_size = 8;
  std::size_t assoc_per_pivot = 2;
  std::size_t fillers = 10;
  std::size_t neutral = 8;
  std::size_t sense_context_size = 6;
  // Share of sense 0 in domain A and in domain B, one pair per ambiguous word.
  std::vector<std::pair<double, double>> mixtures{{0.8, 0.2}, {0.9, 0.3}, {0.7, 0.1}};
  std::size_t heldout_per_word = 200;
  std::string domain_a = "sports";
  std::string domain_b = "finance";
};

struct SenseOccurrence {
  std::string word;
  std::size_t sense = 0;
  std::string domain;
  std::vector<std::string> tokens;
  std::size_t position = 0;
};

struct DisambigPhrase {
  std::string target;
  std::vector<std::string> contexts;
  std::string gold;
  bool balanced = false;  // contexts have identical frequencies in both domains
};

struct TwoDomainTruth {
  TwoDomainConfig config;
  std::vector<std::string> cluster_a, cluster_b;
  std::vector<std::string> pivots;
  std::vector<std::vector<std::string>> assoc_a, assoc_b;  // per pivot
  std::vector<std::string> ambiguous;
  std::vector<std::vector<std::string>> sense_contexts_x, sense_contexts_y;  // per ambiguous word
  std::vector<std::string> fillers;
  std::vector<std::string> neutral;
  std::vector<SenseOccurrence> heldout;
  std::vector<DisambigPhrase> phrases;
  std::vector<std::uint64_t> domain_tokens;
  // Empirical share of sense 0 per ambiguous word, and its occurrence count, in each domain.
  std::vector<std::pair<double, double>> realized_mixtures;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> ambiguous_counts;

  nlohmann::json to_json() const;
  static TwoDomainTruth from_json(const nlohmann::json& j);
};

struct TwoDomainCorpus {
  std::vector<DomainId> domains;
  std::vector<std::vector<Sentence>> sentences;  // per domain
  TwoDomainTruth truth;
};

TwoDomainCorpus gen_two_domain_corpus(const TwoDomainConfig& config);

// Writes manifest.tsv, <domain>.txt for each domain, and truth.json.
void write_two_domain_corpus(const TwoDomainCorpus& corpus, const std::string& dir);

// ---- NER benchmark ----

struct NerDatasetConfig {
  std::uint64_t seed = 1;
  std::size_t source = 400;
  std::size_t target_train = 600;
  std::size_t target_test = 300;
  std::size_t unlabeled = 6000;  // sentences per domain
  std::string source_domain = "news";
  std::string target_domain = "finance";
};

struct NerDataset {
  NerDatasetConfig config;
  std::vector<LabeledSentence> source, target_train, target_test;
  std::vector<DomainId> unlabeled_domains;
  std::vector<std::vector<Sentence>> unlabeled;
  nlohmann::json truth;  // lexicons and the cross-domain names
};

NerDataset gen_ner_dataset(const NerDatasetConfig& config);

// Writes source.conll, target_train.conll, target_test.conll, unlabeled/manifest.tsv
// (plus one text file per domain) and truth.json.
void write_ner_dataset(const NerDataset& data, const std::string& dir);

}  // namespace dsner
