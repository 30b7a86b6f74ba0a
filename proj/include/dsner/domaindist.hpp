#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dsner/common.hpp"
#include "dsner/corpus.hpp"
#include "dsner/hsoftmax.hpp"

namespace dsner {

struct DomainDistHyper {
  std::size_t dim = 100;
  std::size_t window = 10;
  double alpha0 = 0.025;
  std::size_t epochs = 5;
  std::uint64_t min_count = 5;
  std::uint64_t seed = 1;
  double subsample = 0;  // word2vec-style threshold; 0 disables

  bool operator==(const DomainDistHyper&) const = default;
};

struct DomainDistReport {
  std::size_t epochs_run = 0;
  std::uint64_t tokens_processed = 0;
  std::vector<double> epoch_loss;  // mean -log Pr(o | phi_k(c)) per (center, context) pair
  double mean_last_epoch_loss() const { return epoch_loss.empty() ? 0.0 : epoch_loss.back(); }
};

// Global vectors delta_main, per-domain differentials delta_k and the shared
// hierarchical-softmax output nodes. phi_k(w) = delta_main(w) + delta_k(w).
class DomainEmbeddingSet {
 public:
  // delta_main ~ U[-0.5/d, 0.5/d]; delta_k and node vectors are zero.
  static DomainEmbeddingSet init(Vocabulary vocab, std::vector<DomainId> domains, const DomainDistHyper& hyper);

  const Vocabulary& vocab() const noexcept { return vocab_; }
  const std::vector<DomainId>& domains() const noexcept { return domains_; }
  const DomainDistHyper& hyper() const noexcept { return hyper_; }
  const HuffmanTree& tree() const noexcept { return tree_; }
  std::size_t dim() const noexcept { return hyper_.dim; }

  std::size_t domain_index(const DomainId& d) const;  // throws unknown_domain
  bool has_domain(const DomainId& d) const;

  Matrix<float>& delta_main() noexcept { return main_; }
  const Matrix<float>& delta_main() const noexcept { return main_; }
  Matrix<float>& delta(std::size_t k) { return deltas_.at(k); }
  const Matrix<float>& delta(std::size_t k) const { return deltas_.at(k); }
  Matrix<float>& node_vectors() noexcept { return nodes_; }
  const Matrix<float>& node_vectors() const noexcept { return nodes_; }

  std::vector<float> compose(std::int32_t w, std::size_t k) const;
  std::vector<float> compose(const std::string& word, const DomainId& domain) const;
  // delta_main(w); used where a sentence's domain has no trained differential.
  std::vector<float> global(std::int32_t w) const;

  Matrix<float> composed_matrix(std::size_t k) const;

  void set_hyper(const DomainDistHyper& h) { hyper_ = h; }

  void export_dir(const std::string& dir) const;
  static DomainEmbeddingSet import_dir(const std::string& dir);

  friend bool operator==(const DomainEmbeddingSet&, const DomainEmbeddingSet&) = default;

 private:
  Vocabulary vocab_;
  std::vector<DomainId> domains_;
  DomainDistHyper hyper_;
  HuffmanTree tree_;
  Matrix<float> main_;
  std::vector<Matrix<float>> deltas_;
  Matrix<float> nodes_;
};

struct DomainDistTrainOptions {
  std::size_t epochs = 5;
  std::uint64_t seed = 1;
  double subsample = 0;
  std::function<void(std::size_t epoch, double loss)> on_epoch;
};

// Skip-gram with hierarchical softmax over phi_k(center) predicting each
// context word inside a dynamic window (uniform in 1..window). The input-side
// step is applied identically to delta_main(c) and delta_k(c). Learning rate
// decays linearly to alpha0 * 1e-4 over the planned token count.
DomainDistReport train_domaindist(DomainEmbeddingSet& set, const std::vector<DomainCorpus>& corpora,
                                  const DomainDistTrainOptions& options);

// A single (center, context) step in domain k at the given learning rate.
// `applied` receives the float increment added to both input rows.
double domaindist_pair_step(DomainEmbeddingSet& set, std::int32_t center, std::int32_t context, std::size_t k,
                            double lr, std::vector<float>* applied = nullptr);

double cosine(std::span<const float> a, std::span<const float> b);

// 1 - cos(phi_k1(w), phi_k2(w)), in [0, 2]. Zero vectors are an error.
double domain_distance(const DomainEmbeddingSet& set, const std::string& word, const DomainId& k1, const DomainId& k2);

struct WordAtDomain {
  std::int32_t word = -1;
  std::size_t domain = 0;
  auto operator<=>(const WordAtDomain&) const = default;
};

struct Neighbor {
  WordAtDomain item;
  double similarity = 0;
};

struct NeighborOptions {
  std::optional<std::vector<std::size_t>> domains;          // restrict candidate domains
  std::optional<std::vector<std::int32_t>> candidate_words;  // restrict candidate words
};

// Ranked by cosine, ties broken by (word id, domain index). The query item is excluded.
std::vector<Neighbor> neighbors(const DomainEmbeddingSet& set, const WordAtDomain& query, std::size_t n,
                                const NeighborOptions& options = {});
std::vector<Neighbor> neighbors(const DomainEmbeddingSet& set, std::span<const float> query, std::size_t n,
                                const NeighborOptions& options = {});

}  // namespace dsner
