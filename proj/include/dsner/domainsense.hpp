#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dsner/common.hpp"
#include "dsner/corpus.hpp"
#include "dsner/hsoftmax.hpp"

namespace dsner {

struct SenseHyper {
  std::size_t senses = 5;  // truncation level S
  std::size_t dim = 100;
  std::size_t window = 10;
  std::uint64_t min_count = 100;
  std::size_t epochs = 5;
  std::uint64_t seed = 1;
  double alpha0 = 0.025;
  double alpha_dp = 0.1;           // stick-breaking concentration
  double prune_threshold = 1e-3;   // prior below this after an epoch -> inactive

  bool operator==(const SenseHyper&) const = default;
};

// Adaptive skip-gram state: S sense vectors per word, shared hierarchical
// softmax outputs, and per-sense expected counts driving the prior.
class SenseModel {
 public:
  static SenseModel init(Vocabulary vocab, const SenseHyper& hyper);

  const Vocabulary& vocab() const noexcept { return vocab_; }
  const SenseHyper& hyper() const noexcept { return hyper_; }
  const HuffmanTree& tree() const noexcept { return tree_; }
  std::size_t senses() const noexcept { return hyper_.senses; }
  std::size_t dim() const noexcept { return hyper_.dim; }

  std::span<float> sense_vector(std::int32_t w, std::size_t s) { return vectors_.row(static_cast<std::size_t>(w) * hyper_.senses + s); }
  std::span<const float> sense_vector(std::int32_t w, std::size_t s) const {
    return vectors_.row(static_cast<std::size_t>(w) * hyper_.senses + s);
  }
  Matrix<float>& node_vectors() noexcept { return nodes_; }
  const Matrix<float>& node_vectors() const noexcept { return nodes_; }
  const Matrix<float>& sense_matrix() const noexcept { return vectors_; }

  double count(std::int32_t w, std::size_t s) const { return counts_(static_cast<std::size_t>(w), s); }
  void add_count(std::int32_t w, std::size_t s, double v) { counts_(static_cast<std::size_t>(w), s) += v; }
  bool active(std::int32_t w, std::size_t s) const { return active_[static_cast<std::size_t>(w) * hyper_.senses + s] != 0; }
  std::size_t active_count(std::int32_t w) const;
  void deactivate(std::int32_t w, std::size_t s) { active_[static_cast<std::size_t>(w) * hyper_.senses + s] = 0; }

  // Expected truncated stick-breaking weights from the sense counts; sums to 1
  // over all S slots (active or not).
  std::vector<double> prior(std::int32_t w) const;

  // Marks senses whose prior fell below the threshold inactive. Returns how many were pruned.
  std::size_t prune();

  void export_dir(const std::string& dir) const;
  static SenseModel import_dir(const std::string& dir);

  friend bool operator==(const SenseModel&, const SenseModel&) = default;

 private:
  Vocabulary vocab_;
  SenseHyper hyper_;
  HuffmanTree tree_;
  Matrix<float> vectors_;
  Matrix<float> nodes_;
  Matrix<double> counts_;
  std::vector<std::uint8_t> active_;
};

struct SenseTrainReport {
  std::size_t epochs_run = 0;
  std::uint64_t tokens_processed = 0;
  std::vector<double> epoch_loss;  // mean negative log marginal likelihood per context word
  std::vector<double> mean_active_senses;
};

// Online variational training over the merged corpus. Per occurrence: the
// E-step weighs each active sense by prior * prod_c Pr(c | sense); the M-step
// takes responsibility-weighted SGD steps and adds the responsibilities to
// the sense counts. Senses are pruned after every epoch and never come back.
SenseTrainReport train_adagram(SenseModel& model, const std::vector<DomainCorpus>& corpora,
                               std::function<void(std::size_t, double)> on_epoch = {});

// Posterior over the S slots (zeros for inactive senses). Out-of-vocabulary
// context words are skipped; empty usable context returns the normalized prior.
std::vector<double> disambiguate(const SenseModel& model, std::int32_t w, std::span<const std::int32_t> context);
std::vector<double> disambiguate(const SenseModel& model, const std::string& word, const std::vector<std::string>& context);

enum class SenseAssignment { hard, soft };

struct SenseDistribution {
  std::string word;
  DomainId domain;
  std::vector<double> probs;
  std::vector<double> counts;  // per-sense (integer-valued in hard mode)
  std::uint64_t n = 0;
};

// Context for an occurrence at position i: the tokens within +-window, excluding i.
std::vector<std::int32_t> occurrence_context(std::span<const std::int32_t> sentence, std::size_t i, std::size_t window);

SenseDistribution sense_distribution(const SenseModel& model, const std::string& word, const DomainCorpus& corpus,
                                     SenseAssignment mode = SenseAssignment::hard);

// Per-word sense counts for every vocabulary word in one pass over a corpus.
struct SenseTally {
  std::vector<std::vector<double>> counts;  // [word][sense]
  std::vector<std::uint64_t> occurrences;
};
SenseTally tally_senses(const SenseModel& model, const DomainCorpus& corpus, SenseAssignment mode = SenseAssignment::hard);

struct SenseNeighbor {
  std::int32_t word = -1;
  std::size_t sense = 0;
  double similarity = 0;
};

std::vector<SenseNeighbor> sense_neighbors(const SenseModel& model, std::int32_t w, std::size_t s, std::size_t n);

// Posterior-weighted mean of active sense vectors, or the argmax sense vector.
std::vector<float> expected_sense_vector(const SenseModel& model, std::int32_t w, std::span<const std::int32_t> context,
                                         bool use_argmax = false);

}  // namespace dsner
