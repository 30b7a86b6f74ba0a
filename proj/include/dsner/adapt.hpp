#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dsner/corpus.hpp"
#include "dsner/crf.hpp"
#include "dsner/features.hpp"
#include "json.hpp"

namespace dsner {

struct AdaptConfig {
  std::vector<LabeledSentence> source;
  std::vector<LabeledSentence> target_train;
  std::vector<LabeledSentence> target_test;
  FeatureTemplateSet templates;
  const EmbeddingProvider* provider = nullptr;
  double train_fraction = 1.0;  // share of target_train used; source is always used whole
  std::uint64_t seed = 1;
  CrfTrainOptions crf;
  TagOptions tag;
};

struct AdaptResult {
  CrfModel model;
  EvalReport report;
  std::vector<std::size_t> target_ids;  // target_train indices used, ascending
  CrfTrainStats stats;
  nlohmann::json to_json() const;
};

// round(fraction * n) distinct indices in [0, n), ascending; fraction 1 keeps everything.
std::vector<std::size_t> subsample_ids(std::size_t n, double fraction, std::uint64_t seed);

// One CRF on source + subsample(target_train), evaluated on target_test.
AdaptResult train_domain_emb_ner(const AdaptConfig& config);

struct SweepCell {
  double fraction = 0;
  std::uint64_t seed = 0;
  std::size_t target_used = 0;
  EvalReport report;
};

struct SweepSummary {
  double fraction = 0;
  double mean_f1 = 0;
  double stddev_f1 = 0;  // population stddev over seeds
};

struct SweepReport {
  std::vector<SweepCell> cells;
  std::vector<SweepSummary> summary;  // in the order the fractions were given
  bool monotone = false;              // mean F1 non-decreasing in fraction
  nlohmann::json to_json() const;
};

SweepReport proportion_sweep(const AdaptConfig& base, const std::vector<double>& fractions,
                             const std::vector<std::uint64_t>& seeds,
                             std::function<void(const SweepCell&)> on_cell = {});

// ---- active learning ----

struct PoolItem {
  std::size_t id = 0;
  std::vector<std::string> tokens;
  std::vector<std::string> gold;  // empty when unknown
  DomainId domain;
};

std::vector<PoolItem> make_pool(const std::vector<LabeledSentence>& sentences, bool keep_gold = true);

enum class SelectionStrategy { least_confidence, random };
SelectionStrategy parse_selection_strategy(const std::string& s);
std::string to_string(SelectionStrategy s);

struct ActiveConfig {
  std::vector<LabeledSentence> source;
  std::vector<LabeledSentence> eval;
  FeatureTemplateSet templates;
  const EmbeddingProvider* provider = nullptr;
  std::size_t budget = 0;  // B, in sentences
  std::size_t k = 1;       // batch size
  SelectionStrategy strategy = SelectionStrategy::least_confidence;
  bool length_normalized = false;
  bool warm_start = false;
  std::uint64_t seed = 1;
  CrfTrainOptions crf;
  TagOptions tag;
  nlohmann::json to_json() const;
};

struct Candidate {
  std::size_t id = 0;
  double confidence = 0;
  std::vector<std::string> suggestion;  // model's repaired BILOU tags
};

struct ActiveRound {
  std::size_t index = 0;  // 1-based
  std::vector<std::size_t> selected;
  std::vector<double> confidences;
  std::size_t labeled = 0;  // acquired target sentences after this round
  EvalReport report;
};

// Scores every pool item with one model: confidences in pool order.
std::vector<double> score_pool(const CrfModel& model, const std::vector<PoolItem>& pool, const EmbeddingProvider* provider,
                               bool length_normalized, std::size_t threads = 1);

// The n lowest-confidence ids, ascending by confidence, then id.
std::vector<Candidate> least_confident(const std::vector<PoolItem>& pool, const std::vector<double>& confidences,
                                       std::size_t n);

// Algorithm state, advanced one batch at a time so an external oracle can supply labels.
class ActiveSession {
 public:
  ActiveSession(ActiveConfig config, std::vector<PoolItem> pool);

  // Trains the source-only model. Must run once before anything else.
  void start();
  bool started() const noexcept { return started_; }

  bool done() const;
  // Number of sentences the next batch will take.
  std::size_t next_batch_size() const;

  // Freezes the current model, scores the pool and queues the next batch; a
  // no-op when a batch is already queued. Returns the queued batch.
  const std::vector<Candidate>& select();
  const std::vector<Candidate>& pending() const noexcept { return pending_; }

  // Labels for every pending id, in pending order. Moves them into the labeled
  // set, retrains, evaluates and records the round.
  const ActiveRound& complete(const std::vector<std::vector<std::string>>& labels);

  const CrfModel& model() const noexcept { return model_; }
  const EvalReport& initial_report() const noexcept { return initial_report_; }
  const std::vector<ActiveRound>& rounds() const noexcept { return rounds_; }
  const std::vector<PoolItem>& pool() const noexcept { return pool_; }
  const std::vector<LabeledSentence>& acquired() const noexcept { return acquired_; }
  std::size_t selected_total() const noexcept { return selected_total_; }
  std::size_t initial_pool_size() const noexcept { return initial_pool_; }
  const ActiveConfig& config() const noexcept { return config_; }

  nlohmann::json history_json() const;
  nlohmann::json status_json() const;

 private:
  CrfModel train() const;
  EvalReport eval(const CrfModel& m) const;

  ActiveConfig config_;
  std::vector<PoolItem> pool_;
  std::vector<LabeledSentence> acquired_;
  std::vector<Candidate> pending_;
  std::vector<ActiveRound> rounds_;
  CrfModel model_;
  EvalReport initial_report_;
  std::size_t selected_total_ = 0;
  std::size_t initial_pool_ = 0;
  bool started_ = false;
};

struct ActiveResult {
  CrfModel model;
  std::vector<ActiveRound> rounds;
  EvalReport initial_report;
  std::size_t selected_total = 0;
};

// Runs the loop to completion with the gold labels attached to the pool.
// `on_round` sees the session after each completed round.
ActiveResult active_loop(const ActiveConfig& config, std::vector<PoolItem> pool,
                         std::function<void(const ActiveSession&)> on_round = {});
// Same loop with uniformly random batches.
ActiveResult random_selection_baseline(ActiveConfig config, std::vector<PoolItem> pool,
                                       std::function<void(const ActiveSession&)> on_round = {});

// Run directory layout: config.json, round_<n>/{model.crf,selected.jsonl,eval.json}, history.json.
void write_run_config(const std::string& dir, const nlohmann::json& config);
void write_round(const std::string& dir, const ActiveSession& session);
void write_history(const std::string& dir, const ActiveSession& session);

}  // namespace dsner
