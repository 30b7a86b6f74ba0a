#include "dsner/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>
#include <thread>

#include "dsner/rng.hpp"

namespace dsner {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json report_row(const EvalReport& r) {
  return {{"precision", r.micro.precision}, {"recall", r.micro.recall}, {"f1", r.micro.f1}};
}

}  // namespace

std::vector<std::size_t> subsample_ids(std::size_t n, double fraction, std::uint64_t seed) {
  if (!(fraction > 0 && fraction <= 1)) fail(ErrorKind::invalid_argument, "train fraction must lie in (0, 1]");
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  if (fraction == 1.0) return ids;
  Rng rng(seed);
  rng.shuffle(ids);
  const auto keep = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  ids.resize(std::min(keep, n));
  std::sort(ids.begin(), ids.end());
  return ids;
}

json AdaptResult::to_json() const {
  json j;
  j["target_used"] = target_ids.size();
  j["target_ids"] = target_ids;
  j["eval"] = report.to_json();
  j["train"] = {{"iterations", stats.iterations},
                {"objective", stats.objective},
                {"initial_objective", stats.initial_objective},
                {"stop_reason", stats.stop_reason}};
  j["model"] = {{"labels", model.labels.labels()}, {"features", model.num_features()}, {"metadata", model.metadata}};
  return j;
}

AdaptResult train_domain_emb_ner(const AdaptConfig& config) {
  if (config.source.empty() && config.target_train.empty())
    fail(ErrorKind::invalid_argument, "combined training set is empty");
  AdaptResult res;
  res.target_ids = config.target_train.empty()
                       ? std::vector<std::size_t>{}
                       : subsample_ids(config.target_train.size(), config.train_fraction, config.seed);
  std::vector<LabeledSentence> train = config.source;
  for (auto i : res.target_ids) train.push_back(config.target_train[i]);
  if (train.empty()) fail(ErrorKind::invalid_argument, "combined training set is empty");
  res.model = train_crf(train, config.templates, config.provider, config.crf, &res.stats);
  res.report = evaluate(res.model, config.target_test, config.provider, config.tag);
  return res;
}

json SweepReport::to_json() const {
  json j;
  j["cells"] = json::array();
  for (const auto& c : cells)
    j["cells"].push_back({{"fraction", c.fraction},
                          {"seed", c.seed},
                          {"target_used", c.target_used},
                          {"f1", c.report.micro.f1},
                          {"eval", c.report.to_json()}});
  j["summary"] = json::array();
  for (const auto& s : summary)
    j["summary"].push_back({{"fraction", s.fraction}, {"mean_f1", s.mean_f1}, {"stddev_f1", s.stddev_f1}});
  j["monotone"] = monotone;
  return j;
}

SweepReport proportion_sweep(const AdaptConfig& base, const std::vector<double>& fractions,
                             const std::vector<std::uint64_t>& seeds, std::function<void(const SweepCell&)> on_cell) {
  if (fractions.empty() || seeds.empty()) fail(ErrorKind::invalid_argument, "sweep needs at least one fraction and seed");
  SweepReport rep;
  for (double f : fractions) {
    SweepSummary s;
    s.fraction = f;
    std::vector<double> f1s;
    for (auto seed : seeds) {
      AdaptConfig cfg = base;
      cfg.train_fraction = f;
      cfg.seed = seed;
      auto r = train_domain_emb_ner(cfg);
      SweepCell cell{f, seed, r.target_ids.size(), r.report};
      f1s.push_back(r.report.micro.f1);
      if (on_cell) on_cell(cell);
      rep.cells.push_back(std::move(cell));
    }
    s.mean_f1 = std::accumulate(f1s.begin(), f1s.end(), 0.0) / static_cast<double>(f1s.size());
    double var = 0;
    for (double x : f1s) var += (x - s.mean_f1) * (x - s.mean_f1);
    s.stddev_f1 = std::sqrt(var / static_cast<double>(f1s.size()));
    rep.summary.push_back(s);
  }
  std::vector<SweepSummary> sorted = rep.summary;
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.fraction < b.fraction; });
  rep.monotone = true;
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i].mean_f1 < sorted[i - 1].mean_f1) rep.monotone = false;
  return rep;
}

// ---- active learning ----

std::vector<PoolItem> make_pool(const std::vector<LabeledSentence>& sentences, bool keep_gold) {
  std::vector<PoolItem> pool;
  pool.reserve(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i)
    pool.push_back({i, sentences[i].tokens, keep_gold ? sentences[i].labels : std::vector<std::string>{},
                    sentences[i].domain});
  return pool;
}

SelectionStrategy parse_selection_strategy(const std::string& s) {
  if (s == "least_confidence" || s == "least-confidence" || s == "lc") return SelectionStrategy::least_confidence;
  if (s == "random") return SelectionStrategy::random;
  fail(ErrorKind::invalid_argument, "unknown selection strategy: " + s);
}

std::string to_string(SelectionStrategy s) {
  return s == SelectionStrategy::random ? "random" : "least_confidence";
}

json ActiveConfig::to_json() const {
  return {{"budget", budget},
          {"k", k},
          {"strategy", to_string(strategy)},
          {"length_normalized", length_normalized},
          {"warm_start", warm_start},
          {"seed", seed},
          {"source_sentences", source.size()},
          {"eval_sentences", eval.size()},
          {"templates", templates.to_json()},
          {"l2", crf.l2},
          {"max_iter", crf.max_iter},
          {"constrain", tag.constrain}};
}

std::vector<double> score_pool(const CrfModel& model, const std::vector<PoolItem>& pool, const EmbeddingProvider* provider,
                               bool length_normalized, std::size_t threads) {
  std::vector<double> conf(pool.size());
  auto work = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const auto in = compile(model, pool[i].tokens, pool[i].domain, provider);
      conf[i] = sequence_confidence(model, in, length_normalized);
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, pool.size()));
  if (threads == 1) {
    work(0, pool.size());
    return conf;
  }
  std::vector<std::thread> ts;
  const std::size_t chunk = (pool.size() + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t lo = t * chunk, hi = std::min(pool.size(), lo + chunk);
    if (lo < hi) ts.emplace_back(work, lo, hi);
  }
  for (auto& t : ts) t.join();
  return conf;
}

std::vector<Candidate> least_confident(const std::vector<PoolItem>& pool, const std::vector<double>& confidences,
                                       std::size_t n) {
  if (pool.size() != confidences.size()) fail(ErrorKind::invalid_argument, "one confidence per pool item required");
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (confidences[a] != confidences[b]) return confidences[a] < confidences[b];
    return pool[a].id < pool[b].id;
  });
  std::vector<Candidate> out;
  for (std::size_t i = 0; i < std::min(n, order.size()); ++i) out.push_back({pool[order[i]].id, confidences[order[i]], {}});
  return out;
}

ActiveSession::ActiveSession(ActiveConfig config, std::vector<PoolItem> pool)
    : config_(std::move(config)), pool_(std::move(pool)) {
  if (config_.source.empty()) fail(ErrorKind::invalid_argument, "active learning needs a non-empty source set");
  if (config_.k == 0) fail(ErrorKind::invalid_argument, "batch size k must be >= 1");
  if (config_.budget > 0 && config_.k > config_.budget) fail(ErrorKind::invalid_argument, "batch size k exceeds budget B");
  std::set<std::size_t> ids;
  for (const auto& p : pool_) {
    if (!ids.insert(p.id).second) fail(ErrorKind::invalid_argument, "duplicate pool id " + std::to_string(p.id));
    if (p.tokens.empty()) fail(ErrorKind::invalid_argument, "empty pool sentence " + std::to_string(p.id));
  }
  initial_pool_ = pool_.size();
}

CrfModel ActiveSession::train() const {
  std::vector<LabeledSentence> data = config_.source;
  data.insert(data.end(), acquired_.begin(), acquired_.end());
  CrfTrainOptions opts = config_.crf;
  if (config_.warm_start && started_) opts.warm_start = &model_;
  return train_crf(data, config_.templates, config_.provider, opts);
}

EvalReport ActiveSession::eval(const CrfModel& m) const {
  return evaluate(m, config_.eval, config_.provider, config_.tag);
}

void ActiveSession::start() {
  if (started_) fail(ErrorKind::state, "session already started");
  model_ = train();
  initial_report_ = eval(model_);
  started_ = true;
}

bool ActiveSession::done() const { return selected_total_ >= config_.budget || pool_.empty(); }

std::size_t ActiveSession::next_batch_size() const {
  if (done()) return 0;
  return std::min({config_.k, config_.budget - selected_total_, pool_.size()});
}

const std::vector<Candidate>& ActiveSession::select() {
  if (!started_) fail(ErrorKind::state, "session not started");
  if (!pending_.empty() || done()) return pending_;
  const std::size_t n = next_batch_size();
  const auto conf = score_pool(model_, pool_, config_.provider, config_.length_normalized, config_.crf.threads);
  if (config_.strategy == SelectionStrategy::least_confidence) {
    pending_ = least_confident(pool_, conf, n);
  } else {
    Rng rng(config_.seed * 1000003ULL + rounds_.size());
    std::vector<std::size_t> order(pool_.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    order.resize(n);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return conf[a] != conf[b] ? conf[a] < conf[b] : pool_[a].id < pool_[b].id;
    });
    for (auto i : order) pending_.push_back({pool_[i].id, conf[i], {}});
  }
  for (auto& c : pending_) {
    const auto it = std::find_if(pool_.begin(), pool_.end(), [&](const PoolItem& p) { return p.id == c.id; });
    const auto in = compile(model_, it->tokens, it->domain, config_.provider);
    c.suggestion = repair_bilou(viterbi(model_, in, config_.tag.constrain).labels);
  }
  return pending_;
}

const ActiveRound& ActiveSession::complete(const std::vector<std::vector<std::string>>& labels) {
  if (pending_.empty()) fail(ErrorKind::state, "no batch is pending");
  if (labels.size() != pending_.size()) fail(ErrorKind::invalid_argument, "one label sequence per pending item required");
  std::vector<std::size_t> positions;
  for (std::size_t i = 0; i < pending_.size(); ++i) {
    const auto it = std::find_if(pool_.begin(), pool_.end(), [&](const PoolItem& p) { return p.id == pending_[i].id; });
    if (it == pool_.end()) fail(ErrorKind::state, "pending id missing from pool");
    if (labels[i].size() != it->tokens.size())
      fail(ErrorKind::invalid_argument, "labels for item " + std::to_string(it->id) + " do not match its length");
    if (!is_valid_bilou(labels[i]))
      fail(ErrorKind::invalid_argument, "labels for item " + std::to_string(it->id) + " are not valid BILOU");
    positions.push_back(static_cast<std::size_t>(it - pool_.begin()));
  }
  ActiveRound round;
  round.index = rounds_.size() + 1;
  for (std::size_t i = 0; i < pending_.size(); ++i) {
    const auto& item = pool_[positions[i]];
    acquired_.push_back({item.tokens, labels[i], item.domain});
    round.selected.push_back(item.id);
    round.confidences.push_back(pending_[i].confidence);
  }
  std::vector<bool> drop(pool_.size(), false);
  for (auto p : positions) drop[p] = true;
  std::vector<PoolItem> rest;
  for (std::size_t i = 0; i < pool_.size(); ++i)
    if (!drop[i]) rest.push_back(std::move(pool_[i]));
  pool_ = std::move(rest);
  selected_total_ += pending_.size();
  pending_.clear();

  model_ = train();
  round.labeled = acquired_.size();
  round.report = eval(model_);
  rounds_.push_back(std::move(round));
  return rounds_.back();
}

json ActiveSession::history_json() const {
  json j;
  j["strategy"] = to_string(config_.strategy);
  j["budget"] = config_.budget;
  j["k"] = config_.k;
  j["initial"] = report_row(initial_report_);
  j["initial"]["labeled"] = 0;
  j["rounds"] = json::array();
  for (const auto& r : rounds_) {
    json row = report_row(r.report);
    row["round"] = r.index;
    row["labeled"] = r.labeled;
    row["budget_used"] = r.labeled;
    row["selected"] = r.selected;
    j["rounds"].push_back(std::move(row));
  }
  return j;
}

json ActiveSession::status_json() const {
  return {{"round", rounds_.size()},
          {"started", started_},
          {"done", started_ && done()},
          {"budget", config_.budget},
          {"k", config_.k},
          {"selected_total", selected_total_},
          {"pool_initial", initial_pool_},
          {"pool_remaining", pool_.size()},
          {"pending", pending_.size()},
          {"labeled_total", config_.source.size() + acquired_.size()},
          {"strategy", to_string(config_.strategy)}};
}

namespace {

ActiveResult run_simulated(ActiveSession& s, const std::function<void(const ActiveSession&)>& on_round) {
  s.start();
  while (!s.done()) {
    const auto batch = s.select();
    std::vector<std::vector<std::string>> labels;
    for (const auto& c : batch) {
      const auto it = std::find_if(s.pool().begin(), s.pool().end(), [&](const PoolItem& p) { return p.id == c.id; });
      if (it->gold.empty()) fail(ErrorKind::invalid_argument, "simulated oracle: pool item " + std::to_string(c.id) + " has no gold labels");
      labels.push_back(it->gold);
    }
    s.complete(labels);
    if (on_round) on_round(s);
  }
  return {s.model(), s.rounds(), s.initial_report(), s.selected_total()};
}

}  // namespace

ActiveResult active_loop(const ActiveConfig& config, std::vector<PoolItem> pool,
                         std::function<void(const ActiveSession&)> on_round) {
  ActiveSession s(config, std::move(pool));
  return run_simulated(s, on_round);
}

ActiveResult random_selection_baseline(ActiveConfig config, std::vector<PoolItem> pool,
                                       std::function<void(const ActiveSession&)> on_round) {
  config.strategy = SelectionStrategy::random;
  ActiveSession s(std::move(config), std::move(pool));
  return run_simulated(s, on_round);
}

void write_run_config(const std::string& dir, const json& config) {
  fs::create_directories(dir);
  write_file((fs::path(dir) / "config.json").string(), config.dump(2) + "\n");
}

void write_round(const std::string& dir, const ActiveSession& session) {
  if (session.rounds().empty()) return;
  const auto& r = session.rounds().back();
  const fs::path rd = fs::path(dir) / ("round_" + std::to_string(r.index));
  fs::create_directories(rd);
  session.model().save((rd / "model.crf").string());
  std::string lines;
  const auto& acq = session.acquired();
  const std::size_t first = acq.size() - r.selected.size();
  for (std::size_t i = 0; i < r.selected.size(); ++i) {
    json row{{"id", r.selected[i]},
             {"confidence", r.confidences[i]},
             {"tokens", acq[first + i].tokens},
             {"labels", acq[first + i].labels}};
    lines += row.dump() + "\n";
  }
  write_file((rd / "selected.jsonl").string(), lines);
  write_file((rd / "eval.json").string(), r.report.to_json().dump(2) + "\n");
}

void write_history(const std::string& dir, const ActiveSession& session) {
  fs::create_directories(dir);
  write_file((fs::path(dir) / "history.json").string(), session.history_json().dump(2) + "\n");
}

}  // namespace dsner
