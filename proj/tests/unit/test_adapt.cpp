#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

#include "doctest.h"
#include "dsner/adapt.hpp"
#include "dsner/synthbench.hpp"
#include "testutil.hpp"

using namespace dsner;

namespace {

const NerDataset& data() {
  static const NerDataset d = [] {
    NerDatasetConfig c;
    c.seed = 5;
    c.source = 60;
    c.target_train = 50;
    c.target_test = 40;
    c.unlabeled = 50;
    return gen_ner_dataset(c);
  }();
  return d;
}

CrfTrainOptions quick() {
  CrfTrainOptions o;
  o.max_iter = 15;
  o.entity_types = std::vector<std::string>{"PER", "ORG", "LOC"};
  return o;
}

AdaptConfig adapt_config() {
  AdaptConfig c;
  c.source = data().source;
  c.target_train = data().target_train;
  c.target_test = data().target_test;
  c.crf = quick();
  return c;
}

ActiveConfig active_config(std::size_t budget, std::size_t k) {
  ActiveConfig c;
  c.source = data().source;
  c.eval = data().target_test;
  c.budget = budget;
  c.k = k;
  c.crf = quick();
  return c;
}

std::vector<PoolItem> pool(std::size_t n) {
  std::vector<LabeledSentence> s(data().target_train.begin(), data().target_train.begin() + static_cast<long>(n));
  return make_pool(s);
}

}  // namespace

TEST_CASE("subsample_ids: size, range, distinctness and determinism") {
  for (std::size_t n : {0u, 1u, 7u, 100u})
    for (double f : {0.1, 0.25, 0.5, 0.9, 1.0}) {
      const auto ids = subsample_ids(n, f, 3);
      CHECK(ids.size() == static_cast<std::size_t>(std::llround(f * static_cast<double>(n))));
      CHECK(std::is_sorted(ids.begin(), ids.end()));
      CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
      for (auto i : ids) CHECK(i < n);
      CHECK(ids == subsample_ids(n, f, 3));
    }
  std::vector<std::size_t> all(10);
  std::iota(all.begin(), all.end(), 0);
  CHECK(subsample_ids(10, 1.0, 99) == all);
  CHECK(subsample_ids(100, 0.5, 1) != subsample_ids(100, 0.5, 2));
  CHECK_THROWS_AS(subsample_ids(10, 0.0, 1), Error);
  CHECK_THROWS_AS(subsample_ids(10, 1.5, 1), Error);
  CHECK_THROWS_AS(subsample_ids(10, -0.2, 1), Error);
}

TEST_CASE("adaptation with an empty target set is the source-only model") {
  auto cfg = adapt_config();
  cfg.target_train.clear();
  const auto r = train_domain_emb_ner(cfg);
  const auto ref = train_crf(data().source, cfg.templates, nullptr, cfg.crf);
  CHECK(r.model.serialize() == ref.serialize());
  CHECK(r.target_ids.empty());
  const auto ev = evaluate(ref, data().target_test, nullptr, cfg.tag);
  CHECK(r.report.micro.f1 == ev.micro.f1);
}

TEST_CASE("adaptation with fraction 1 trains on source plus every target sentence") {
  const auto cfg = adapt_config();
  const auto r = train_domain_emb_ner(cfg);
  CHECK(r.target_ids.size() == data().target_train.size());
  auto all = data().source;
  all.insert(all.end(), data().target_train.begin(), data().target_train.end());
  CHECK(r.model.serialize() == train_crf(all, cfg.templates, nullptr, cfg.crf).serialize());
}

TEST_CASE("adaptation subsample is reproducible from the seed") {
  auto cfg = adapt_config();
  cfg.train_fraction = 0.3;
  cfg.seed = 8;
  const auto a = train_domain_emb_ner(cfg);
  const auto b = train_domain_emb_ner(cfg);
  CHECK(a.target_ids == b.target_ids);
  CHECK(a.target_ids == subsample_ids(cfg.target_train.size(), 0.3, 8));
  CHECK(a.model.serialize() == b.model.serialize());
  CHECK(a.to_json()["target_used"] == a.target_ids.size());
}

TEST_CASE("adaptation errors") {
  auto cfg = adapt_config();
  cfg.source.clear();
  cfg.target_train.clear();
  CHECK_THROWS_AS(train_domain_emb_ner(cfg), Error);
  cfg = adapt_config();
  cfg.train_fraction = 0;
  CHECK_THROWS_AS(train_domain_emb_ner(cfg), Error);
  CHECK_THROWS_AS(proportion_sweep(adapt_config(), {}, {1}), Error);
}

TEST_CASE("sweep cells match single runs and summaries match an independent mean and stddev") {
  const auto base = adapt_config();
  std::size_t seen = 0;
  const auto rep = proportion_sweep(base, {0.2, 1.0}, {1, 2, 3}, [&](const SweepCell&) { ++seen; });
  CHECK(seen == 6);
  REQUIRE(rep.cells.size() == 6);
  REQUIRE(rep.summary.size() == 2);
  for (std::size_t fi = 0; fi < 2; ++fi) {
    double sum = 0, sq = 0;
    for (std::size_t si = 0; si < 3; ++si) {
      const double f1 = rep.cells[fi * 3 + si].report.micro.f1;
      sum += f1;
      sq += f1 * f1;
    }
    const double mean = sum / 3, var = sq / 3 - mean * mean;
    CHECK(rep.summary[fi].mean_f1 == doctest::Approx(mean).epsilon(1e-12));
    CHECK(rep.summary[fi].stddev_f1 == doctest::Approx(std::sqrt(std::max(0.0, var))).epsilon(1e-6));
  }
  auto single = base;
  single.train_fraction = 0.2;
  single.seed = 2;
  CHECK(rep.cells[1].report.micro.f1 == train_domain_emb_ner(single).report.micro.f1);
  CHECK(rep.cells[1].target_used == 10);
  // Fraction 1 ignores the seed, so its spread is zero.
  CHECK(rep.summary[1].stddev_f1 < 1e-12);
  CHECK(rep.monotone == (rep.summary[1].mean_f1 >= rep.summary[0].mean_f1));
  CHECK(rep.to_json()["cells"].size() == 6);
}

TEST_CASE("selection strategy names") {
  CHECK(parse_selection_strategy("lc") == SelectionStrategy::least_confidence);
  CHECK(parse_selection_strategy("least_confidence") == SelectionStrategy::least_confidence);
  CHECK(parse_selection_strategy("random") == SelectionStrategy::random);
  CHECK(to_string(SelectionStrategy::random) == "random");
  CHECK_THROWS_AS(parse_selection_strategy("margin"), Error);
}

TEST_CASE("least_confident orders by confidence then id") {
  std::vector<PoolItem> p(5);
  const std::vector<std::size_t> ids{40, 10, 30, 20, 50};
  for (std::size_t i = 0; i < 5; ++i) {
    p[i].id = ids[i];
    p[i].tokens = {"x"};
  }
  const std::vector<double> conf{0.5, 0.9, 0.5, 0.1, 0.5};
  const auto c = least_confident(p, conf, 4);
  REQUIRE(c.size() == 4);
  CHECK(c[0].id == 20);
  CHECK(c[1].id == 30);
  CHECK(c[2].id == 40);
  CHECK(c[3].id == 50);
  CHECK(least_confident(p, conf, 99).size() == 5);
  CHECK_THROWS_AS(least_confident(p, {0.1}, 1), Error);
}

TEST_CASE("budget zero runs no rounds and returns the source-only model") {
  const auto cfg = active_config(0, 1);
  const auto r = active_loop(cfg, pool(10));
  CHECK(r.rounds.empty());
  CHECK(r.selected_total == 0);
  CHECK(r.model.serialize() == train_crf(data().source, cfg.templates, nullptr, cfg.crf).serialize());
}

TEST_CASE("one full batch: B = k = 10 over a pool of 25") {
  const auto r = active_loop(active_config(10, 10), pool(25));
  REQUIRE(r.rounds.size() == 1);
  CHECK(r.rounds[0].selected.size() == 10);
  CHECK(r.rounds[0].labeled == 10);
  CHECK(r.selected_total == 10);
}

TEST_CASE("budget is spent exactly, ids never repeat, and selected plus remaining is the pool") {
  for (auto [b, k, n] : {std::tuple{7u, 3u, 20u}, std::tuple{12u, 5u, 9u}, std::tuple{4u, 4u, 4u}}) {
    CAPTURE(b);
    CAPTURE(k);
    CAPTURE(n);
    ActiveSession s(active_config(b, k), pool(n));
    s.start();
    std::size_t rounds = 0;
    while (!s.done()) {
      const auto expect = std::min<std::size_t>({k, b - s.selected_total(), s.pool().size()});
      CHECK(s.next_batch_size() == expect);
      const auto batch = s.select();
      CHECK(batch.size() == expect);
      std::vector<std::vector<std::string>> labels;
      for (const auto& c : batch) labels.push_back(data().target_train[c.id].labels);
      s.complete(labels);
      ++rounds;
    }
    CHECK(s.selected_total() == std::min<std::size_t>(b, n));
    CHECK(rounds == (std::min<std::size_t>(b, n) + k - 1) / k);
    std::multiset<std::size_t> seen;
    for (const auto& r : s.rounds()) seen.insert(r.selected.begin(), r.selected.end());
    for (const auto& p : s.pool()) seen.insert(p.id);
    std::multiset<std::size_t> want;
    for (std::size_t i = 0; i < n; ++i) want.insert(i);
    CHECK(seen == want);
    CHECK(s.rounds().back().labeled == s.selected_total());
  }
}

TEST_CASE("selected batch equals the lowest max-path probabilities under the frozen model") {
  ActiveSession s(active_config(6, 3), pool(20));
  s.start();
  const CrfModel frozen = s.model();
  const auto batch = s.select();
  // Max-path probability from Viterbi score and log Z, ranked independently.
  std::vector<std::pair<double, std::size_t>> scored;
  for (const auto& p : s.pool()) {
    const auto in = compile(frozen, p.tokens, p.domain, nullptr);
    const auto best = viterbi(frozen, in);
    scored.emplace_back(std::exp(path_score(frozen, in, best.label_ids) - log_partition(frozen, in)), p.id);
  }
  std::sort(scored.begin(), scored.end());
  REQUIRE(batch.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(batch[i].id == scored[i].second);
    CHECK(batch[i].confidence == doctest::Approx(scored[i].first).epsilon(1e-9));
    CHECK(is_valid_bilou(batch[i].suggestion));
  }
  // select() is idempotent while a batch is pending.
  CHECK(s.select().size() == 3);
  CHECK(s.select()[0].id == batch[0].id);
}

TEST_CASE("retrained model after a round equals a scratch model on source plus acquired") {
  const auto cfg = active_config(4, 4);
  ActiveSession s(cfg, pool(12));
  s.start();
  const auto batch = s.select();
  std::vector<std::vector<std::string>> labels;
  auto train = data().source;
  for (const auto& c : batch) {
    labels.push_back(data().target_train[c.id].labels);
    train.push_back(data().target_train[c.id]);
  }
  const auto& round = s.complete(labels);
  CHECK(s.model().serialize() == train_crf(train, cfg.templates, nullptr, cfg.crf).serialize());
  CHECK(round.report.micro.f1 == evaluate(s.model(), cfg.eval, nullptr, cfg.tag).micro.f1);
  CHECK(s.initial_report().micro.f1 ==
        evaluate(train_crf(data().source, cfg.templates, nullptr, cfg.crf), cfg.eval, nullptr).micro.f1);
}

TEST_CASE("warm start changes the optimizer start but keeps the labels and selection count") {
  auto cfg = active_config(4, 2);
  cfg.warm_start = true;
  const auto warm = active_loop(cfg, pool(10));
  cfg.warm_start = false;
  const auto cold = active_loop(cfg, pool(10));
  REQUIRE(warm.rounds.size() == 2);
  CHECK(warm.rounds[0].selected == cold.rounds[0].selected);
  CHECK(warm.selected_total == cold.selected_total);
  CHECK(warm.model.labels.labels() == cold.model.labels.labels());
}

TEST_CASE("random baseline spends the same budget and is seed-deterministic") {
  const auto cfg = active_config(6, 3);
  const auto a = random_selection_baseline(cfg, pool(20));
  const auto b = random_selection_baseline(cfg, pool(20));
  REQUIRE(a.rounds.size() == 2);
  CHECK(a.selected_total == 6);
  CHECK(a.rounds[0].selected == b.rounds[0].selected);
  CHECK(a.rounds[1].selected == b.rounds[1].selected);
}

TEST_CASE("active learning errors") {
  CHECK_THROWS_AS(ActiveSession(active_config(3, 5), pool(10)), Error);
  CHECK_THROWS_AS(ActiveSession(active_config(3, 0), pool(10)), Error);
  auto no_source = active_config(3, 1);
  no_source.source.clear();
  CHECK_THROWS_AS(ActiveSession(no_source, pool(10)), Error);
  auto dup = pool(3);
  dup[2].id = 0;
  CHECK_THROWS_AS(ActiveSession(active_config(3, 1), dup), Error);

  auto unlabeled = make_pool(std::vector<LabeledSentence>(data().target_train.begin(), data().target_train.begin() + 5), false);
  CHECK_THROWS_AS(active_loop(active_config(2, 1), unlabeled), Error);

  ActiveSession s(active_config(2, 1), pool(5));
  CHECK_THROWS_AS(s.select(), Error);
  s.start();
  CHECK_THROWS_AS(s.start(), Error);
  std::vector<std::vector<std::string>> none;
  CHECK_THROWS_AS(s.complete(none), Error);
  const auto batch = s.select();
  const auto len = data().target_train[batch[0].id].tokens.size();
  CHECK_THROWS_AS(s.complete({std::vector<std::string>(len + 1, "O")}), Error);
  std::vector<std::string> bad(len, "O");
  bad[0] = "I-PER";
  CHECK_THROWS_AS(s.complete({bad}), Error);
  CHECK(s.pending().size() == 1);
  s.complete({std::vector<std::string>(len, "O")});
  CHECK(s.rounds().size() == 1);
}

TEST_CASE("run directory layout") {
  testutil::TempDir dir;
  const auto cfg = active_config(4, 2);
  write_run_config(dir.str(), cfg.to_json());
  ActiveSession s(cfg, pool(8));
  s.start();
  while (!s.done()) {
    std::vector<std::vector<std::string>> labels;
    for (const auto& c : s.select()) labels.push_back(data().target_train[c.id].labels);
    s.complete(labels);
    write_round(dir.str(), s);
  }
  write_history(dir.str(), s);
  namespace fs = std::filesystem;
  for (const char* f : {"config.json", "history.json", "round_1/model.crf", "round_1/selected.jsonl",
                        "round_1/eval.json", "round_2/model.crf"})
    CHECK(fs::exists(fs::path(dir.str()) / f));
  CHECK(CrfModel::load(dir.file("round_2/model.crf")).serialize() == s.model().serialize());
  const auto hist = nlohmann::json::parse(read_file(dir.file("history.json")));
  CHECK(hist["rounds"].size() == 2);
  CHECK(hist["rounds"][1]["labeled"] == 4);
  CHECK(hist["initial"]["labeled"] == 0);
  const auto sel = read_file(dir.file("round_1/selected.jsonl"));
  CHECK(std::count(sel.begin(), sel.end(), '\n') == 2);
}
