#pragma once

#include <cmath>
#include <functional>
#include <limits>

#include "dsner/crf.hpp"
#include "dsner/rng.hpp"

namespace testutil {

// Model over a reduced label inventory with `features` dense feature ids and random weights.
inline dsner::CrfModel random_crf(dsner::Rng& rng, std::size_t labels, std::size_t features, double scale = 1.0) {
  static const std::vector<std::string> pool{"O", "U-A", "U-B", "B-A", "L-A"};
  dsner::CrfModel m;
  m.labels = dsner::LabelSet::from_labels(std::vector<std::string>(pool.begin(), pool.begin() + static_cast<long>(labels)));
  for (std::size_t f = 0; f < features; ++f) m.feature_keys.push_back("f" + std::to_string(f));
  m.rebuild_index();
  m.state_weights.resize(features * labels);
  m.transitions.resize(labels * labels);
  for (auto& w : m.state_weights) w = rng.uniform(-scale, scale);
  for (auto& w : m.transitions) w = rng.uniform(-scale, scale);
  return m;
}

inline dsner::CrfInput random_input(dsner::Rng& rng, std::size_t length, std::size_t features) {
  dsner::CrfInput in;
  in.tokens.resize(length);
  for (auto& tok : in.tokens)
    for (std::size_t f = 0; f < features; ++f)
      if (rng.uniform() < 0.6) tok.emplace_back(static_cast<std::int32_t>(f), rng.uniform() < 0.5 ? 1.0 : rng.uniform(-2, 2));
  return in;
}

// Calls visit(path) for every label sequence of the given length.
inline void for_each_path(std::size_t labels, std::size_t length,
                          const std::function<void(const std::vector<std::size_t>&)>& visit) {
  std::vector<std::size_t> path(length, 0);
  while (true) {
    visit(path);
    std::size_t k = 0;
    while (k < length && ++path[k] == labels) path[k++] = 0;
    if (k == length) return;
  }
}

struct Enumerated {
  double log_z = 0;
  std::vector<std::size_t> best;
  double best_score = -std::numeric_limits<double>::infinity();
};

// Brute force over all L^T paths; ties keep the lexicographically smallest path
// when positions are compared left to right.
inline Enumerated enumerate(const dsner::CrfModel& m, const dsner::CrfInput& in) {
  Enumerated e;
  std::vector<double> scores;
  std::vector<std::vector<std::size_t>> paths;
  for_each_path(m.num_labels(), in.length(), [&](const std::vector<std::size_t>& p) {
    const double s = dsner::path_score(m, in, p);
    scores.push_back(s);
    paths.push_back(p);
  });
  double mx = -std::numeric_limits<double>::infinity();
  for (double s : scores) mx = std::max(mx, s);
  double acc = 0;
  for (double s : scores) acc += std::exp(s - mx);
  e.log_z = mx + std::log(acc);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] > e.best_score) {
      e.best_score = scores[i];
      e.best = paths[i];
    }
  }
  return e;
}

}  // namespace testutil
