#include "dsner/lbfgs.hpp"

#include <cmath>
#include <deque>
#include <string>

#include "dsner/common.hpp"

namespace dsner {

namespace {

double dotv(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

LbfgsResult lbfgs_minimize(const Objective& f, std::vector<double>& x, const LbfgsOptions& options,
                           const std::function<void(std::size_t, double)>& on_iter) {
  const std::size_t n = x.size();
  std::vector<double> g(n), g_new(n), x_new(n), dir(n);
  LbfgsResult res;
  double fx = f(x, g);
  if (!std::isfinite(fx)) fail(ErrorKind::numeric, "objective is not finite at the starting point");
  res.history.push_back(fx);

  struct Pair {
    std::vector<double> s, y;
    double rho;
  };
  std::deque<Pair> mem;

  for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
    const double gnorm = std::sqrt(dotv(g, g));
    const double xnorm = std::sqrt(dotv(x, x));
    if (gnorm <= options.tol * std::max(1.0, xnorm)) {
      res.converged = true;
      res.stop_reason = "gradient norm below tolerance";
      break;
    }

    // two-loop recursion
    for (std::size_t i = 0; i < n; ++i) dir[i] = -g[i];
    std::vector<double> alpha(mem.size());
    for (std::size_t k = mem.size(); k-- > 0;) {
      alpha[k] = mem[k].rho * dotv(mem[k].s, dir);
      for (std::size_t i = 0; i < n; ++i) dir[i] -= alpha[k] * mem[k].y[i];
    }
    if (!mem.empty()) {
      const auto& last = mem.back();
      const double gamma = dotv(last.s, last.y) / dotv(last.y, last.y);
      for (auto& d : dir) d *= gamma;
    }
    for (std::size_t k = 0; k < mem.size(); ++k) {
      const double beta = mem[k].rho * dotv(mem[k].y, dir);
      for (std::size_t i = 0; i < n; ++i) dir[i] += mem[k].s[i] * (alpha[k] - beta);
    }
    double slope = dotv(g, dir);
    if (slope >= 0) {  // not a descent direction; restart from steepest descent
      mem.clear();
      for (std::size_t i = 0; i < n; ++i) dir[i] = -g[i];
      slope = -gnorm * gnorm;
    }

    double step = mem.empty() ? 1.0 / std::max(gnorm, 1e-12) : 1.0;
    double f_new = 0;
    bool accepted = false;
    for (std::size_t ls = 0; ls < options.max_linesearch; ++ls) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = x[i] + step * dir[i];
      f_new = f(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= fx + options.armijo * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      res.stop_reason = "line search failed";
      break;
    }

    Pair p{std::vector<double>(n), std::vector<double>(n), 0};
    for (std::size_t i = 0; i < n; ++i) {
      p.s[i] = x_new[i] - x[i];
      p.y[i] = g_new[i] - g[i];
    }
    const double sy = dotv(p.s, p.y);
    if (sy > 1e-12) {
      p.rho = 1.0 / sy;
      mem.push_back(std::move(p));
      if (mem.size() > options.memory) mem.pop_front();
    }
    x.swap(x_new);
    g.swap(g_new);
    fx = f_new;
    res.history.push_back(fx);
    res.iterations = iter + 1;
    if (on_iter) on_iter(iter + 1, fx);
  }
  if (res.stop_reason.empty()) res.stop_reason = "iteration limit";
  res.value = fx;
  return res;
}

}  // namespace dsner
