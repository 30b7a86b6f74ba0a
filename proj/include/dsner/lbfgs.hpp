#pragma once

#include <functional>
#include <string>
#include <vector>

namespace dsner {

struct LbfgsOptions {
  std::size_t memory = 6;
  std::size_t max_iter = 200;
  double tol = 1e-5;  // stop when ||g|| <= tol * max(1, ||x||)
  double armijo = 1e-4;
  std::size_t max_linesearch = 30;
};

struct LbfgsResult {
  double value = 0;
  std::size_t iterations = 0;
  bool converged = false;
  std::string stop_reason;
  std::vector<double> history;  // objective after each accepted step (history[0] at x0)
};

// f(x, grad) returns the objective and fills grad. Minimizes in place with a
// backtracking (Armijo) line search, so accepted steps never increase f.
using Objective = std::function<double(const std::vector<double>& x, std::vector<double>& grad)>;
LbfgsResult lbfgs_minimize(const Objective& f, std::vector<double>& x, const LbfgsOptions& options = {},
                           const std::function<void(std::size_t, double)>& on_iter = {});

}  // namespace dsner
