#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dsner/common.hpp"
#include "dsner/corpus.hpp"

namespace dsner {

// Huffman coding of the vocabulary. For word w, points[w] lists the internal
// nodes on the root->leaf path (ids 0..|V|-2) and codes[w] the branch bits.
struct HuffmanTree {
  std::vector<std::vector<std::uint8_t>> codes;
  std::vector<std::vector<std::int32_t>> points;
  std::size_t node_count = 0;

  std::size_t vocab_size() const noexcept { return codes.size(); }
  std::size_t code_length(std::int32_t w) const { return codes.at(static_cast<std::size_t>(w)).size(); }
  void check_word(std::int32_t w) const {
    if (w < 0 || static_cast<std::size_t>(w) >= codes.size())
      fail(ErrorKind::unknown_word, "word id " + std::to_string(w) + " outside the tree");
  }
  friend bool operator==(const HuffmanTree&, const HuffmanTree&) = default;
};

// Merge order: smallest count first, ties to the smaller node id (leaves
// take their vocabulary id, internal nodes |V| + creation index).
HuffmanTree build_huffman(const std::vector<std::uint64_t>& counts);
HuffmanTree build_huffman(const Vocabulary& vocab);

inline double log_sigmoid(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Code bit 0 means the positive branch.
inline double code_sign(std::uint8_t bit) { return bit == 0 ? 1.0 : -1.0; }

template <typename T, typename U>
double dot(std::span<const T> a, std::span<const U> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

// log Pr(output_word | input) = sum over the path of log sigmoid(sign * <node, input>).
template <typename T, typename U>
double path_log_prob(const HuffmanTree& tree, const Matrix<T>& nodes, std::int32_t output_word, std::span<const U> input) {
  tree.check_word(output_word);
  if (input.size() != nodes.cols()) fail(ErrorKind::invalid_argument, "input dimension mismatch");
  const auto& pts = tree.points[static_cast<std::size_t>(output_word)];
  const auto& code = tree.codes[static_cast<std::size_t>(output_word)];
  double lp = 0;
  for (std::size_t j = 0; j < pts.size(); ++j) {
    const double x = dot(nodes.row(static_cast<std::size_t>(pts[j])), input);
    lp += log_sigmoid(code_sign(code[j]) * x);
  }
  return lp;
}

// Analytic gradient of path_log_prob. grad_input gets d/d input; grad_nodes
// (same shape as nodes) accumulates d/d node for touched rows only.
template <typename T>
double path_log_prob_gradient(const HuffmanTree& tree, const Matrix<T>& nodes, std::int32_t output_word,
                              std::span<const T> input, std::span<T> grad_input, Matrix<T>& grad_nodes) {
  tree.check_word(output_word);
  const auto& pts = tree.points[static_cast<std::size_t>(output_word)];
  const auto& code = tree.codes[static_cast<std::size_t>(output_word)];
  std::fill(grad_input.begin(), grad_input.end(), T{});
  double lp = 0;
  for (std::size_t j = 0; j < pts.size(); ++j) {
    const auto node = nodes.row(static_cast<std::size_t>(pts[j]));
    const double s = code_sign(code[j]);
    const double x = dot(node, input);
    lp += log_sigmoid(s * x);
    const double g = s * (1.0 - sigmoid(s * x));
    auto gn = grad_nodes.row(static_cast<std::size_t>(pts[j]));
    for (std::size_t k = 0; k < input.size(); ++k) {
      grad_input[k] += static_cast<T>(g * node[k]);
      gn[k] += static_cast<T>(g * input[k]);
    }
  }
  return lp;
}

// One ascent step on weight * log Pr(output_word | input). Node vectors on the
// path are updated in place; the input-side step is accumulated into
// input_step (the caller applies it). Returns -log Pr before the update.
template <typename T>
double hs_sgd_step(const HuffmanTree& tree, Matrix<T>& nodes, std::int32_t output_word, std::span<const T> input,
                   double lr, std::span<double> input_step) {
  const auto& pts = tree.points[static_cast<std::size_t>(output_word)];
  const auto& code = tree.codes[static_cast<std::size_t>(output_word)];
  double loss = 0;
  for (std::size_t j = 0; j < pts.size(); ++j) {
    auto node = nodes.row(static_cast<std::size_t>(pts[j]));
    const double s = code_sign(code[j]);
    const double x = dot(std::span<const T>(node), input);
    loss -= log_sigmoid(s * x);
    const double g = lr * s * (1.0 - sigmoid(s * x));
    for (std::size_t k = 0; k < input.size(); ++k) input_step[k] += g * node[k];
    for (std::size_t k = 0; k < input.size(); ++k) node[k] = static_cast<T>(node[k] + g * input[k]);
  }
  return loss;
}

// hsm.bin: little-endian; magic "DLHS1", u32 |V|, u32 d, per word u32 length,
// length code bytes, length u32 points; then (|V|-1) x d float32 node vectors.
void write_hsm(const std::string& path, const HuffmanTree& tree, const Matrix<float>& nodes);
std::pair<HuffmanTree, Matrix<float>> read_hsm(const std::string& path);

}  // namespace dsner
