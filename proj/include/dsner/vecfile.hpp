#pragma once

#include <string>
#include <vector>

#include "dsner/common.hpp"

namespace dsner {

// word2vec text format: "<rows> <dim>" header, then "token v1 ... v_dim".
// Values are written in shortest round-trip form, so reading back is bit-exact.
struct TextVectors {
  std::vector<std::string> words;
  Matrix<float> vectors;
};

void write_word2vec_text(const std::string& path, const std::vector<std::string>& words, const Matrix<float>& vectors);
TextVectors read_word2vec_text(const std::string& path);

std::string format_float(float v);
float parse_float(const std::string& s);

}  // namespace dsner
