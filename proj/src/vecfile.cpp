#include "dsner/vecfile.hpp"

#include <charconv>
#include <sstream>

namespace dsner {

std::string format_float(float v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

float parse_float(const std::string& s) {
  float v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail(ErrorKind::parse, "bad float: " + s);
  return v;
}

void write_word2vec_text(const std::string& path, const std::vector<std::string>& words, const Matrix<float>& vectors) {
  if (words.size() != vectors.rows()) fail(ErrorKind::invalid_argument, "word/vector count mismatch");
  std::string out;
  out += std::to_string(vectors.rows()) + " " + std::to_string(vectors.cols()) + "\n";
  for (std::size_t r = 0; r < vectors.rows(); ++r) {
    out += words[r];
    for (float v : vectors.row(r)) {
      out += ' ';
      out += format_float(v);
    }
    out += '\n';
  }
  write_file(path, out);
}

TextVectors read_word2vec_text(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::parse, path + ": empty vector file");
  auto header = split_ws(line);
  if (header.size() != 2) fail(ErrorKind::parse, path + ": bad header");
  const std::size_t rows = std::stoull(header[0]);
  const std::size_t dim = std::stoull(header[1]);
  TextVectors tv;
  tv.vectors = Matrix<float>(rows, dim);
  tv.words.reserve(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!std::getline(in, line)) fail(ErrorKind::parse, path + ": expected " + std::to_string(rows) + " rows");
    auto cols = split_ws(line);
    if (cols.size() != dim + 1) fail(ErrorKind::parse, path + ": row " + std::to_string(r + 2) + " has wrong width");
    tv.words.push_back(cols[0]);
    auto row = tv.vectors.row(r);
    for (std::size_t k = 0; k < dim; ++k) row[k] = parse_float(cols[k + 1]);
  }
  return tv;
}

}  // namespace dsner
