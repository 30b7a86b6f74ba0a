#include "dsner/hsoftmax.hpp"

#include <bit>
#include <cstring>
#include <queue>

namespace dsner {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

HuffmanTree build_huffman(const std::vector<std::uint64_t>& counts) {
  const std::size_t n = counts.size();
  if (n < 2) fail(ErrorKind::invalid_argument, "hierarchical softmax needs at least 2 words");

  using Item = std::pair<std::uint64_t, std::size_t>;  // (count, node id)
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  for (std::size_t i = 0; i < n; ++i) heap.emplace(counts[i], i);

  // parent[node] and the bit on the edge into node
  std::vector<std::size_t> parent(2 * n - 1, 0);
  std::vector<std::uint8_t> bit(2 * n - 1, 0);
  std::size_t next = n;
  while (heap.size() > 1) {
    auto [c1, a] = heap.top();
    heap.pop();
    auto [c2, b] = heap.top();
    heap.pop();
    parent[a] = next;
    parent[b] = next;
    bit[a] = 0;
    bit[b] = 1;
    heap.emplace(c1 + c2, next);
    ++next;
  }
  const std::size_t root = next - 1;

  HuffmanTree tree;
  tree.node_count = n - 1;
  tree.codes.resize(n);
  tree.points.resize(n);
  for (std::size_t w = 0; w < n; ++w) {
    std::vector<std::uint8_t> code;
    std::vector<std::int32_t> pts;
    for (std::size_t cur = w; cur != root; cur = parent[cur]) {
      code.push_back(bit[cur]);
      pts.push_back(static_cast<std::int32_t>(parent[cur] - n));
    }
    tree.codes[w].assign(code.rbegin(), code.rend());
    tree.points[w].assign(pts.rbegin(), pts.rend());
  }
  return tree;
}

HuffmanTree build_huffman(const Vocabulary& vocab) {
  std::vector<std::uint64_t> counts;
  counts.reserve(vocab.size());
  for (const auto& e : vocab.entries()) counts.push_back(e.count);
  return build_huffman(counts);
}

namespace {

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  Reader(const std::string& data, const std::string& path) : data_(data), path_(path) {}
  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > data_.size()) fail(ErrorKind::parse, path_ + ": truncated");
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string bytes(std::size_t n) {
    if (pos_ + n > data_.size()) fail(ErrorKind::parse, path_ + ": truncated");
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  const std::string& data_;
  const std::string& path_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_hsm(const std::string& path, const HuffmanTree& tree, const Matrix<float>& nodes) {
  std::string out = "DLHS1";
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tree.vocab_size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(nodes.cols()));
  for (std::size_t w = 0; w < tree.vocab_size(); ++w) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(tree.codes[w].size()));
    for (auto b : tree.codes[w]) out.push_back(static_cast<char>(b));
    for (auto p : tree.points[w]) put<std::uint32_t>(out, static_cast<std::uint32_t>(p));
  }
  for (float v : nodes.data()) put<float>(out, v);
  write_file(path, out);
}

std::pair<HuffmanTree, Matrix<float>> read_hsm(const std::string& path) {
  const std::string data = read_file(path);
  Reader r(data, path);
  if (r.bytes(5) != "DLHS1") fail(ErrorKind::parse, path + ": bad magic");
  const auto n = r.get<std::uint32_t>();
  const auto d = r.get<std::uint32_t>();
  if (n < 2) fail(ErrorKind::parse, path + ": vocabulary too small");
  HuffmanTree tree;
  tree.node_count = n - 1;
  tree.codes.resize(n);
  tree.points.resize(n);
  for (std::size_t w = 0; w < n; ++w) {
    const auto len = r.get<std::uint32_t>();
    if (len > 64) fail(ErrorKind::parse, path + ": code too long");
    for (std::uint32_t i = 0; i < len; ++i) tree.codes[w].push_back(static_cast<std::uint8_t>(r.bytes(1)[0]));
    for (std::uint32_t i = 0; i < len; ++i) {
      const auto p = r.get<std::uint32_t>();
      if (p >= n - 1) fail(ErrorKind::parse, path + ": node id out of range");
      tree.points[w].push_back(static_cast<std::int32_t>(p));
    }
  }
  Matrix<float> nodes(n - 1, d);
  for (auto& v : nodes.data()) v = r.get<float>();
  if (!r.done()) fail(ErrorKind::parse, path + ": trailing bytes");
  return {std::move(tree), std::move(nodes)};
}

}  // namespace dsner
