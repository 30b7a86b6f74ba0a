#include <cmath>
#include <cstring>
#include <limits>

#include "doctest.h"
#include "dsner/rng.hpp"
#include "dsner/vecfile.hpp"
#include "testutil.hpp"

using namespace dsner;

TEST_CASE("float text format is bit-exact") {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    std::uint32_t bits = static_cast<std::uint32_t>(rng.next());
    float f;
    std::memcpy(&f, &bits, 4);
    if (!std::isfinite(f)) continue;
    const float back = parse_float(format_float(f));
    std::uint32_t bb;
    std::memcpy(&bb, &back, 4);
    REQUIRE(bb == bits);
  }
  CHECK_THROWS_AS(parse_float("abc"), Error);
  CHECK_THROWS_AS(parse_float("1.5x"), Error);
}

TEST_CASE("word2vec text round trip") {
  testutil::TempDir dir;
  Matrix<float> m(3, 2);
  m(0, 0) = 0.1f;
  m(0, 1) = -2.5e-8f;
  m(1, 0) = 3.0f;
  m(2, 1) = std::numeric_limits<float>::denorm_min();
  std::vector<std::string> words{"a", "bank#1", "Ünïcode"};
  write_word2vec_text(dir.file("v.vec"), words, m);
  auto back = read_word2vec_text(dir.file("v.vec"));
  CHECK(back.words == words);
  CHECK(back.vectors == m);
}

TEST_CASE("malformed vector files") {
  testutil::TempDir dir;
  write_file(dir.file("a.vec"), "2 3\nx 1 2 3\n");
  CHECK_THROWS_AS(read_word2vec_text(dir.file("a.vec")), Error);
  write_file(dir.file("b.vec"), "1 3\nx 1 2\n");
  CHECK_THROWS_AS(read_word2vec_text(dir.file("b.vec")), Error);
}
