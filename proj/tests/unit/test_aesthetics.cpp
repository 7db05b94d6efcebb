#include <doctest.h>

#include <sstream>

#include "oracles.hpp"
#include "stickslip/aesthetics.hpp"
#include "stickslip/error.hpp"

using namespace stickslip;

namespace {

BitMatrix from(const oracle::Grid &g) {
  BitMatrix m(g.size(), g[0].size());
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c) m.set(r, c, g[r][c] != 0);
  return m;
}

BitMatrix checkerboard(std::size_t n) {
  BitMatrix m(n, n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) m.set(r, c, (r + c) % 2 == 1);
  return m;
}

}  // namespace

TEST_CASE("light update") {
  SUBCASE("dark stays dark") {
    const auto f = light_update(LightFrame::dark(5, 5), BitMatrix(5, 5), 0.8);
    CHECK(f.lit.count() == 0);
    for (double v : f.intensity) CHECK(v == 0.0);
    CHECK(f.tick == 1);
  }
  SUBCASE("decay after one slip") {
    BitMatrix s(5, 5);
    s.set(2, 3, true);
    auto f = light_update(LightFrame::dark(5, 5), s, 0.8);
    CHECK(f.intensity[2 * 5 + 3] == 1.0);
    CHECK(f.lit.at(2, 3));
    f = light_update(f, BitMatrix(5, 5), 0.8);
    CHECK(f.intensity[2 * 5 + 3] == doctest::Approx(0.8));
    CHECK(f.lit.at(2, 3));
    for (int i = 0; i < 3; ++i) f = light_update(f, BitMatrix(5, 5), 0.8);
    CHECK_FALSE(f.lit.at(2, 3));  // 0.8^4 < 0.5
  }
  SUBCASE("repeated slips pin the cell") {
    BitMatrix s(5, 5);
    s.set(0, 0, true);
    auto f = LightFrame::dark(5, 5);
    for (int i = 0; i < 10; ++i) {
      f = light_update(f, s, 0.8);
      CHECK(f.intensity[0] == 1.0);
    }
  }
  CHECK_THROWS_AS(light_update(LightFrame::dark(5, 5), BitMatrix(4, 5), 0.8), Error);
}

TEST_CASE("score examples") {
  const auto cb = checkerboard(5);
  CHECK(complexity_score(cb) == 1.0);
  CHECK(order_score(cb) == 1.0);
  const auto s = birkhoff(cb);
  REQUIRE(s.defined());
  CHECK(*s.birkhoff == 1.0);

  const BitMatrix off(5, 5);
  const auto d = birkhoff(off);
  CHECK(d.order == 1.0);
  CHECK(d.complexity == 0.0);
  CHECK_FALSE(d.defined());

  BitMatrix on(5, 5);
  for (auto &b : on.bits) b = 1;
  CHECK(complexity_score(on) == 0.0);

  BitMatrix centre(5, 5);
  centre.set(2, 2, true);
  const auto c = birkhoff(centre);
  CHECK(c.complexity == 0.1);
  CHECK(c.order == 1.0);
  CHECK(*c.birkhoff == doctest::Approx(10.0).epsilon(1e-12));

  // Lit corner on the diagonal: the corner and its image both differ under
  // each mirror and the half turn, 23/25 each, and the transpose fixes it.
  BitMatrix corner(5, 5);
  corner.set(0, 0, true);
  CHECK(order_score(corner) == doctest::Approx((3 * 23.0 / 25 + 1.0) / 4).epsilon(1e-15));
  CHECK(order_score(corner) == doctest::Approx(0.94));
}

TEST_CASE("all 512 3x3 patterns agree with the reference scores") {
  for (unsigned bits = 0; bits < 512; ++bits) {
    oracle::Grid g(3, std::vector<int>(3));
    for (std::size_t i = 0; i < 9; ++i) g[i / 3][i % 3] = (bits >> i) & 1;
    const auto m = from(g);
    const double c = complexity_score(m), o = order_score(m);
    CHECK(c == doctest::Approx(oracle::complexity(g)).epsilon(1e-15));
    CHECK(o == doctest::Approx(oracle::order(g)).epsilon(1e-15));
    CHECK(c >= 0.0);
    CHECK(c <= 1.0);
    CHECK(o >= 0.0);
    CHECK(o <= 1.0);
    // global flip invariance
    BitMatrix flipped = m;
    for (auto &b : flipped.bits) b ^= 1;
    CHECK(complexity_score(flipped) == c);
    CHECK(order_score(flipped) == o);
  }
}

TEST_CASE("non-square grids use three symmetries") {
  const oracle::Grid g = {{1, 0, 0, 1}, {0, 1, 1, 0}};
  CHECK(order_score(from(g)) == doctest::Approx(oracle::order(g)));
  CHECK(complexity_score(from(g)) == doctest::Approx(oracle::complexity(g)));
}

TEST_CASE("hex and run-length encodings") {
  BitMatrix m(5, 5);
  m.set(0, 0, true);
  m.set(0, 1, true);
  m.set(4, 4, true);
  CHECK(to_hex(m) == "c000008");
  CHECK(from_hex(to_hex(m), 5, 5) == m);
  CHECK(rle_encode(m) == "0,2,22,1");
  CHECK(rle_decode(rle_encode(m), 5, 5) == m);
  CHECK(rle_encode(BitMatrix(2, 2)) == "4");
  CHECK_THROWS_AS(rle_decode("3", 2, 2), Error);
  CHECK_THROWS_AS(from_hex("zz", 2, 2), Error);
}

TEST_CASE("light log folds repeats and expands them back") {
  BitMatrix a(5, 5), b(5, 5);
  b.set(1, 1, true);
  std::stringstream ss;
  {
    LightLogWriter w(ss);
    w.push(1, a);
    w.push(2, a);
    w.push(3, a);
    w.push(4, b);
    w.push(5, a);
  }
  std::size_t lines = 0;
  for (std::string line; std::getline(ss, line);) ++lines;
  CHECK(lines == 3);
  ss.clear();
  ss.seekg(0);
  const auto recs = read_light_log(ss);
  REQUIRE(recs.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(recs[i].tick == i + 1);
    CHECK(recs[i].lit == (i == 3 ? b : a));
  }

  std::stringstream bad("{\"tick\": 1, \"rows\": 5}\n");
  CHECK_THROWS_AS(read_light_log(bad), FormatError);
}

TEST_CASE("score csv") {
  std::stringstream ss;
  write_score_csv_header(ss);
  write_score_csv_row(ss, 3, birkhoff(BitMatrix(5, 5)));
  BitMatrix centre(5, 5);
  centre.set(2, 2, true);
  write_score_csv_row(ss, 4, birkhoff(centre));
  std::string h, r1, r2;
  std::getline(ss, h);
  std::getline(ss, r1);
  std::getline(ss, r2);
  CHECK(h == "tick,O,C,M");
  CHECK(r1 == "3,1,0,NaN");
  CHECK(r2.rfind("4,1,0.1,", 0) == 0);
}
