#include <doctest.h>

#include <random>
#include <set>

#include "oracles.hpp"
#include "stickslip/error.hpp"
#include "stickslip/ofc.hpp"

using namespace stickslip;

namespace {

OfcGrid grid(std::size_t rows, std::size_t cols, double alpha, std::vector<double> stress) {
  OfcGrid g;
  g.rows = rows;
  g.cols = cols;
  g.alpha = alpha;
  g.stress = std::move(stress);
  return g;
}

}  // namespace

TEST_CASE("1x1 grid: every avalanche has area 1") {
  for (double alpha : {0.0, 0.1, 0.25}) {
    auto g = grid(1, 1, alpha, {0.3});
    for (int i = 0; i < 20; ++i) {
      const auto a = ofc_drive_and_relax(g);
      CHECK(a.area == 1);
      CHECK(a.topples == 1);
      CHECK(g.stress[0] == 0.0);
    }
  }
}

TEST_CASE("alpha = 0: one topple per avalanche") {
  Rng rng(3);
  auto g = OfcGrid::random(8, 8, 0.0, rng);
  for (int i = 0; i < 200; ++i) {
    const auto a = ofc_drive_and_relax(g);
    CHECK(a.area == 1);
    CHECK(a.topples == 1);
  }
}

TEST_CASE("hand-picked 3x3 state matches the reference relaxation") {
  const std::vector<double> s = {0.90, 0.95, 0.80, 0.97, 0.999, 0.96, 0.70, 0.93, 0.85};
  auto g = grid(3, 3, 0.24, s);
  OfcOptions o;
  o.record_sequence = true;
  const auto got = ofc_drive_and_relax(g, o);
  const auto want = oracle::ofc_relax(s, 3, 3, 0.24);
  CHECK(got.area == want.area);
  CHECK(std::multiset<std::size_t>(got.sequence.begin(), got.sequence.end()) == want.toppled);
  for (std::size_t i = 0; i < 9; ++i) CHECK(g.stress[i] == doctest::Approx(want.stress[i]).epsilon(1e-12));
  CHECK(got.area > 1);
}

TEST_CASE("random near-critical 3x3 states match the reference relaxation") {
  std::mt19937_64 gen(99);
  std::uniform_real_distribution<double> u(0.75, 0.9999);
  int multi = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(9);
    for (auto &x : s) x = u(gen);
    auto g = grid(3, 3, 0.24, s);
    OfcOptions o;
    o.record_sequence = true;
    const auto got = ofc_drive_and_relax(g, o);
    const auto want = oracle::ofc_relax(s, 3, 3, 0.24);
    CHECK(got.area == want.area);
    CHECK(got.topples == want.toppled.size());
    CHECK(std::multiset<std::size_t>(got.sequence.begin(), got.sequence.end()) == want.toppled);
    multi += got.area > 1;
  }
  CHECK(multi > 10);
}

TEST_CASE("stress stays in [0, 1) across a long run") {
  Rng rng(1);
  auto g = OfcGrid::random(16, 16, 0.22, rng);
  for (int i = 0; i < 5000; ++i) {
    ofc_drive_and_relax(g);
    for (double x : g.stress) {
      REQUIRE(x >= 0.0);
      REQUIRE(x < 1.0);
    }
  }
}

TEST_CASE("sweep cap raises runaway") {
  std::vector<double> s(64 * 64, 0.999);
  auto g = grid(64, 64, 0.25, s);
  OfcOptions o;
  o.max_sweeps = 2;
  try {
    ofc_drive_and_relax(g, o);
    FAIL("expected runaway");
  } catch (const Error &e) {
    CHECK(e.kind() == ErrorKind::runaway);
  }
}

TEST_CASE("alpha outside (0, 0.25] is rejected") {
  CHECK_THROWS_AS(grid(3, 3, 0.3, std::vector<double>(9, 0.1)).validate(), Error);
  CHECK_THROWS_AS(grid(3, 3, -0.1, std::vector<double>(9, 0.1)).validate(), Error);
  OfcRunOptions o;
  o.alpha = 0.3;
  o.rows = o.cols = 4;
  o.events = 1;
  CHECK_THROWS_AS(run_ofc(o), Error);
}

TEST_CASE("run_ofc returns the requested count and is seeded") {
  OfcRunOptions o;
  o.rows = o.cols = 8;
  o.burn_in = 500;
  o.events = 1000;
  o.seed = 42;
  const auto a = run_ofc(o);
  const auto b = run_ofc(o);
  CHECK(a.size() == 1000);
  CHECK(a == b);
  CHECK(a.mode == CatalogMode::ofc);
  for (std::size_t i = 1; i < a.size(); ++i) CHECK(a.events[i].t_start >= a.events[i - 1].t_end);
  o.seed = 43;
  CHECK_FALSE(run_ofc(o) == a);
  o.events = 0;
  CHECK(run_ofc(o).empty());
}
