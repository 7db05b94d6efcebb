#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "stickslip/error.hpp"
#include "stickslip/lattice.hpp"

using namespace stickslip;

namespace {

LatticeConfig plate() {
  LatticeConfig c;
  c.coupling_mode = CouplingMode::full_plate;
  return c;
}

std::vector<Vec2> zeros(const LatticeConfig &c) { return std::vector<Vec2>(c.block_count()); }

}  // namespace

TEST_CASE("net force vanishes at rest") {
  for (auto mode : {CouplingMode::full_plate, CouplingMode::perimeter_frame}) {
    auto c = plate();
    c.coupling_mode = mode;
    for (const auto &f : net_force(c, zeros(c))) CHECK(norm(f) == 0.0);
  }
}

TEST_CASE("uniform displacement only loads the frame springs") {
  const auto c = plate();
  const Vec2 d{0.013, -0.007};
  std::vector<Vec2> field(c.block_count(), d);
  for (const auto &f : net_force(c, field)) {
    CHECK(f.x == doctest::Approx(c.loading_stiffness * d.x).epsilon(1e-12));
    CHECK(f.y == doctest::Approx(c.loading_stiffness * d.y).epsilon(1e-12));
  }
}

TEST_CASE("single displaced interior block") {
  const Vec2 l{0.01, 0.02};
  auto c = plate();
  auto field = zeros(c);
  const auto centre = c.index(2, 2);
  field[centre] = l;
  auto f = net_force(c, field)[centre];
  const double k = c.loading_stiffness + 4 * c.coupling_stiffness;
  CHECK(f.x == doctest::Approx(k * l.x));
  CHECK(f.y == doctest::Approx(k * l.y));

  c.coupling_mode = CouplingMode::perimeter_frame;
  f = net_force(c, field)[centre];
  CHECK(f.x == doctest::Approx(4 * c.coupling_stiffness * l.x));
  CHECK(f.y == doctest::Approx(4 * c.coupling_stiffness * l.y));
}

TEST_CASE("open boundary drops missing neighbours") {
  const Vec2 l{0.01, 0.0};
  const auto c = plate();
  auto field = zeros(c);
  field[c.index(0, 0)] = l;
  const auto f = net_force(c, field)[c.index(0, 0)];
  CHECK(f.x == doctest::Approx((c.loading_stiffness + 2 * c.coupling_stiffness) * l.x));
}

TEST_CASE("net force is linear") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (auto mode : {CouplingMode::full_plate, CouplingMode::perimeter_frame}) {
    auto c = plate();
    c.coupling_mode = mode;
    c.rows = 4;
    c.cols = 6;
    for (int trial = 0; trial < 20; ++trial) {
      auto l1 = zeros(c), l2 = zeros(c), mix = zeros(c);
      const double a = u(gen) * 20, b = u(gen) * 20;
      for (std::size_t i = 0; i < l1.size(); ++i) {
        l1[i] = {u(gen), u(gen)};
        l2[i] = {u(gen), u(gen)};
        mix[i] = a * l1[i] + b * l2[i];
      }
      const auto f1 = net_force(c, l1), f2 = net_force(c, l2), fm = net_force(c, mix);
      for (std::size_t i = 0; i < fm.size(); ++i) {
        CHECK(norm(fm[i] - (a * f1[i] + b * f2[i])) < 1e-12);
      }
    }
  }
}

TEST_CASE("dimension mismatch is a configuration error") {
  const auto c = plate();
  std::vector<Vec2> field(c.block_count() - 1);
  try {
    net_force(c, field);
    FAIL("expected an error");
  } catch (const Error &e) {
    CHECK(e.kind() == ErrorKind::config);
  }
}

TEST_CASE("validation enforces the timestep bound") {
  auto c = plate();
  c.timestep = c.stability_limit() * 1.01;
  CHECK_THROWS_AS(c.validate(), Error);
  c.timestep = c.stability_limit() * 0.99;
  CHECK_NOTHROW(c.validate());
  c = plate();
  c.kinetic_friction = 2 * c.static_threshold;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("frame anchors move rigidly") {
  LatticeConfig c;  // perimeter frame, 16 anchors
  const auto rest = frame_anchor_positions(rest_pose(c), c);
  REQUIRE(rest.size() == 16);

  SUBCASE("identity pose") {
    const auto same = frame_anchor_positions(rest_pose(c), c);
    for (std::size_t i = 0; i < rest.size(); ++i) CHECK(same[i] == rest[i]);
  }
  SUBCASE("translation") {
    auto pose = rest_pose(c);
    pose.translation = {0.1, -0.25};
    const auto moved = frame_anchor_positions(pose, c);
    for (std::size_t i = 0; i < rest.size(); ++i) CHECK(norm(moved[i] - (rest[i] + pose.translation)) < 1e-15);
  }
  SUBCASE("quarter turn about the centre") {
    auto pose = rest_pose(c);
    pose.rotation = std::numbers::pi / 2;
    const auto turned = frame_anchor_positions(pose, c);
    for (std::size_t i = 0; i < rest.size(); ++i)
      for (std::size_t j = 0; j < rest.size(); ++j)
        CHECK(norm(turned[i] - turned[j]) == doctest::Approx(norm(rest[i] - rest[j])).epsilon(1e-12));
    // corners are indices 0, 4, 11, 15 in row-major perimeter order
    const std::size_t corners[4] = {0, 4, 15, 11};
    for (std::size_t k = 0; k < 4; ++k) {
      bool hit = false;
      for (std::size_t m = 0; m < 4; ++m) hit |= norm(turned[corners[k]] - rest[corners[m]]) < 1e-12;
      CHECK(hit);
      CHECK(norm(turned[corners[k]] - rest[corners[k]]) > 0.1);
    }
  }
}

TEST_CASE("huge static threshold keeps everything stuck") {
  auto c = plate();
  c.static_threshold = 1e9;
  c.kinetic_friction = 0.5;
  StickSlipIntegrator integ(c);
  auto pose = rest_pose(c);
  auto s = make_rest_state(c, pose);
  const auto before = s.blocks;
  for (int i = 0; i < 50; ++i) {
    pose.translation = pose.translation + Vec2{0.01, 0.005};
    pose.rotation += 0.01;
    s = integ.step(s, pose);
    CHECK_FALSE(s.any_slipping());
  }
  for (std::size_t i = 0; i < before.size(); ++i) {
    CHECK(s.blocks[i].position == before[i].position);
    CHECK(s.blocks[i].velocity == Vec2{});
  }
}

TEST_CASE("frictionless uniform mode oscillates at the closed-form period") {
  auto c = plate();
  c.static_threshold = 0.0;
  c.kinetic_friction = 0.0;
  c.stick_speed = 0.0;
  const double period = 2 * std::numbers::pi * std::sqrt(c.block_mass / c.loading_stiffness);
  c.timestep = period / 1000;
  StickSlipIntegrator integ(c);
  const auto pose = rest_pose(c);
  auto s = make_rest_state(c, pose);
  for (auto &b : s.blocks) b.position += Vec2{0.02, 0.0};
  apply_pose(s, c, pose);
  std::vector<double> x;
  for (int i = 0; i < 11500; ++i) {
    x.push_back(s.blocks[0].displacement.x);
    s = integ.step(s, pose);
  }
  const auto t = oracle::rising_crossings(x, c.timestep);
  REQUIRE(t.size() >= 11);
  const double measured = (t[10] - t[0]) / 10;
  CHECK(std::abs(measured - period) / period < 0.01);
}

TEST_CASE("energy never rises with the frame fixed") {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    LatticeConfig c;
    c.coupling_mode = trial % 2 ? CouplingMode::full_plate : CouplingMode::perimeter_frame;
    StickSlipIntegrator integ(c);
    const auto pose = rest_pose(c);
    auto s = make_rest_state(c, pose);
    for (auto &b : s.blocks) {
      b.position += Vec2{0.05 * u(gen), 0.05 * u(gen)};
      if (u(gen) > 0) {
        b.phase = Phase::sliding;
        b.velocity = {0.2 * u(gen), 0.2 * u(gen)};
      }
    }
    apply_pose(s, c, pose);
    double e = total_energy(s, c);
    bool slid = false;
    for (int k = 0; k < 300; ++k) {
      s = integ.step(s, pose);
      const double next = total_energy(s, c);
      CHECK(next <= e + 1e-9 * e);
      if (s.any_slipping() && e > 0) CHECK(next < e);
      slid |= s.any_slipping();
      e = next;
    }
    CHECK(slid);
  }
}

TEST_CASE("non-finite state names the block") {
  LatticeConfig c;
  StickSlipIntegrator integ(c);
  auto s = make_rest_state(c, rest_pose(c));
  s.blocks[7].velocity.x = std::nan("");
  try {
    integ.step(s, rest_pose(c));
    FAIL("expected divergence");
  } catch (const DivergenceError &e) {
    CHECK(e.block() == 7);
    CHECK(e.kind() == ErrorKind::divergence);
  }
}
