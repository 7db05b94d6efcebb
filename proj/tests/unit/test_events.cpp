#include <doctest.h>

#include <sstream>

#include "stickslip/catalog.hpp"
#include "stickslip/error.hpp"

using namespace stickslip;

namespace {

SlipRecord slip(double t, std::vector<std::size_t> blocks, double d = 0.001) {
  SlipRecord r;
  r.time = t;
  r.blocks = std::move(blocks);
  r.distance.assign(r.blocks.size(), d);
  r.energy_before = 1.0;
  r.energy_after = 0.9;
  return r;
}

SlipRecord quiet(double t) {
  SlipRecord r;
  r.time = t;
  return r;
}

DetectionOptions options(Adjacency adj = Adjacency::temporal) { return DetectionOptions{0.25, adj, 5, 5}; }

}  // namespace

TEST_CASE("empty log gives an empty catalog") {
  const auto c = detect_events({}, options(), 10.0);
  CHECK(c.empty());
  CHECK(c.observation_window == 10.0);
}

TEST_CASE("one block slipping once") {
  const auto c = detect_events({quiet(0.0), slip(0.001, {12}), quiet(0.002)}, options(), 1.0);
  REQUIRE(c.size() == 1);
  CHECK(c.events[0].area == 1);
  CHECK(c.events[0].t_start == 0.001);
  CHECK(c.events[0].moment == doctest::Approx(0.001));
}

TEST_CASE("two bursts ten gaps apart are two events") {
  // Hand enumeration: burst one touches {3, 4, 9}, burst two re-uses block 4
  // and adds 20. Same blocks or not, the quiet spell splits them.
  std::vector<SlipRecord> log;
  double t = 0.0;
  const double dt = 0.001;
  log.push_back(slip(t += dt, {3, 4}));
  log.push_back(slip(t += dt, {4, 9}));
  log.push_back(slip(t += dt, {9}));
  const double gap = options().gap;
  for (double end = t + 10 * gap; t < end;) log.push_back(quiet(t += dt));
  log.push_back(slip(t += dt, {4}));
  log.push_back(slip(t += dt, {20}));
  for (int i = 0; i < 5; ++i) log.push_back(quiet(t += dt));
  for (auto adj : {Adjacency::temporal, Adjacency::spatial}) {
    const auto c = detect_events(log, options(adj), t);
    if (adj == Adjacency::temporal) {
      REQUIRE(c.size() == 2);
      CHECK(c.events[0].area == 3);
      CHECK(c.events[1].area == 2);
      CHECK(c.events[0].moment == doctest::Approx(5 * 0.001));
      CHECK(c.events[1].t_start > c.events[0].t_end + 9 * gap);
    } else {
      // spatial splitting may divide a burst but never merges the two
      CHECK(c.size() >= 2);
      for (const auto &e : c.events) CHECK((e.t_end < 0.01 || e.t_start > 2.0));
    }
  }
}

TEST_CASE("spatial adjacency splits disjoint clusters") {
  // blocks 0 and 24 are opposite corners of a 5x5 lattice
  const auto c = detect_events({slip(0.001, {0, 24}), slip(0.002, {1}), quiet(0.5)}, options(Adjacency::spatial), 1.0);
  REQUIRE(c.size() == 2);
  CHECK(c.events[0].area + c.events[1].area == 3);
}

TEST_CASE("slips inside the gap merge") {
  const auto c = detect_events({slip(0.0, {1}), quiet(0.1), slip(0.2, {2}), quiet(0.3)}, options(), 1.0);
  REQUIRE(c.size() == 1);
  CHECK(c.events[0].area == 2);
  CHECK(c.events[0].t_end == doctest::Approx(0.2));
}

TEST_CASE("timestamps must not go backwards") {
  try {
    detect_events({slip(0.2, {1}), slip(0.1, {2})}, options(), 1.0);
    FAIL("expected an error");
  } catch (const Error &e) {
    CHECK(e.kind() == ErrorKind::input_format);
  }
}

TEST_CASE("catalog csv and json round trips") {
  EventCatalog c;
  c.observation_window = 12.5;
  c.mode = CatalogMode::ofc;
  for (std::uint64_t i = 0; i < 5; ++i) c.events.push_back({i, 0.1 * i, 0.1 * i + 0.05, i + 1, 0.3 * i, 1.0 / 3 * i});
  std::stringstream ss;
  write_catalog_csv(ss, c);
  CHECK(read_catalog_csv(ss) == c);
  CHECK(catalog_from_json(catalog_to_json(c)) == c);

  std::stringstream bad("id,t_start\n1,2\n");
  CHECK_THROWS_AS(read_catalog_csv(bad), FormatError);
}
