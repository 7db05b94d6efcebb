#include <doctest.h>

#include <json.hpp>

#include "stickslip/config.hpp"
#include "stickslip/error.hpp"

using namespace stickslip;

namespace {

ErrorKind kind_of(auto &&fn) {
  try {
    fn();
  } catch (const Error &e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::parameter;
}

}  // namespace

TEST_CASE("defaults") {
  const Settings s;
  CHECK(s.lattice.rows == 5);
  CHECK(s.lattice.coupling_mode == CouplingMode::perimeter_frame);
  CHECK(s.lattice.coupled_count() == 16);
  CHECK(s.ofc.alpha == 0.22);
  CHECK(s.sonifier.grain_ms == 100);
  CHECK(s.sonifier.hop_ms == 50);
  CHECK(s.service.stream_hz == 30);
  CHECK(s.service.quiescence_s == 0.5);
  CHECK_NOTHROW(s.validate());
}

TEST_CASE("json round trip") {
  Settings s;
  s.lattice.rows = 7;
  s.lattice.boundary = Boundary::frame_anchored;
  s.ofc.alpha = 0.2;
  s.sonifier.layout = LayoutMode::min_max;
  s.events.adjacency = Adjacency::spatial;
  s.seed = 99;
  const auto text = settings_to_json(s);
  const auto back = settings_from_json(text);
  CHECK(settings_to_json(back) == text);
  CHECK(back.lattice.rows == 7);
  CHECK(back.events.rows == 7);
  CHECK(back.sonifier.layout == LayoutMode::min_max);
}

TEST_CASE("file values override the base, missing keys keep it") {
  Settings base;
  base.ofc.alpha = 0.15;
  base.ofc.rows = 32;
  const auto s = settings_from_json(R"({"ofc": {"alpha": 0.2}, "seed": 3})", base);
  CHECK(s.ofc.alpha == 0.2);
  CHECK(s.ofc.rows == 32);
  CHECK(s.seed == 3);
}

TEST_CASE("config errors") {
  CHECK(kind_of([] { settings_from_json(R"({"ofc": {"alpha": 0.3}})").validate(); }) == ErrorKind::config);
  CHECK(kind_of([] { settings_from_json(R"({"ofc": {"alfa": 0.2}})"); }) == ErrorKind::config);
  CHECK(kind_of([] { settings_from_json(R"({"bogus": {}})"); }) == ErrorKind::config);
  CHECK(kind_of([] { settings_from_json(R"({"lattice": {"rows": "five"}})"); }) == ErrorKind::config);
  CHECK(kind_of([] { settings_from_json("{not json"); }) == ErrorKind::config);
  CHECK(kind_of([] { settings_from_json(R"({"lattice": {"timestep": 0.01}})").validate(); }) == ErrorKind::config);
  // a flag can still repair a file value before validation
  auto s = settings_from_json(R"({"ofc": {"alpha": 0.3}})");
  s.ofc.alpha = 0.2;
  CHECK_NOTHROW(s.validate());
  CHECK(kind_of([] { settings_from_json(R"({"lattice": {"coupling_mode": "mesh"}})"); }) == ErrorKind::config);
  CHECK(kind_of([] { load_settings("/nonexistent/settings.json"); }) == ErrorKind::config);
}
