#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "stickslip/error.hpp"
#include "stickslip/service.hpp"

using namespace stickslip;
using nlohmann::json;

namespace {

std::string steer(const std::string &kind, json params) {
  return json{{"type", "steer"}, {"kind", kind}, {"params", params}, {"ts", 12.5}}.dump();
}

SteerCommand velocity(const std::string &client, double vx, double vy, double w) {
  return SteerCommand{0.0, SteerKind::set_frame_velocity, vx, vy, w, client};
}

std::vector<WorldSnapshot> run(World &w, std::size_t ticks, const std::vector<SteerCommand> &first = {}) {
  std::vector<WorldSnapshot> out;
  out.push_back(w.tick(first).snapshot);
  for (std::size_t i = 1; i < ticks; ++i) out.push_back(w.tick().snapshot);
  return out;
}

}  // namespace

TEST_CASE("ingest accepts and clamps") {
  const ServiceConfig cfg;
  auto r = ingest_command(steer("set_frame_velocity", {{"vx", 0.1}, {"vy", 0}, {"omega", 0}}), "a", cfg);
  REQUIRE(r.accepted());
  CHECK_FALSE(r.clamped);
  CHECK(*r.command == SteerCommand{12.5, SteerKind::set_frame_velocity, 0.1, 0.0, 0.0, "a"});
  CHECK(json::parse(r.reply())["type"] == "ack");

  r = ingest_command(steer("set_frame_velocity", {{"vx", 10 * cfg.max_speed}, {"vy", 0}, {"omega", 0}}), "a", cfg);
  REQUIRE(r.accepted());
  CHECK(r.clamped);
  CHECK(r.command->a == doctest::Approx(cfg.max_speed));
  CHECK(json::parse(r.reply())["clamped"] == true);

  r = ingest_command(steer("nudge", {{"dx", 0.01}, {"dy", 0.0}, {"dtheta", 0.5}}), "a", cfg);
  REQUIRE(r.accepted());
  CHECK(r.clamped);
  CHECK(r.command->c == doctest::Approx(cfg.max_nudge_angle));

  r = ingest_command(steer("release", json::object()), "a", cfg);
  REQUIRE(r.accepted());
  CHECK(r.command->kind == SteerKind::release);
}

TEST_CASE("ingest rejects bad input") {
  const ServiceConfig cfg;
  auto r = ingest_command("\xff\xfe garbage {", "a", cfg);
  CHECK_FALSE(r.accepted());
  CHECK(r.error == "protocol");
  CHECK(json::parse(r.reply())["type"] == "error");

  r = ingest_command(steer("teleport", json::object()), "a", cfg);
  CHECK(r.error == "unsupported");

  r = ingest_command(json{{"type", "subscribe"}}.dump(), "a", cfg);
  CHECK(r.error == "unsupported");

  r = ingest_command(steer("set_frame_velocity", {{"vx", "fast"}}), "a", cfg);
  CHECK(r.error == "protocol");

  r = ingest_command(steer("set_frame_velocity", {{"vx", 0.1}, {"warp", 1}}), "a", cfg);
  CHECK(r.error == "protocol");

  r = ingest_command(std::string(cfg.max_message_bytes + 1, ' '), "a", cfg);
  CHECK(r.error == "oversized");
}

TEST_CASE("idle world only advances the tick counter") {
  World w(Settings{}, 3);
  const auto first = w.snapshot();
  const auto out = w.tick();
  CHECK(out.snapshot.tick == first.tick + 1);
  CHECK(out.snapshot.blocks == first.blocks);
  CHECK(out.snapshot.pose == first.pose);
  CHECK_FALSE(out.montage.active);
  CHECK(out.triggers.empty());
  CHECK(w.time() == doctest::Approx(Settings{}.lattice.timestep));
}

TEST_CASE("slow frame drift below the static bound never slips") {
  Settings s;
  const auto &lat = s.lattice;
  // With every block stuck at its site, only frame springs load the
  // coupled blocks: |F| = K_L * |v| * t. Keep that below F_s for the run.
  const double seconds = 5.0;
  const double v = 0.5 * lat.static_threshold / (lat.loading_stiffness * seconds);
  World w(s, 1);
  const auto ticks = static_cast<std::size_t>(seconds / lat.timestep);
  const auto snaps = run(w, ticks, {velocity("a", v, 0.0, 0.0)});
  for (std::size_t i = 0; i < snaps.size(); ++i) {
    for (const auto &b : snaps[i].blocks) REQUIRE_FALSE(b.slipping);
    const double t = static_cast<double>(i + 1) * lat.timestep;
    REQUIRE(snaps[i].pose.translation.x == doctest::Approx(v * t).epsilon(1e-9));
  }
  CHECK(w.catalog(true).empty());
}

TEST_CASE("velocity commands sum then clamp, in any order") {
  Settings s;
  const std::vector<SteerCommand> cmds = {velocity("a", 0.15, 0.0, 0.3), velocity("b", 0.15, 0.05, 0.3),
                                          velocity("c", -0.05, 0.02, -0.1)};
  World ref(s, 5);
  ref.tick(cmds);
  const auto [v, omega] = ref.frame_velocity();
  CHECK(norm(v) == doctest::Approx(s.service.max_speed));
  CHECK(omega == doctest::Approx(0.5));

  auto perm = cmds;
  std::sort(perm.begin(), perm.end(), [](auto &l, auto &r) { return l.client_id < r.client_id; });
  do {
    World w(s, 5);
    World base(s, 5);
    const auto a = run(w, 200, perm);
    const auto b = run(base, 200, cmds);
    CHECK(a == b);
  } while (std::next_permutation(perm.begin(), perm.end(),
                                 [](auto &l, auto &r) { return l.client_id < r.client_id; }));
}

TEST_CASE("release drops a client's contribution") {
  World w(Settings{}, 5);
  w.tick(std::vector{velocity("a", 0.1, 0, 0), velocity("b", 0.05, 0, 0)});
  SteerCommand rel;
  rel.kind = SteerKind::release;
  rel.client_id = "a";
  w.tick(std::vector{rel});
  CHECK(w.frame_velocity().first.x == doctest::Approx(0.05));
}

TEST_CASE("commands only affect the tick they arrive in") {
  World a(Settings{}, 9), b(Settings{}, 9);
  const auto sa = run(a, 10);
  const auto sb = run(b, 5);
  b.tick(std::vector{velocity("x", 0.1, 0, 0)});
  for (std::size_t i = 0; i < 5; ++i) CHECK(sa[i] == sb[i]);
  CHECK_FALSE(b.snapshot().pose == sa[5].pose);
}

TEST_CASE("montage rules") {
  Settings s;
  s.drive.jitter = 0.0;
  World w(s, 11);
  // Drive hard enough to slip, then stop and let it settle.
  std::optional<double> last_shuffle;
  double last_slip = -1.0;
  std::uint64_t shuffles = 0;
  std::size_t pair = w.montage().current_pair;
  for (std::size_t i = 0; i < 20000; ++i) {
    std::vector<SteerCommand> cmds;
    if (i == 0) cmds.push_back(velocity("a", 0.2, 0.05, 0.2));
    if (i == 6000) cmds.push_back(SteerCommand{0, SteerKind::release, 0, 0, 0, "a"});
    const auto out = w.tick(cmds);
    const double now = out.snapshot.time;
    if (std::any_of(out.snapshot.blocks.begin(), out.snapshot.blocks.end(), [](auto &b) { return b.slipping; }))
      last_slip = now;
    const bool should = last_slip >= 0 && now - last_slip <= s.service.quiescence_s;
    REQUIRE(out.montage.active == should);
    if (out.montage.shuffles != shuffles) {
      REQUIRE(out.montage.active);
      REQUIRE(out.montage.current_pair != pair);
      if (last_shuffle) REQUIRE(now - *last_shuffle >= 0.5 - 1e-9);
      last_shuffle = now;
    } else {
      REQUIRE(out.montage.current_pair == pair);
    }
    shuffles = out.montage.shuffles;
    pair = out.montage.current_pair;
  }
  CHECK(shuffles > 2);
  CHECK_FALSE(w.montage().active);
}

TEST_CASE("message payload shapes") {
  World w(Settings{}, 2);
  const auto out = w.tick(std::vector{velocity("a", 0.1, 0, 0)});
  const auto st = json::parse(snapshot_json(out.snapshot));
  CHECK(st["type"] == "state");
  CHECK(st["tick"] == 1);
  CHECK(st["frame"].contains("theta"));
  CHECK(st["blocks"].size() == 25);
  CHECK(st["blocks"][0].contains("p"));
  CHECK(st["blocks"][0]["phase"].is_string());
  const auto li = json::parse(light_json(out.light));
  CHECK(li["type"] == "light");
  CHECK(li["rle"] == "25");
  const auto mo = json::parse(montage_json(out.montage));
  CHECK(mo["type"] == "montage");
  CHECK(mo["active"] == false);
  CHECK(json::parse(triggers_json({}))["events"].empty());
}

TEST_CASE("session record round trip and replay") {
  Settings s;
  SessionRecorder rec(s, 21);
  std::vector<WorldSnapshot> live;
  for (std::size_t i = 0; i < 3000; ++i) {
    std::vector<SteerCommand> cmds;
    if (i == 10) cmds.push_back(velocity("a", 0.2, 0.0, 0.1));
    if (i == 1500) cmds.push_back(SteerCommand{0, SteerKind::nudge, 0.01, -0.01, 0.02, "b"});
    if (i == 2000) cmds.push_back(SteerCommand{0, SteerKind::release, 0, 0, 0, "a"});
    live.push_back(rec.tick(cmds).snapshot);
  }
  const auto record = rec.record();
  CHECK(record.total_ticks == 3000);
  CHECK(record.commands.size() == 3);
  const auto bytes = encode_session(record);
  const auto back = decode_session(bytes);
  CHECK(back.seed == 21);
  CHECK(back.commands == record.commands);
  CHECK(back.total_ticks == 3000);
  CHECK(settings_to_json(back.settings) == settings_to_json(record.settings));

  std::vector<WorldSnapshot> replayed;
  replay_session(back, [&](const TickOutput &o) { replayed.push_back(o.snapshot); });
  REQUIRE(replayed.size() == live.size());
  for (std::size_t i = 0; i < live.size(); ++i) REQUIRE(snapshot_digest(replayed[i]) == snapshot_digest(live[i]));
  CHECK(replayed == live);
}

TEST_CASE("empty command log replays as a free run") {
  SessionRecord r;
  r.seed = 4;
  r.total_ticks = 500;
  std::vector<WorldSnapshot> a;
  replay_session(decode_session(encode_session(r)), [&](const TickOutput &o) { a.push_back(o.snapshot); });
  World w(Settings{}, 4);
  const auto b = run(w, 500);
  CHECK(a == b);
}

TEST_CASE("session record errors") {
  SessionRecord r;
  r.seed = 1;
  r.total_ticks = 10;
  r.commands.push_back({3, velocity("a", 0.1, 0, 0)});
  const auto bytes = encode_session(r);

  for (std::size_t cut : {bytes.size() - 1, bytes.size() - 10, bytes.size() / 2, std::size_t{20}}) {
    CAPTURE(cut);
    std::vector<std::uint8_t> t(bytes.begin(), bytes.begin() + static_cast<long>(cut));
    try {
      decode_session(t);
      FAIL("expected integrity error");
    } catch (const FormatError &e) {
      CHECK(e.kind() == ErrorKind::integrity);
      CHECK(e.offset() <= cut);
      CHECK(std::string(e.what()).find("offset") != std::string::npos);
    }
  }

  auto flipped = bytes;
  flipped[30] ^= 0x01;
  try {
    decode_session(flipped);
    FAIL("expected integrity error");
  } catch (const FormatError &e) {
    CHECK(e.kind() == ErrorKind::integrity);
  }

  auto version = bytes;
  version[8] = 9;
  try {
    decode_session(version);
    FAIL("expected version error");
  } catch (const FormatError &e) {
    CHECK(e.kind() == ErrorKind::version);
    CHECK(e.offset() == 8);
  }

  auto magic = bytes;
  magic[0] = 'X';
  try {
    decode_session(magic);
    FAIL("expected format error");
  } catch (const FormatError &e) {
    CHECK(e.kind() == ErrorKind::input_format);
  }
}
