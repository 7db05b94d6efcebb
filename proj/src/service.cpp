#include "stickslip/service.hpp"

#include <algorithm>
#include <boost/crc.hpp>
#include <cmath>
#include <cstring>
#include <json.hpp>

#include "stickslip/error.hpp"

namespace stickslip {

using nlohmann::json;

const char *to_string(SteerKind kind) {
  switch (kind) {
    case SteerKind::set_frame_velocity: return "set_frame_velocity";
    case SteerKind::nudge: return "nudge";
    case SteerKind::release: return "release";
  }
  return "release";
}

namespace {

bool clamp_pair(double &x, double &y, double limit) {
  const double n = std::hypot(x, y);
  if (n <= limit) return false;
  x *= limit / n;
  y *= limit / n;
  return true;
}

bool clamp_abs(double &x, double limit) {
  if (std::abs(x) <= limit) return false;
  x = std::copysign(limit, x);
  return true;
}

json params_json(const SteerCommand &c) {
  switch (c.kind) {
    case SteerKind::set_frame_velocity: return {{"vx", c.a}, {"vy", c.b}, {"omega", c.c}};
    case SteerKind::nudge: return {{"dx", c.a}, {"dy", c.b}, {"dtheta", c.c}};
    case SteerKind::release: return json::object();
  }
  return json::object();
}

json vec_json(Vec2 v) { return json::array({v.x, v.y}); }

}  // namespace

bool clamp_command(SteerCommand &command, const ServiceConfig &config) {
  bool changed = false;
  if (command.kind == SteerKind::set_frame_velocity) {
    changed |= clamp_pair(command.a, command.b, config.max_speed);
    changed |= clamp_abs(command.c, config.max_angular_speed);
  } else if (command.kind == SteerKind::nudge) {
    changed |= clamp_pair(command.a, command.b, config.max_nudge);
    changed |= clamp_abs(command.c, config.max_nudge_angle);
  }
  return changed;
}

std::string IngestResult::reply() const {
  if (!command) return json{{"type", "error"}, {"error", error}, {"message", message}}.dump();
  return json{{"type", "ack"},
              {"kind", to_string(command->kind)},
              {"params", params_json(*command)},
              {"clamped", clamped}}
      .dump();
}

IngestResult ingest_command(std::string_view raw, const std::string &client_id, const ServiceConfig &config) {
  IngestResult result;
  auto reject = [&](const char *error, std::string message) {
    result.error = error;
    result.message = std::move(message);
    return result;
  };
  if (raw.size() > config.max_message_bytes)
    return reject("oversized", "message of " + std::to_string(raw.size()) + " bytes exceeds the " +
                                   std::to_string(config.max_message_bytes) + "-byte limit");
  json doc;
  try {
    doc = json::parse(raw);
  } catch (const json::parse_error &e) {
    return reject("protocol", "malformed JSON at byte " + std::to_string(e.byte));
  }
  if (!doc.is_object()) return reject("protocol", "message must be a JSON object");
  if (!doc.contains("type") || !doc["type"].is_string()) return reject("protocol", "missing message type");
  if (doc["type"] != "steer") return reject("unsupported", "unsupported message type '" + doc["type"].get<std::string>() + "'");
  if (!doc.contains("kind") || !doc["kind"].is_string()) return reject("protocol", "missing steer kind");
  SteerCommand cmd;
  cmd.client_id = client_id;
  const auto kind = doc["kind"].get<std::string>();
  if (kind == "set_frame_velocity") cmd.kind = SteerKind::set_frame_velocity;
  else if (kind == "nudge") cmd.kind = SteerKind::nudge;
  else if (kind == "release") cmd.kind = SteerKind::release;
  else return reject("unsupported", "unknown steer kind '" + kind + "'");
  if (doc.contains("ts")) {
    if (!doc["ts"].is_number()) return reject("protocol", "ts must be a number");
    cmd.timestamp = doc["ts"].get<double>();
  }
  json params = json::object();
  if (doc.contains("params")) {
    params = doc["params"];
    if (!params.is_object()) return reject("protocol", "params must be an object");
  }
  const char *names[3] = {"vx", "vy", "omega"};
  if (cmd.kind == SteerKind::nudge) {
    names[0] = "dx";
    names[1] = "dy";
    names[2] = "dtheta";
  }
  double *slots[3] = {&cmd.a, &cmd.b, &cmd.c};
  if (cmd.kind != SteerKind::release) {
    for (int i = 0; i < 3; ++i) {
      if (!params.contains(names[i])) continue;
      const auto &v = params[names[i]];
      if (!v.is_number()) return reject("protocol", std::string("param '") + names[i] + "' must be a number");
      *slots[i] = v.get<double>();
      if (!std::isfinite(*slots[i])) return reject("protocol", std::string("param '") + names[i] + "' is not finite");
    }
    for (const auto &[key, value] : params.items())
      if (key != names[0] && key != names[1] && key != names[2])
        return reject("protocol", "unknown param '" + key + "' for " + kind);
  }
  result.clamped = clamp_command(cmd, config);
  result.command = cmd;
  return result;
}

std::vector<std::pair<std::string, std::string>> placeholder_pairs(std::size_t count) {
  static const char *causes[] = {"dam-reservoir", "fracking-well", "mine-shaft", "geothermal-plant", "wastewater-injection",
                                 "quarry-blast"};
  static const char *effects[] = {"cracked-road", "collapsed-wall", "tilted-house", "split-bridge", "fallen-chimney",
                                  "rockslide"};
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < count; ++i) {
    const auto suffix = i < 6 ? std::string() : "-" + std::to_string(i / 6);
    out.emplace_back(std::string("cause/") + causes[i % 6] + suffix, std::string("effect/") + effects[i % 6] + suffix);
  }
  return out;
}

std::string snapshot_json(const WorldSnapshot &s) {
  json blocks = json::array();
  for (const auto &b : s.blocks)
    blocks.push_back({{"p", vec_json(b.position)},
                      {"v", vec_json(b.velocity)},
                      {"phase", to_string(b.phase)},
                      {"slip", b.slipping}});
  json doc = {{"type", "state"},
              {"tick", s.tick},
              {"time_s", s.time},
              {"frame", {{"x", s.pose.translation.x}, {"y", s.pose.translation.y}, {"theta", s.pose.rotation}}},
              {"rows", s.rows},
              {"cols", s.cols},
              {"blocks", std::move(blocks)},
              {"event_id", nullptr}};
  if (s.event_id) doc["event_id"] = *s.event_id;
  return doc.dump();
}

std::uint64_t snapshot_digest(const WorldSnapshot &snapshot) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : snapshot_json(snapshot)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

std::string triggers_json(std::span<const TriggerEvent> events) {
  json list = json::array();
  for (const auto &e : events)
    list.push_back({{"time", e.time},
                    {"block", {e.block_row, e.block_col}},
                    {"grain_id", e.grain_id},
                    {"gain", e.gain},
                    {"pan", e.pan}});
  return json{{"type", "triggers"}, {"events", std::move(list)}}.dump();
}

std::string light_json(const LightFrame &frame) {
  return json{{"type", "light"},
              {"tick", frame.tick},
              {"rows", frame.lit.rows},
              {"cols", frame.lit.cols},
              {"rle", rle_encode(frame.lit)}}
      .dump();
}

std::string montage_json(const MontageState &m) {
  json pair = nullptr;
  if (m.current_pair < m.image_pairs.size())
    pair = {{"index", m.current_pair},
            {"cause", m.image_pairs[m.current_pair].first},
            {"effect", m.image_pairs[m.current_pair].second}};
  return json{{"type", "montage"}, {"active", m.active}, {"pair", pair}, {"shuffles", m.shuffles}}.dump();
}

// ---------------------------------------------------------------------------

namespace {

Settings checked(Settings s) {
  s.events.rows = s.lattice.rows;
  s.events.cols = s.lattice.cols;
  s.validate();
  return s;
}

}  // namespace

World::World(Settings settings, std::uint64_t seed, const GrainCorpus *corpus)
    : settings_(checked(std::move(settings))),
      seed_(seed),
      corpus_(corpus),
      integrator_(settings_.lattice),
      trigger_(settings_.sonifier, settings_.lattice.cols),
      detector_(settings_.events),
      rng_(seed),
      pose_(rest_pose(settings_.lattice)),
      light_(LightFrame::dark(settings_.lattice.rows, settings_.lattice.cols)) {
  state_ = make_rest_state(settings_.lattice, pose_);
  montage_.image_pairs = placeholder_pairs(settings_.service.montage_pairs);
}

std::pair<Vec2, double> World::frame_velocity() const {
  Vec2 v{};
  double omega = 0.0;
  for (const auto &[client, vel] : velocities_) {
    v = v + vel.first;
    omega += vel.second;
  }
  clamp_pair(v.x, v.y, settings_.service.max_speed);
  clamp_abs(omega, settings_.service.max_angular_speed);
  return {v, omega};
}

WorldSnapshot World::snapshot() const {
  WorldSnapshot s;
  s.tick = tick_;
  s.time = time();
  s.pose = pose_;
  s.blocks = state_.blocks;
  s.rows = state_.rows;
  s.cols = state_.cols;
  s.event_id = detector_.open_event();
  return s;
}

TickOutput World::tick(std::span<const SteerCommand> commands) {
  const auto &lattice = settings_.lattice;
  const auto &service = settings_.service;
  Vec2 nudge{};
  double nudge_angle = 0.0;
  for (auto cmd : commands) {
    clamp_command(cmd, service);
    switch (cmd.kind) {
      case SteerKind::set_frame_velocity: velocities_[cmd.client_id] = {{cmd.a, cmd.b}, cmd.c}; break;
      case SteerKind::release: velocities_.erase(cmd.client_id); break;
      case SteerKind::nudge:
        nudge = nudge + Vec2{cmd.a, cmd.b};
        nudge_angle += cmd.c;
        break;
    }
  }
  clamp_pair(nudge.x, nudge.y, service.max_nudge);
  clamp_abs(nudge_angle, service.max_nudge_angle);

  const double dt = lattice.timestep;
  const auto [vel, omega] = frame_velocity();
  pose_.translation = pose_.translation + vel * dt + nudge;
  pose_.rotation += omega * dt + nudge_angle;

  LatticeState loaded = state_;
  apply_pose(loaded, lattice, pose_);
  const double energy_before = potential_energy(loaded, lattice);
  LatticeState next = integrator_.step(state_, pose_);
  const double energy_after = potential_energy(next, lattice);

  ++tick_;
  const double now = time();

  SlipRecord record;
  record.time = now;
  record.energy_before = energy_before;
  record.energy_after = energy_after;
  BitMatrix slipped(lattice.rows, lattice.cols);
  std::vector<BlockProbe> probes;
  probes.reserve(next.blocks.size());
  for (std::size_t i = 0; i < next.blocks.size(); ++i) {
    const auto &b = next.blocks[i];
    if (b.slipping) {
      record.blocks.push_back(i);
      record.distance.push_back(norm(b.position - state_.blocks[i].position));
      slipped.bits[i] = 1;
    }
    probes.push_back({i / lattice.cols, i % lattice.cols, map_block_to_descriptor(b.position, lattice.table_bounds),
                      b.slipping, norm(b.velocity)});
  }
  state_ = std::move(next);

  TickOutput out;
  light_ = light_update(light_, slipped, settings_.aesthetics.decay_per_tick, settings_.aesthetics.lit_threshold);
  light_.tick = tick_;
  if (corpus_) out.triggers = trigger_.trigger(*corpus_, probes, now);

  if (!record.blocks.empty()) last_slip_time_ = now;
  montage_.active = last_slip_time_ && now - *last_slip_time_ <= service.quiescence_s;
  if (montage_.active && now - montage_.last_shuffle >= service.shuffle_interval_s) {
    const std::size_t n = montage_.image_pairs.size();
    if (n > 1) {
      std::size_t pick = static_cast<std::size_t>(rng_.below(n - 1));
      if (pick >= montage_.current_pair) ++pick;
      montage_.current_pair = pick;
    }
    montage_.last_shuffle = now;
    ++montage_.shuffles;
  }

  out.events = detector_.feed(record);
  events_.insert(events_.end(), out.events.begin(), out.events.end());
  out.snapshot = snapshot();
  out.light = light_;
  out.montage = montage_;
  return out;
}

EventCatalog World::catalog(bool close_open) const {
  EventCatalog c;
  c.mode = CatalogMode::dynamic;
  c.observation_window = time();
  c.events = events_;
  if (close_open) {
    EventDetector copy = detector_;
    for (const auto &e : copy.finish()) c.events.push_back(e);
  }
  return c;
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'S', 'S', 'L', 'P', 'R', 'E', 'C', '\0'};
constexpr std::uint32_t kTrailerMarker = 0xFFFFFFFFu;

void put_u32(std::vector<std::uint8_t> &out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t> &out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_bytes(std::vector<std::uint8_t> &out, const std::string &s) { out.insert(out.end(), s.begin(), s.end()); }

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

class RecordReader {
 public:
  explicit RecordReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void need(std::size_t n, const char *what) const {
    if (pos_ + n > bytes_.size())
      throw FormatError(ErrorKind::integrity, pos_, std::string("session record truncated in ") + what);
  }
  std::uint32_t u32(const char *what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char *what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::string text(std::size_t n, const char *what) {
    need(n, what);
    std::string s(reinterpret_cast<const char *>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_session(const SessionRecord &record) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 8);
  put_u32(out, record.version);
  const json header = {{"format", "stickslip-session"},
                       {"seed", record.seed},
                       {"settings", json::parse(settings_to_json(record.settings))}};
  const auto header_text = header.dump();
  put_u32(out, static_cast<std::uint32_t>(header_text.size()));
  put_bytes(out, header_text);
  for (const auto &rc : record.commands) {
    const json frame = {{"tick", rc.tick},
                        {"ts", rc.command.timestamp},
                        {"kind", to_string(rc.command.kind)},
                        {"params", {rc.command.a, rc.command.b, rc.command.c}},
                        {"client", rc.command.client_id}};
    const auto text = frame.dump();
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    put_bytes(out, text);
  }
  put_u32(out, kTrailerMarker);
  put_u64(out, record.commands.size());
  put_u64(out, record.total_ticks);
  put_u32(out, crc32(out));
  return out;
}

SessionRecord decode_session(std::span<const std::uint8_t> bytes) {
  RecordReader in(bytes);
  in.need(8, "magic");
  if (std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw FormatError(ErrorKind::input_format, 0, "not a session record");
  in.text(8, "magic");
  SessionRecord record;
  const std::size_t version_offset = in.pos();
  record.version = in.u32("version");
  if (record.version != kSessionFormatVersion)
    throw FormatError(ErrorKind::version, version_offset,
                      "session record format version " + std::to_string(record.version) + " is not supported (expected " +
                          std::to_string(kSessionFormatVersion) + ")");
  const auto header_len = in.u32("header length");
  const std::size_t header_offset = in.pos();
  const auto header_text = in.text(header_len, "header");
  try {
    const auto header = json::parse(header_text);
    record.seed = header.at("seed").get<std::uint64_t>();
    record.settings = settings_from_json(header.at("settings").dump());
  } catch (const json::exception &e) {
    throw FormatError(ErrorKind::integrity, header_offset, std::string("bad session header: ") + e.what());
  }
  while (true) {
    const std::size_t frame_offset = in.pos();
    const auto len = in.u32("frame length");
    if (len == kTrailerMarker) break;
    const auto text = in.text(len, "command frame");
    try {
      const auto frame = json::parse(text);
      RecordedCommand rc;
      rc.tick = frame.at("tick").get<std::uint64_t>();
      rc.command.timestamp = frame.at("ts").get<double>();
      const auto kind = frame.at("kind").get<std::string>();
      if (kind == "set_frame_velocity") rc.command.kind = SteerKind::set_frame_velocity;
      else if (kind == "nudge") rc.command.kind = SteerKind::nudge;
      else if (kind == "release") rc.command.kind = SteerKind::release;
      else throw FormatError(ErrorKind::integrity, frame_offset, "unknown command kind '" + kind + "'");
      const auto &p = frame.at("params");
      rc.command.a = p.at(0).get<double>();
      rc.command.b = p.at(1).get<double>();
      rc.command.c = p.at(2).get<double>();
      rc.command.client_id = frame.at("client").get<std::string>();
      if (!record.commands.empty() && rc.tick < record.commands.back().tick)
        throw FormatError(ErrorKind::integrity, frame_offset, "command ticks are not ordered");
      record.commands.push_back(std::move(rc));
    } catch (const json::exception &e) {
      throw FormatError(ErrorKind::integrity, frame_offset, std::string("bad command frame: ") + e.what());
    }
  }
  const auto frames = in.u64("trailer");
  record.total_ticks = in.u64("trailer");
  const std::size_t crc_offset = in.pos();
  const auto stored = in.u32("checksum");
  if (frames != record.commands.size())
    throw FormatError(ErrorKind::integrity, crc_offset - 16, "trailer frame count does not match the command log");
  if (stored != crc32(bytes.first(crc_offset)))
    throw FormatError(ErrorKind::integrity, crc_offset, "session record checksum mismatch");
  if (in.pos() != bytes.size()) throw FormatError(ErrorKind::integrity, in.pos(), "trailing bytes after session record");
  if (!record.commands.empty() && record.commands.back().tick >= record.total_ticks)
    throw FormatError(ErrorKind::integrity, crc_offset - 8, "command logged after the last tick");
  return record;
}

SessionRecorder::SessionRecorder(Settings settings, std::uint64_t seed, const GrainCorpus *corpus)
    : world_(settings, seed, corpus) {
  record_.settings = world_.settings();
  record_.seed = seed;
}

TickOutput SessionRecorder::tick(std::span<const SteerCommand> commands) {
  for (const auto &c : commands) record_.commands.push_back({world_.tick_count(), c});
  return world_.tick(commands);
}

SessionRecord SessionRecorder::record() const {
  SessionRecord r = record_;
  r.total_ticks = world_.tick_count();
  return r;
}

void replay_session(const SessionRecord &record, const std::function<void(const TickOutput &)> &sink,
                    const GrainCorpus *corpus) {
  if (record.version != kSessionFormatVersion)
    throw Error(ErrorKind::version, "session record format version " + std::to_string(record.version) + " is not supported");
  World world(record.settings, record.seed, corpus);
  std::size_t next = 0;
  std::vector<SteerCommand> batch;
  for (std::uint64_t t = 0; t < record.total_ticks; ++t) {
    batch.clear();
    while (next < record.commands.size() && record.commands[next].tick == t) batch.push_back(record.commands[next++].command);
    const auto out = world.tick(batch);
    if (sink) sink(out);
  }
}

}  // namespace stickslip
