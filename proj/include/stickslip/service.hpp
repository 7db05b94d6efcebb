#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stickslip/aesthetics.hpp"
#include "stickslip/catalog.hpp"
#include "stickslip/config.hpp"
#include "stickslip/lattice.hpp"
#include "stickslip/rng.hpp"
#include "stickslip/sonifier.hpp"

namespace stickslip {

enum class SteerKind { set_frame_velocity, nudge, release };

const char *to_string(SteerKind kind);

/// set_frame_velocity: (a, b, c) = (vx, vy, omega); nudge: (dx, dy, dtheta);
/// release: unused.
struct SteerCommand {
  double timestamp = 0.0;  // client clock, informational only
  SteerKind kind = SteerKind::release;
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  std::string client_id;

  friend bool operator==(const SteerCommand &, const SteerCommand &) = default;
};

struct IngestResult {
  std::optional<SteerCommand> command;
  bool clamped = false;
  std::string error;    // "protocol", "unsupported" or "oversized" on rejection
  std::string message;

  bool accepted() const { return command.has_value(); }
  /// JSON reply sent back to the client.
  std::string reply() const;
};

/// Parses {"type":"steer","kind":...,"params":{...},"ts":...}, validates it
/// and clamps magnitudes to the configured maxima. Never throws.
IngestResult ingest_command(std::string_view raw, const std::string &client_id, const ServiceConfig &config);

/// Clamps a single command's magnitudes; returns true if anything changed.
bool clamp_command(SteerCommand &command, const ServiceConfig &config);

struct MontageState {
  bool active = false;
  std::size_t current_pair = 0;
  double last_shuffle = -1e300;
  std::uint64_t shuffles = 0;
  std::vector<std::pair<std::string, std::string>> image_pairs;  // (cause, effect)

  friend bool operator==(const MontageState &, const MontageState &) = default;
};

/// Placeholder cause/effect image pairs.
std::vector<std::pair<std::string, std::string>> placeholder_pairs(std::size_t count);

struct WorldSnapshot {
  std::uint64_t tick = 0;
  double time = 0.0;
  FramePose pose;
  std::vector<BlockState> blocks;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::optional<std::uint64_t> event_id;

  friend bool operator==(const WorldSnapshot &, const WorldSnapshot &) = default;
};

/// {"type":"state", tick, time_s, frame:{x,y,theta}, blocks:[{p,v,phase,slip}], event_id}.
std::string snapshot_json(const WorldSnapshot &snapshot);
/// FNV-1a over the canonical snapshot JSON.
std::uint64_t snapshot_digest(const WorldSnapshot &snapshot);

std::string triggers_json(std::span<const TriggerEvent> events);
std::string light_json(const LightFrame &frame);
std::string montage_json(const MontageState &montage);

struct TickOutput {
  WorldSnapshot snapshot;
  std::vector<TriggerEvent> triggers;
  LightFrame light;
  MontageState montage;
  std::vector<Avalanche> events;  // avalanches closed by this tick
};

/// The live simulation. One owner thread calls tick(); nothing inside is
/// shared.
class World {
 public:
  World(Settings settings, std::uint64_t seed, const GrainCorpus *corpus = nullptr);

  /// Applies commands in order, advances the frame pose by the clamped summed
  /// velocity, steps the lattice, then updates light, triggers, montage and
  /// event detection. Simulation time advances by exactly dt.
  TickOutput tick(std::span<const SteerCommand> commands = {});

  std::uint64_t tick_count() const { return tick_; }
  double time() const { return static_cast<double>(tick_) * settings_.lattice.timestep; }
  const Settings &settings() const { return settings_; }
  std::uint64_t seed() const { return seed_; }
  const LatticeState &state() const { return state_; }
  const FramePose &pose() const { return pose_; }
  const MontageState &montage() const { return montage_; }
  const LightFrame &light() const { return light_; }
  WorldSnapshot snapshot() const;

  /// Events closed so far plus, on request, the currently open one.
  EventCatalog catalog(bool close_open = false) const;
  /// Summed and clamped frame velocity in effect for the next tick.
  std::pair<Vec2, double> frame_velocity() const;

 private:
  Settings settings_;
  std::uint64_t seed_;
  const GrainCorpus *corpus_;
  StickSlipIntegrator integrator_;
  TriggerEngine trigger_;
  EventDetector detector_;
  Rng rng_;
  LatticeState state_;
  FramePose pose_;
  LightFrame light_;
  MontageState montage_;
  std::map<std::string, std::pair<Vec2, double>> velocities_;
  std::vector<Avalanche> events_;
  std::optional<double> last_slip_time_;
  std::uint64_t tick_ = 0;
};

// ---------------------------------------------------------------------------
// Session records.

inline constexpr std::uint32_t kSessionFormatVersion = 1;

struct RecordedCommand {
  std::uint64_t tick = 0;  // index of the tick the command was applied in
  SteerCommand command;

  friend bool operator==(const RecordedCommand &, const RecordedCommand &) = default;
};

struct SessionRecord {
  std::uint32_t version = kSessionFormatVersion;
  Settings settings;
  std::uint64_t seed = 0;
  std::uint64_t total_ticks = 0;
  std::vector<RecordedCommand> commands;
};

/// Framed binary container:
///   "SSLPREC\0" | u32 version | u32 header length | header JSON
///   { u32 length | command JSON }*
///   u32 0xFFFFFFFF | u64 frame count | u64 total ticks | u32 CRC-32 of all preceding bytes
/// Integers are little-endian.
std::vector<std::uint8_t> encode_session(const SessionRecord &record);

/// Throws FormatError(version) for an unsupported version and
/// FormatError(integrity) for truncation or a checksum mismatch, naming the
/// byte offset.
SessionRecord decode_session(std::span<const std::uint8_t> bytes);

/// Drives a World and logs every command with its tick index.
class SessionRecorder {
 public:
  SessionRecorder(Settings settings, std::uint64_t seed, const GrainCorpus *corpus = nullptr);

  TickOutput tick(std::span<const SteerCommand> commands = {});
  const World &world() const { return world_; }
  SessionRecord record() const;

 private:
  World world_;
  SessionRecord record_;
};

/// Feeds the logged commands at their tick indices into a fresh World and
/// calls `sink` after every tick.
void replay_session(const SessionRecord &record, const std::function<void(const TickOutput &)> &sink,
                    const GrainCorpus *corpus = nullptr);

}  // namespace stickslip
