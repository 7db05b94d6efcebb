#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "stickslip/aesthetics.hpp"
#include "stickslip/catalog.hpp"
#include "stickslip/lattice.hpp"
#include "stickslip/ofc.hpp"
#include "stickslip/sonifier.hpp"

namespace stickslip {

struct ServiceConfig {
  double max_speed = 0.2;          // m/s, frame translation
  double max_angular_speed = 0.5;  // rad/s
  double max_nudge = 0.05;         // m per tick, summed over clients
  double max_nudge_angle = 0.1;    // rad per tick
  double quiescence_s = 0.5;       // montage stays active this long after a slip
  double shuffle_interval_s = 0.5;
  std::size_t montage_pairs = 6;
  double stream_hz = 30.0;
  std::size_t max_message_bytes = 4096;
  std::uint16_t port = 8080;

  void validate() const;
};

/// Headless drive for dynamic-mode simulation: the frame moves at constant
/// velocity after the blocks start from seeded random displacements.
struct DriveConfig {
  Vec2 velocity{0.02, 0.0};
  double angular_velocity = 0.0;
  double jitter = 0.02;  // m, uniform initial displacement amplitude

  void validate() const;
};

struct Settings {
  LatticeConfig lattice;
  OfcRunOptions ofc;
  SonifierConfig sonifier;
  AestheticsConfig aesthetics;
  ServiceConfig service;
  DetectionOptions events{0.25, Adjacency::temporal, 5, 5};  // rows/cols follow the lattice
  DriveConfig drive;
  std::uint64_t seed = 7;

  /// Validates every section; throws Error(config).
  void validate() const;
};

/// Parses a settings document. Sections and keys are optional and default as
/// above; unknown keys and ill-typed values raise Error(config). Range
/// checks are left to Settings::validate() so flag overrides can land first.
Settings settings_from_json(const std::string &text, const Settings &base = {});
Settings load_settings(const std::string &path, const Settings &base = {});
std::string settings_to_json(const Settings &settings);

Adjacency parse_adjacency(const std::string &text);
const char *to_string(Adjacency adjacency);

}  // namespace stickslip
