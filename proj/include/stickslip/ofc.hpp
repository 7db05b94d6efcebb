#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "stickslip/catalog.hpp"
#include "stickslip/rng.hpp"

namespace stickslip {

/// Olami-Feder-Christensen automaton: normalised stresses on an open grid.
struct OfcGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> stress;
  double threshold = 1.0;
  double alpha = 0.22;

  /// Stresses drawn uniformly from [0, threshold).
  static OfcGrid random(std::size_t rows, std::size_t cols, double alpha, Rng &rng);

  std::size_t size() const { return rows * cols; }
  double max_stress() const;

  /// Throws Error(config) unless 0 <= alpha <= 0.25 and every stress lies in
  /// [0, threshold).
  void validate() const;
};

struct OfcAvalanche {
  std::uint64_t area = 0;     // distinct sites that toppled
  std::uint64_t topples = 0;
  std::uint64_t sweeps = 0;   // parallel update rounds
  double drive = 0.0;         // uniform loading applied before relaxing
  double released = 0.0;      // sum of stresses at toppling
  std::vector<std::size_t> sequence;       // toppled sites in order, when recorded
  std::vector<std::uint32_t> profile;      // topples per sweep, when recorded
};

struct OfcOptions {
  std::uint64_t max_sweeps = 1'000'000;
  bool record_sequence = false;
  bool record_profile = false;
};

/// Reusable scratch space for repeated relaxations on one grid size.
class OfcRelaxer {
 public:
  explicit OfcRelaxer(OfcOptions options = {}) : options_(options) {}

  /// Raises every stress by (threshold - max) and relaxes with parallel
  /// sweeps: all sites at or above threshold topple together, each passing
  /// alpha times its stress to every in-grid neighbour and resetting to zero.
  /// Throws Error(runaway) when relaxation exceeds max_sweeps.
  OfcAvalanche drive_and_relax(OfcGrid &grid);

 private:
  OfcOptions options_;
  std::vector<std::uint64_t> toppled_stamp_;
  std::vector<std::uint64_t> queued_stamp_;
  std::vector<std::size_t> current_;
  std::vector<std::size_t> next_;
  std::vector<double> load_;
  std::uint64_t stamp_ = 0;
};

OfcAvalanche ofc_drive_and_relax(OfcGrid &grid, const OfcOptions &options = {});

struct OfcRunOptions {
  std::size_t rows = 64;
  std::size_t cols = 64;
  double alpha = 0.22;
  std::uint64_t burn_in = 100'000;
  std::uint64_t events = 1'000'000;
  std::uint64_t seed = 7;
  std::uint64_t max_sweeps = 1'000'000;
  double topple_time = 1e-3;  // seconds per elementary slip
  double loading_time = 10.0; // seconds per unit of uniform loading
};

/// Runs the automaton from a seeded random state. The catalog clock treats
/// every topple as one elementary slip lasting topple_time, played one after
/// another, with loading_time per unit of uniform drive between avalanches.
/// An avalanche therefore spans [t_start, t_start + topples * topple_time].
EventCatalog run_ofc(const OfcRunOptions &options,
                     const std::function<void(std::uint64_t)> &progress = {});

}  // namespace stickslip
