#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "stickslip/vec2.hpp"

namespace stickslip {

enum class CouplingMode { full_plate, perimeter_frame };

// open: missing neighbours contribute nothing (graph Laplacian).
// frame_anchored: missing neighbours are replaced by K_C springs to the frame.
enum class Boundary { open, frame_anchored };

enum class Phase { stuck, sliding };

std::string to_string(CouplingMode mode);
std::string to_string(Boundary boundary);
std::string to_string(Phase phase);
CouplingMode parse_coupling_mode(const std::string &text);
Boundary parse_boundary(const std::string &text);

/// Physical parameters of the spring-block array. Units are SI.
struct LatticeConfig {
  std::size_t rows = 5;
  std::size_t cols = 5;
  double coupling_stiffness = 50.0;  // K_C, block-to-block springs
  double loading_stiffness = 5.0;    // K_L, block-to-frame springs
  double block_mass = 0.25;
  double static_threshold = 1.0;   // F_s
  double kinetic_friction = 0.6;   // F_k
  double stick_speed = 1e-4;       // re-stick speed v_eps
  double timestep = 1e-3;
  CouplingMode coupling_mode = CouplingMode::perimeter_frame;
  Boundary boundary = Boundary::open;
  double rest_spacing = 0.174;
  Rect table_bounds{0.0, 0.0, 1.4, 1.4};

  std::size_t block_count() const { return rows * cols; }
  std::size_t index(std::size_t row, std::size_t col) const { return row * cols + col; }
  bool is_coupled(std::size_t row, std::size_t col) const;
  std::size_t coupled_count() const;

  /// OFC dissipation parameter K_C / (4 K_C + K_L).
  double alpha() const;

  /// Largest timestep accepted by validate().
  double stability_limit() const;

  /// Throws Error(ErrorKind::config) on the first violated invariant.
  void validate() const;
};

/// Rigid pose of the driving frame: rotate by `rotation` about `pivot`, then
/// translate by `translation`.
struct FramePose {
  Vec2 translation{};
  double rotation = 0.0;
  Vec2 pivot{};

  Vec2 apply(const Vec2 &point) const { return pivot + rotate(point - pivot, rotation) + translation; }
  friend bool operator==(const FramePose &, const FramePose &) = default;
};

/// Pose at rest, pivoting about the table centre.
FramePose rest_pose(const LatticeConfig &config);

struct BlockState {
  Vec2 position{};
  Vec2 anchor{};        // spring equilibrium point; the lattice site for uncoupled blocks
  Vec2 displacement{};  // position - anchor
  Vec2 velocity{};
  Phase phase = Phase::stuck;
  bool slipping = false;  // slid at any point during the last step

  friend bool operator==(const BlockState &, const BlockState &) = default;
};

struct LatticeState {
  std::size_t rows = 0;
  std::size_t cols = 0;
  FramePose pose{};  // pose the anchors were computed against
  std::vector<BlockState> blocks;

  const BlockState &at(std::size_t row, std::size_t col) const { return blocks[row * cols + col]; }
  BlockState &at(std::size_t row, std::size_t col) { return blocks[row * cols + col]; }
  bool any_slipping() const;
  friend bool operator==(const LatticeState &, const LatticeState &) = default;
};

/// Lattice sites, row-major, centred on the table.
std::vector<Vec2> rest_positions(const LatticeConfig &config);

/// Anchors of every frame-coupled block under `pose`, row-major.
std::vector<Vec2> frame_anchor_positions(const FramePose &pose, const LatticeConfig &config);

/// All blocks stuck at their lattice sites.
LatticeState make_rest_state(const LatticeConfig &config, const FramePose &pose);

/// Recomputes anchors and displacements from `pose` without moving blocks.
void apply_pose(LatticeState &state, const LatticeConfig &config, const FramePose &pose);

/// Elastic load on every block,
///   F = K_L (p - q) + K_C * sum_nbr (u_self - u_nbr),  u = p - lattice site,
/// which equals K_L l + K_C [4 l - l_left - l_right - l_up - l_down] when the
/// frame is at rest. The force acting on a block is -F.
std::vector<Vec2> net_force(const LatticeState &state, const LatticeConfig &config);

/// The same load for an explicit displacement field with the frame at rest.
std::vector<Vec2> net_force(const LatticeConfig &config, std::span<const Vec2> displacement);

double kinetic_energy(const LatticeState &state, const LatticeConfig &config);
double potential_energy(const LatticeState &state, const LatticeConfig &config);
inline double total_energy(const LatticeState &state, const LatticeConfig &config) {
  return kinetic_energy(state, config) + potential_energy(state, config);
}

/// Stick-slip integrator. Each step recomputes anchors from the frame pose,
/// promotes stuck blocks whose load exceeds F_s, advances the sliding blocks
/// with the implicit midpoint rule (which conserves spring + kinetic energy
/// exactly for linear springs), applies the kinetic-friction impulse and
/// re-sticks blocks that are slow and under threshold. Total energy therefore
/// never increases while the frame is fixed.
class StickSlipIntegrator {
 public:
  explicit StickSlipIntegrator(LatticeConfig config);
  ~StickSlipIntegrator();
  StickSlipIntegrator(StickSlipIntegrator &&) noexcept;
  StickSlipIntegrator &operator=(StickSlipIntegrator &&) noexcept;

  const LatticeConfig &config() const { return config_; }

  /// Throws DivergenceError naming the first non-finite block.
  LatticeState step(const LatticeState &state, const FramePose &pose);

 private:
  struct Cache;
  LatticeConfig config_;
  std::unique_ptr<Cache> cache_;
};

/// One-off step without factorisation caching.
LatticeState dynamic_step(const LatticeState &state, const LatticeConfig &config, const FramePose &pose);

}  // namespace stickslip
