#include "stickslip/lattice.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <map>

#include "stickslip/error.hpp"

namespace stickslip {

namespace {

struct Offset {
  int dr;
  int dc;
};
constexpr Offset kNeighbours[4] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};

bool finite(const Vec2 &v) { return std::isfinite(v.x) && std::isfinite(v.y); }

// Calls fn(neighbour_index) for in-grid neighbours and ghost(ghost_site) for
// off-grid ones.
template <typename Fn, typename Ghost>
void for_each_neighbour(const LatticeConfig &config, std::size_t i, Fn &&fn, Ghost &&ghost) {
  const auto row = static_cast<int>(i / config.cols);
  const auto col = static_cast<int>(i % config.cols);
  for (const auto &[dr, dc] : kNeighbours) {
    const int r = row + dr;
    const int c = col + dc;
    if (r >= 0 && c >= 0 && r < static_cast<int>(config.rows) && c < static_cast<int>(config.cols)) {
      fn(static_cast<std::size_t>(r) * config.cols + static_cast<std::size_t>(c));
    } else {
      ghost(Vec2{static_cast<double>(dc), static_cast<double>(dr)});
    }
  }
}

std::vector<bool> coupling_mask(const LatticeConfig &config) {
  std::vector<bool> mask(config.block_count());
  for (std::size_t r = 0; r < config.rows; ++r)
    for (std::size_t c = 0; c < config.cols; ++c) mask[config.index(r, c)] = config.is_coupled(r, c);
  return mask;
}

// Displacement of the frame at the off-grid site next to `site` in direction
// `dir` (unit lattice step).
Vec2 ghost_displacement(const LatticeConfig &config, const FramePose &pose, const Vec2 &site, const Vec2 &dir) {
  const Vec2 ghost = site + dir * config.rest_spacing;
  return pose.apply(ghost) - ghost;
}

std::vector<Vec2> load(const LatticeState &state, const LatticeConfig &config, const std::vector<Vec2> &sites,
                       const std::vector<bool> &coupled) {
  const std::size_t n = config.block_count();
  std::vector<Vec2> u(n);
  for (std::size_t i = 0; i < n; ++i) u[i] = state.blocks[i].position - sites[i];
  std::vector<Vec2> force(n);
  const bool anchored = config.boundary == Boundary::frame_anchored;
  for (std::size_t i = 0; i < n; ++i) {
    Vec2 f{};
    if (coupled[i]) f = config.loading_stiffness * (state.blocks[i].position - state.blocks[i].anchor);
    Vec2 lap{};
    for_each_neighbour(
        config, i, [&](std::size_t j) { lap += u[i] - u[j]; },
        [&](const Vec2 &dir) {
          if (anchored) lap += u[i] - ghost_displacement(config, state.pose, sites[i], dir);
        });
    force[i] = f + config.coupling_stiffness * lap;
  }
  return force;
}

void check_dimensions(const LatticeState &state, const LatticeConfig &config) {
  if (state.rows != config.rows || state.cols != config.cols || state.blocks.size() != config.block_count())
    throw Error(ErrorKind::config, "lattice state dimensions do not match the configuration");
}

void check_finite(const LatticeState &state) {
  for (std::size_t i = 0; i < state.blocks.size(); ++i) {
    const auto &b = state.blocks[i];
    if (!finite(b.position) || !finite(b.velocity) || !finite(b.anchor))
      throw DivergenceError(i, "integration diverged: non-finite block state");
  }
}

}  // namespace

std::string to_string(CouplingMode mode) {
  return mode == CouplingMode::full_plate ? "full_plate" : "perimeter_frame";
}

std::string to_string(Boundary boundary) { return boundary == Boundary::open ? "open" : "frame_anchored"; }

std::string to_string(Phase phase) { return phase == Phase::stuck ? "stuck" : "sliding"; }

CouplingMode parse_coupling_mode(const std::string &text) {
  if (text == "full_plate") return CouplingMode::full_plate;
  if (text == "perimeter_frame") return CouplingMode::perimeter_frame;
  throw Error(ErrorKind::config, "unknown coupling_mode '" + text + "'");
}

Boundary parse_boundary(const std::string &text) {
  if (text == "open") return Boundary::open;
  if (text == "frame_anchored") return Boundary::frame_anchored;
  throw Error(ErrorKind::config, "unknown boundary '" + text + "'");
}

bool LatticeConfig::is_coupled(std::size_t row, std::size_t col) const {
  if (coupling_mode == CouplingMode::full_plate) return true;
  return row == 0 || col == 0 || row + 1 == rows || col + 1 == cols;
}

std::size_t LatticeConfig::coupled_count() const {
  std::size_t n = 0;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) n += is_coupled(r, c) ? 1 : 0;
  return n;
}

double LatticeConfig::alpha() const {
  return coupling_stiffness / (4.0 * coupling_stiffness + loading_stiffness);
}

double LatticeConfig::stability_limit() const {
  return 0.1 * std::sqrt(block_mass / (loading_stiffness + 4.0 * coupling_stiffness));
}

void LatticeConfig::validate() const {
  auto fail = [](const std::string &msg) { throw Error(ErrorKind::config, msg); };
  if (rows < 2 || cols < 2) fail("lattice needs at least 2 rows and 2 columns");
  if (!(coupling_stiffness > 0.0)) fail("coupling_stiffness must be positive");
  if (!(loading_stiffness > 0.0)) fail("loading_stiffness must be positive");
  if (!(block_mass > 0.0)) fail("block_mass must be positive");
  if (!(timestep > 0.0)) fail("timestep must be positive");
  if (!(static_threshold >= 0.0) || !(kinetic_friction >= 0.0)) fail("friction levels must be non-negative");
  if (kinetic_friction > static_threshold) fail("kinetic_friction must not exceed static_threshold");
  if (!(stick_speed >= 0.0)) fail("stick_speed must be non-negative");
  if (!(rest_spacing > 0.0)) fail("rest_spacing must be positive");
  if (!(table_bounds.width() > 0.0) || !(table_bounds.height() > 0.0)) fail("table_bounds must be non-degenerate");
  if (!(timestep < stability_limit()))
    fail("timestep " + std::to_string(timestep) + " s exceeds the stability limit " +
         std::to_string(stability_limit()) + " s");
}

FramePose rest_pose(const LatticeConfig &config) { return FramePose{{}, 0.0, config.table_bounds.center()}; }

bool LatticeState::any_slipping() const {
  return std::any_of(blocks.begin(), blocks.end(), [](const BlockState &b) { return b.slipping; });
}

std::vector<Vec2> rest_positions(const LatticeConfig &config) {
  const Vec2 centre = config.table_bounds.center();
  std::vector<Vec2> sites;
  sites.reserve(config.block_count());
  for (std::size_t r = 0; r < config.rows; ++r) {
    for (std::size_t c = 0; c < config.cols; ++c) {
      const double dx = (static_cast<double>(c) - 0.5 * static_cast<double>(config.cols - 1)) * config.rest_spacing;
      const double dy = (static_cast<double>(r) - 0.5 * static_cast<double>(config.rows - 1)) * config.rest_spacing;
      sites.push_back(centre + Vec2{dx, dy});
    }
  }
  return sites;
}

std::vector<Vec2> frame_anchor_positions(const FramePose &pose, const LatticeConfig &config) {
  const auto sites = rest_positions(config);
  std::vector<Vec2> anchors;
  for (std::size_t r = 0; r < config.rows; ++r)
    for (std::size_t c = 0; c < config.cols; ++c)
      if (config.is_coupled(r, c)) anchors.push_back(pose.apply(sites[config.index(r, c)]));
  return anchors;
}

void apply_pose(LatticeState &state, const LatticeConfig &config, const FramePose &pose) {
  check_dimensions(state, config);
  const auto sites = rest_positions(config);
  state.pose = pose;
  for (std::size_t r = 0; r < config.rows; ++r) {
    for (std::size_t c = 0; c < config.cols; ++c) {
      auto &b = state.at(r, c);
      const auto &site = sites[config.index(r, c)];
      b.anchor = config.is_coupled(r, c) ? pose.apply(site) : site;
      b.displacement = b.position - b.anchor;
    }
  }
}

LatticeState make_rest_state(const LatticeConfig &config, const FramePose &pose) {
  LatticeState state;
  state.rows = config.rows;
  state.cols = config.cols;
  state.blocks.resize(config.block_count());
  const auto sites = rest_positions(config);
  for (std::size_t i = 0; i < sites.size(); ++i) state.blocks[i].position = sites[i];
  apply_pose(state, config, pose);
  return state;
}

std::vector<Vec2> net_force(const LatticeState &state, const LatticeConfig &config) {
  check_dimensions(state, config);
  return load(state, config, rest_positions(config), coupling_mask(config));
}

std::vector<Vec2> net_force(const LatticeConfig &config, std::span<const Vec2> displacement) {
  if (displacement.size() != config.block_count())
    throw Error(ErrorKind::config, "displacement field size does not match the lattice");
  LatticeState state = make_rest_state(config, rest_pose(config));
  for (std::size_t i = 0; i < displacement.size(); ++i) {
    state.blocks[i].position += displacement[i];
    state.blocks[i].displacement = displacement[i];
  }
  return net_force(state, config);
}

double kinetic_energy(const LatticeState &state, const LatticeConfig &config) {
  double e = 0.0;
  for (const auto &b : state.blocks) e += norm_squared(b.velocity);
  return 0.5 * config.block_mass * e;
}

double potential_energy(const LatticeState &state, const LatticeConfig &config) {
  check_dimensions(state, config);
  const auto sites = rest_positions(config);
  const auto coupled = coupling_mask(config);
  const bool anchored = config.boundary == Boundary::frame_anchored;
  double loading = 0.0;
  double coupling = 0.0;
  for (std::size_t i = 0; i < state.blocks.size(); ++i) {
    const auto &b = state.blocks[i];
    if (coupled[i]) loading += norm_squared(b.position - b.anchor);
    const Vec2 ui = b.position - sites[i];
    for_each_neighbour(
        config, i,
        [&](std::size_t j) {
          // each interior edge is visited twice
          coupling += 0.5 * norm_squared(ui - (state.blocks[j].position - sites[j]));
        },
        [&](const Vec2 &dir) {
          if (anchored) coupling += norm_squared(ui - ghost_displacement(config, state.pose, sites[i], dir));
        });
  }
  return 0.5 * config.loading_stiffness * loading + 0.5 * config.coupling_stiffness * coupling;
}

struct StickSlipIntegrator::Cache {
  using Solver = Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>;
  std::vector<Vec2> sites;
  std::vector<bool> coupled;
  std::map<std::vector<bool>, std::unique_ptr<Solver>> solvers;
};

StickSlipIntegrator::StickSlipIntegrator(LatticeConfig config)
    : config_(std::move(config)), cache_(std::make_unique<Cache>()) {
  config_.validate();
  cache_->sites = rest_positions(config_);
  cache_->coupled = coupling_mask(config_);
}

StickSlipIntegrator::~StickSlipIntegrator() = default;
StickSlipIntegrator::StickSlipIntegrator(StickSlipIntegrator &&) noexcept = default;
StickSlipIntegrator &StickSlipIntegrator::operator=(StickSlipIntegrator &&) noexcept = default;

LatticeState StickSlipIntegrator::step(const LatticeState &state, const FramePose &pose) {
  check_dimensions(state, config_);
  check_finite(state);
  const std::size_t n = config_.block_count();
  const double h = config_.timestep;
  const double m = config_.block_mass;

  LatticeState next = state;
  apply_pose(next, config_, pose);
  const auto force = load(next, config_, cache_->sites, cache_->coupled);

  std::vector<bool> sliding(n, false);
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < n; ++i) {
    auto &b = next.blocks[i];
    b.slipping = false;
    if (b.phase == Phase::sliding || norm(force[i]) > config_.static_threshold) {
      sliding[i] = true;
      active.push_back(i);
    } else {
      b.velocity = {};
    }
  }
  if (active.empty()) return next;

  // Column index of every sliding block in the reduced system.
  std::vector<int> slot(n, -1);
  for (std::size_t k = 0; k < active.size(); ++k) slot[active[k]] = static_cast<int>(k);
  const bool anchored = config_.boundary == Boundary::frame_anchored;
  auto diagonal = [&](std::size_t i) {
    double d = cache_->coupled[i] ? config_.loading_stiffness : 0.0;
    for_each_neighbour(
        config_, i, [&](std::size_t) { d += config_.coupling_stiffness; },
        [&](const Vec2 &) {
          if (anchored) d += config_.coupling_stiffness;
        });
    return d;
  };

  auto &solver = cache_->solvers[sliding];
  if (!solver) {
    if (cache_->solvers.size() > 512) {
      auto keep = std::move(solver);
      cache_->solvers.clear();
      solver = std::move(keep);
    }
    const double scale = 0.25 * h * h;
    std::vector<Eigen::Triplet<double>> entries;
    for (std::size_t k = 0; k < active.size(); ++k) {
      const std::size_t i = active[k];
      entries.emplace_back(static_cast<int>(k), static_cast<int>(k), m + scale * diagonal(i));
      for_each_neighbour(
          config_, i,
          [&](std::size_t j) {
            if (slot[j] >= 0) entries.emplace_back(static_cast<int>(k), slot[j], -scale * config_.coupling_stiffness);
          },
          [](const Vec2 &) {});
    }
    const auto dim = static_cast<Eigen::Index>(active.size());
    Eigen::SparseMatrix<double> matrix(dim, dim);
    matrix.setFromTriplets(entries.begin(), entries.end());
    solver = std::make_unique<Cache::Solver>(matrix);
    if (solver->info() != Eigen::Success)
      throw Error(ErrorKind::divergence, "implicit step matrix is not positive definite");
  }

  // Implicit midpoint on the sliding subset:
  //   (m + h^2/4 K) v' = (m - h^2/4 K) v - h F(x),   x' = x + h (v + v') / 2
  const auto dim = static_cast<Eigen::Index>(active.size());
  Eigen::VectorXd rhs_x(dim), rhs_y(dim);
  for (std::size_t k = 0; k < active.size(); ++k) {
    const std::size_t i = active[k];
    const Vec2 v = next.blocks[i].velocity;
    Vec2 kv = diagonal(i) * v;
    for_each_neighbour(
        config_, i,
        [&](std::size_t j) {
          if (slot[j] >= 0) kv -= config_.coupling_stiffness * next.blocks[j].velocity;
        },
        [](const Vec2 &) {});
    const Vec2 r = m * v - 0.25 * h * h * kv - h * force[i];
    rhs_x[static_cast<Eigen::Index>(k)] = r.x;
    rhs_y[static_cast<Eigen::Index>(k)] = r.y;
  }
  const Eigen::VectorXd vx = solver->solve(rhs_x);
  const Eigen::VectorXd vy = solver->solve(rhs_y);

  const double friction_impulse = h * config_.kinetic_friction / m;
  for (std::size_t k = 0; k < active.size(); ++k) {
    auto &b = next.blocks[active[k]];
    Vec2 v_new{vx[static_cast<Eigen::Index>(k)], vy[static_cast<Eigen::Index>(k)]};
    b.position += 0.5 * h * (b.velocity + v_new);
    // Kinetic friction removes speed along the direction of motion and
    // never reverses it.
    const double speed = norm(v_new);
    if (speed > 0.0) v_new *= std::max(0.0, 1.0 - friction_impulse / speed);
    b.velocity = v_new;
    b.phase = Phase::sliding;
    b.slipping = true;
    b.displacement = b.position - b.anchor;
  }

  const auto settled = load(next, config_, cache_->sites, cache_->coupled);
  for (std::size_t i : active) {
    auto &b = next.blocks[i];
    if (norm(b.velocity) < config_.stick_speed && norm(settled[i]) <= config_.static_threshold) {
      b.velocity = {};
      b.phase = Phase::stuck;
    }
  }
  check_finite(next);
  return next;
}

LatticeState dynamic_step(const LatticeState &state, const LatticeConfig &config, const FramePose &pose) {
  StickSlipIntegrator integrator(config);
  return integrator.step(state, pose);
}

}  // namespace stickslip
