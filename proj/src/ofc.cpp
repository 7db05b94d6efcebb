#include "stickslip/ofc.hpp"

#include <algorithm>
#include <string>

#include "stickslip/error.hpp"

namespace stickslip {

OfcGrid OfcGrid::random(std::size_t rows, std::size_t cols, double alpha, Rng &rng) {
  OfcGrid grid;
  grid.rows = rows;
  grid.cols = cols;
  grid.alpha = alpha;
  grid.stress.resize(rows * cols);
  for (auto &s : grid.stress) s = rng.uniform() * grid.threshold;
  return grid;
}

double OfcGrid::max_stress() const {
  double m = 0.0;
  for (double s : stress) m = s > m ? s : m;
  return m;
}

void OfcGrid::validate() const {
  if (rows < 1 || cols < 1) throw Error(ErrorKind::config, "OFC grid must have at least one site");
  if (stress.size() != rows * cols) throw Error(ErrorKind::config, "OFC stress field size mismatch");
  if (!(alpha >= 0.0 && alpha <= 0.25))
    throw Error(ErrorKind::config, "OFC alpha must lie in [0, 0.25], got " + std::to_string(alpha));
  if (!(threshold > 0.0)) throw Error(ErrorKind::config, "OFC threshold must be positive");
  for (double s : stress)
    if (!(s >= 0.0 && s < threshold)) throw Error(ErrorKind::config, "OFC stresses must lie in [0, threshold)");
}

OfcAvalanche OfcRelaxer::drive_and_relax(OfcGrid &grid) {
  const std::size_t n = grid.size();
  if (n == 0) throw Error(ErrorKind::config, "OFC grid is empty");
  if (toppled_stamp_.size() != n) {
    toppled_stamp_.assign(n, 0);
    queued_stamp_.assign(n, 0);
    stamp_ = 0;
  }
  // Each sweep uses two stamps: one for "toppled in this avalanche" and one
  // for "already queued for the next sweep".
  const std::uint64_t avalanche_stamp = ++stamp_;

  OfcAvalanche av;
  const double peak = grid.max_stress();
  av.drive = grid.threshold - peak;
  current_.clear();
  for (std::size_t i = 0; i < n; ++i) {
    const bool is_peak = grid.stress[i] == peak;
    grid.stress[i] += av.drive;
    if (is_peak) {
      grid.stress[i] = grid.threshold;  // exact, regardless of rounding in the add
      current_.push_back(i);
    }
  }

  const std::size_t rows = grid.rows;
  const std::size_t cols = grid.cols;
  while (!current_.empty()) {
    if (av.sweeps == options_.max_sweeps)
      throw Error(ErrorKind::runaway, "OFC relaxation exceeded " + std::to_string(options_.max_sweeps) +
                                          " sweeps; alpha=" + std::to_string(grid.alpha) + " does not dissipate");
    ++av.sweeps;
    if (options_.record_profile) av.profile.push_back(static_cast<std::uint32_t>(current_.size()));
    load_.resize(current_.size());
    for (std::size_t k = 0; k < current_.size(); ++k) {
      const std::size_t i = current_[k];
      load_[k] = grid.stress[i];
      grid.stress[i] = 0.0;
      av.released += load_[k];
      ++av.topples;
      if (toppled_stamp_[i] != avalanche_stamp) {
        toppled_stamp_[i] = avalanche_stamp;
        ++av.area;
      }
      if (options_.record_sequence) av.sequence.push_back(i);
    }
    const std::uint64_t queue_stamp = ++stamp_;
    next_.clear();
    auto give = [&](std::size_t j, double amount) {
      grid.stress[j] += amount;
      if (grid.stress[j] >= grid.threshold && queued_stamp_[j] != queue_stamp) {
        queued_stamp_[j] = queue_stamp;
        next_.push_back(j);
      }
    };
    for (std::size_t k = 0; k < current_.size(); ++k) {
      const std::size_t i = current_[k];
      const double share = grid.alpha * load_[k];
      const std::size_t r = i / cols;
      const std::size_t c = i % cols;
      if (r > 0) give(i - cols, share);
      if (c > 0) give(i - 1, share);
      if (c + 1 < cols) give(i + 1, share);
      if (r + 1 < rows) give(i + cols, share);
    }
    // Ascending order fixes the summation order of the next sweep.
    std::sort(next_.begin(), next_.end());
    current_.swap(next_);
  }
  return av;
}

OfcAvalanche ofc_drive_and_relax(OfcGrid &grid, const OfcOptions &options) {
  OfcRelaxer relaxer(options);
  return relaxer.drive_and_relax(grid);
}

EventCatalog run_ofc(const OfcRunOptions &options, const std::function<void(std::uint64_t)> &progress) {
  Rng rng(options.seed);
  OfcGrid grid = OfcGrid::random(options.rows, options.cols, options.alpha, rng);
  grid.validate();
  if (!(options.topple_time > 0.0) || !(options.loading_time >= 0.0))
    throw Error(ErrorKind::config, "OFC clock constants must be positive");
  OfcRelaxer relaxer(OfcOptions{options.max_sweeps, false, false});
  for (std::uint64_t k = 0; k < options.burn_in; ++k) relaxer.drive_and_relax(grid);

  EventCatalog catalog;
  catalog.mode = CatalogMode::ofc;
  catalog.events.reserve(options.events);
  double clock = 0.0;
  for (std::uint64_t k = 0; k < options.events; ++k) {
    const auto av = relaxer.drive_and_relax(grid);
    clock += av.drive * options.loading_time;
    Avalanche e;
    e.id = k;
    e.t_start = clock;
    clock += static_cast<double>(av.topples) * options.topple_time;
    e.t_end = clock;
    e.area = av.area;
    e.moment = av.released;
    e.energy = static_cast<double>(av.topples);
    catalog.events.push_back(e);
    if (progress && (k + 1) % 100'000 == 0) progress(k + 1);
  }
  catalog.observation_window = clock;
  return catalog;
}

}  // namespace stickslip
