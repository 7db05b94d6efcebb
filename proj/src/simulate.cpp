#include "stickslip/simulate.hpp"

#include <cmath>

#include "stickslip/error.hpp"
#include "stickslip/lattice.hpp"
#include "stickslip/rng.hpp"

namespace stickslip {

EventCatalog run_dynamic(const Settings &input, std::uint64_t seed, const DynamicRunOptions &options,
                         const std::function<void(const LightFrame &)> &on_frame) {
  Settings settings = input;
  settings.events.rows = settings.lattice.rows;
  settings.events.cols = settings.lattice.cols;
  settings.validate();
  if (!(options.duration >= 0.0)) throw Error(ErrorKind::parameter, "duration must be non-negative");
  const auto &lattice = settings.lattice;

  Rng rng(seed);
  FramePose pose = rest_pose(lattice);
  LatticeState state = make_rest_state(lattice, pose);
  for (auto &b : state.blocks) {
    const Vec2 offset{rng.uniform(-1.0, 1.0) * settings.drive.jitter, rng.uniform(-1.0, 1.0) * settings.drive.jitter};
    b.position = b.position + offset;
  }
  apply_pose(state, lattice, pose);

  StickSlipIntegrator integrator(lattice);
  EventDetector detector(settings.events);
  LightFrame light = LightFrame::dark(lattice.rows, lattice.cols);
  EventCatalog catalog;
  catalog.mode = CatalogMode::dynamic;

  const double dt = lattice.timestep;
  const auto ticks = static_cast<std::uint64_t>(std::llround(options.duration / dt));
  auto enough = [&] { return options.max_events && catalog.events.size() >= *options.max_events; };
  std::uint64_t tick = 0;
  while (tick < ticks && !enough()) {
    pose.translation = pose.translation + settings.drive.velocity * dt;
    pose.rotation += settings.drive.angular_velocity * dt;
    LatticeState loaded = state;
    apply_pose(loaded, lattice, pose);
    SlipRecord record;
    record.energy_before = potential_energy(loaded, lattice);
    LatticeState next = integrator.step(state, pose);
    record.energy_after = potential_energy(next, lattice);
    ++tick;
    record.time = static_cast<double>(tick) * dt;
    BitMatrix slipped(lattice.rows, lattice.cols);
    for (std::size_t i = 0; i < next.blocks.size(); ++i) {
      if (!next.blocks[i].slipping) continue;
      record.blocks.push_back(i);
      record.distance.push_back(norm(next.blocks[i].position - state.blocks[i].position));
      slipped.bits[i] = 1;
    }
    state = std::move(next);
    for (auto &e : detector.feed(record)) catalog.events.push_back(e);
    if (on_frame) {
      light = light_update(light, slipped, settings.aesthetics.decay_per_tick, settings.aesthetics.lit_threshold);
      on_frame(light);
    }
  }
  for (auto &e : detector.finish()) catalog.events.push_back(e);
  if (options.max_events && catalog.events.size() > *options.max_events) catalog.events.resize(*options.max_events);
  catalog.observation_window = static_cast<double>(tick) * dt;
  return catalog;
}

}  // namespace stickslip
