#pragma once

#include <cstdint>
#include <functional>
#include <optional>

#include "stickslip/aesthetics.hpp"
#include "stickslip/catalog.hpp"
#include "stickslip/config.hpp"

namespace stickslip {

struct DynamicRunOptions {
  double duration = 60.0;                  // s of simulated time
  std::optional<std::uint64_t> max_events; // stop once this many events have closed
};

/// Headless dynamic-mode run: blocks start stuck at seeded random
/// displacements of up to settings.drive.jitter and the frame moves at the
/// drive velocity. Slips are grouped with settings.events. `on_frame`, when
/// set, receives every light frame.
EventCatalog run_dynamic(const Settings &settings, std::uint64_t seed, const DynamicRunOptions &options,
                         const std::function<void(const LightFrame &)> &on_frame = {});

}  // namespace stickslip
