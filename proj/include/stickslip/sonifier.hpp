#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stickslip/catalog.hpp"
#include "stickslip/vec2.hpp"
#include "stickslip/wav.hpp"

namespace stickslip {

enum class LayoutMode { rank, min_max };

const char *to_string(LayoutMode mode);
LayoutMode parse_layout_mode(const std::string &text);

struct SonifierConfig {
  double grain_ms = 100.0;
  double hop_ms = 50.0;
  LayoutMode layout = LayoutMode::rank;
  double radius = 0.1;          // trigger range in descriptor space
  double refractory_s = 0.08;   // per block and grain
  double v_ref = 0.05;          // slip speed (m/s) that maps to full gain
  double limiter_knee = 0.5;    // render output is the identity below this
  std::uint32_t output_rate = 44100;

  /// Throws Error(config) on out-of-range values.
  void validate() const;
};

struct Grain {
  std::size_t source_offset = 0;  // samples
  std::size_t length = 0;         // samples
  double centroid = 0.0;          // Hz
  double periodicity = 0.0;       // [0, 1]
  Vec2 position{0.5, 0.5};        // unit square
  std::optional<Vec2> manual_override;
};

struct GrainCorpus {
  std::uint32_t sample_rate = 44100;
  std::vector<double> samples;
  std::vector<Grain> grains;
  std::string source_name;

  std::span<const double> window(const Grain &grain) const {
    return std::span<const double>(samples).subspan(grain.source_offset, grain.length);
  }

  /// Throws Error(config) if a grain window leaves the buffer, a grain is
  /// empty, or there are no grains.
  void validate() const;
};

struct GrainWindow {
  std::size_t offset = 0;
  std::size_t length = 0;
};

/// Uniform windows of round(grain_ms) and round(hop_ms) samples; the last
/// partial window is dropped, so count = floor((n - grain) / hop) + 1.
/// Throws Error(parameter) for grain_ms < 10 or hop_ms < 1 and
/// Error(input_format) when the audio is shorter than one grain.
std::vector<GrainWindow> segment_grains(std::size_t sample_count, std::uint32_t sample_rate, double grain_ms,
                                        double hop_ms);

/// Sum f |X(f)| / sum |X(f)| over positive frequencies of the Hann-windowed
/// transform. Silence gives 0.
double descriptor_centroid(std::span<const double> window, double sample_rate);

/// Peak of the biased normalised autocorrelation over lags in [2 ms, 50 ms],
/// clamped to [0, 1]. Silence gives 0.
double descriptor_periodicity(std::span<const double> window, double sample_rate);

/// Rank mode places x at rank(centroid) / (n - 1) and y likewise for
/// periodicity, ties broken by grain index; min-max mode scales linearly.
/// A single grain, or a constant descriptor in min-max mode, maps to 0.5.
/// manual_override, when set, replaces the computed position.
void layout_descriptor_space(GrainCorpus &corpus, LayoutMode mode = LayoutMode::rank);

/// Segments, analyses and lays out a recording. Audio at another rate is
/// first resampled to config.output_rate.
GrainCorpus build_corpus(const MonoAudio &audio, const std::string &source_name, const SonifierConfig &config = {});

/// Affine map of the table rectangle onto the unit square, clamped.
Vec2 map_block_to_descriptor(Vec2 position, const Rect &table);

struct TriggerEvent {
  double time = 0.0;
  std::size_t block_row = 0;
  std::size_t block_col = 0;
  std::size_t grain_id = 0;
  double gain = 1.0;  // (0, 1]
  double pan = 0.0;   // [-1, 1]
};

struct BlockProbe {
  std::size_t row = 0;
  std::size_t col = 0;
  Vec2 descriptor;
  bool slipping = false;
  double speed = 0.0;  // m/s
};

/// Pan from the block column, -1 at the left edge and +1 at the right.
double column_pan(std::size_t col, std::size_t cols);

/// Stateful proximity trigger. Each slipping block fires the nearest grain
/// within `radius` (ties to the lower grain id), at most once per tick, with
/// gain min(1, speed / v_ref). A block that fired a grain less than
/// refractory_s ago does not fire that grain again.
class TriggerEngine {
 public:
  TriggerEngine(double radius, double refractory_s, double v_ref, std::size_t cols);
  explicit TriggerEngine(const SonifierConfig &config, std::size_t cols)
      : TriggerEngine(config.radius, config.refractory_s, config.v_ref, cols) {}

  std::vector<TriggerEvent> trigger(const GrainCorpus &corpus, std::span<const BlockProbe> blocks, double now);

  void reset() { last_fired_.clear(); }

 private:
  double radius_;
  double refractory_;
  double v_ref_;
  std::size_t cols_;
  std::map<std::pair<std::size_t, std::size_t>, double> last_fired_;  // (block, grain) -> time
};

struct RenderOptions {
  double limiter_knee = 0.5;
  bool apply_limiter = true;
};

/// Soft limiter: identity for |x| <= knee, then a tanh shoulder that
/// approaches +-1.
double soft_limit(double x, double knee);

/// Overlap-adds each event's Hann-enveloped grain, scaled by gain and panned
/// with L = sqrt((1 - pan) / 2), R = sqrt((1 + pan) / 2). The buffer holds
/// round(duration * sample_rate) frames; an event starts at frame
/// round(time * sample_rate) and grain tails past the end are cut.
/// Throws Error(reference) for an unknown grain id and Error(parameter) for
/// an event outside [0, duration].
StereoAudio render(std::span<const TriggerEvent> events, const GrainCorpus &corpus, double duration,
                   const RenderOptions &options = {});

/// Offline mapping of catalog events to grain firings, one per event starting
/// inside [0, duration]: x = log(area) / log(max area), y and pan are drawn
/// from the seeded generator, the nearest grain fires at t_start with gain
/// log(1 + area) / log(1 + max area). Block indices are reported as (0, 0).
std::vector<TriggerEvent> catalog_triggers(const EventCatalog &catalog, const GrainCorpus &corpus, double duration,
                                           std::uint64_t seed);

/// Corpus sidecar: JSON with the source name, sample rate and grain list.
std::string corpus_to_json(const GrainCorpus &corpus);
/// Rebuilds a corpus from its sidecar and the (already resampled) audio.
GrainCorpus corpus_from_json(const std::string &text, std::vector<double> samples);

void write_trigger_csv(std::ostream &out, std::span<const TriggerEvent> events);
std::vector<TriggerEvent> read_trigger_csv(std::istream &in);

}  // namespace stickslip
