#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "stickslip/catalog.hpp"

namespace stickslip {

struct CcdfPoint {
  double area = 0.0;
  double rate = 0.0;  // events with area >= `area`, per unit observation time
};

/// Complementary cumulative event rate at every distinct observed area.
/// Throws Error(empty_input) for an empty catalog.
std::vector<CcdfPoint> ccdf(const EventCatalog &catalog);
std::vector<CcdfPoint> ccdf(std::span<const std::uint64_t> areas, double observation_window);

/// Power-law fit to event areas. `b_hat` is the exponent of the cumulative
/// count N(>=A) ~ A^-b; the density exponent is b + 1.
struct PowerLawFit {
  double b_hat = 0.0;
  double b_stderr = 0.0;
  double x_min = 0.0;
  std::size_t n_tail = 0;
  double ks_distance = 0.0;
  // Least-squares line through the log-log CCDF on [fit_lo, fit_hi].
  double log_log_slope = 0.0;
  double log_log_intercept = 0.0;
  double log_log_r2 = 0.0;
  double fit_lo = 0.0;
  double fit_hi = 0.0;

  double tau() const { return b_hat + 1.0; }
  double decades() const;
};

struct PowerLawOptions {
  std::optional<double> x_min;      // scanned by minimum KS distance when absent
  std::optional<double> fit_max;    // upper end of the log-log line fit
  std::size_t min_tail = 10;
  // The log-log line is fitted to the CCDF sampled at this many log-spaced
  // areas per decade, so dense large-area points do not dominate.
  int points_per_decade = 10;
  // Without fit_max the line fit stops where fewer than this many events
  // remain in the tail.
  std::size_t min_line_count = 100;
};

/// Discrete power-law fit using the continuous approximation with a -0.5
/// continuity correction:
///   b = n_tail / sum ln(A_i / (x_min - 0.5)).
/// Throws Error(sample_size) for fewer than min_tail samples >= x_min and
/// Error(degenerate) when every sample is equal.
PowerLawFit fit_power_law(std::span<const std::uint64_t> areas, const PowerLawOptions &options = {});

/// Same estimator for real-valued samples (no continuity correction).
double fit_power_law_continuous(std::span<const double> samples, double x_min);

enum class ActivityQuantity { energy, moment };

/// Released energy (or moment) per time bin. An event's quantity is spread
/// uniformly over [t_start, t_end]; instantaneous events land in the bin of
/// their start time. Length is ceil(observation_window / bin).
std::vector<double> activity_series(const EventCatalog &catalog, double bin,
                                    ActivityQuantity quantity = ActivityQuantity::energy);

struct Spectrum {
  std::vector<double> frequency;  // Hz, starting at 0
  std::vector<double> power;      // one-sided density, units^2 / Hz
  std::size_t segment_count = 0;
  std::size_t segment_length = 0;
  double sample_rate = 1.0;
};

struct SpectrumOptions {
  std::size_t segment_length = 4096;
  double overlap = 0.5;      // fraction of a segment shared with the next
  bool subtract_mean = true;  // per-segment mean removal before windowing
};

/// Welch averaged periodogram with a periodic Hann window.
/// Throws Error(input_format) if the series is shorter than two segments.
Spectrum power_spectrum(std::span<const double> series, double sample_rate, const SpectrumOptions &options = {});

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double band_lo = 0.0;
  double band_hi = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};

/// Least-squares line through log10(power) vs log10(frequency) over the
/// positive frequencies in [band_lo, band_hi]. Throws Error(parameter) if the
/// band holds fewer than two bins.
SlopeFit fit_spectral_slope(const Spectrum &spectrum, double band_lo, double band_hi);

void write_spectrum_csv(std::ostream &out, const Spectrum &spectrum);

}  // namespace stickslip
