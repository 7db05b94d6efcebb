#include "stickslip/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "stickslip/error.hpp"
#include "stickslip/fft.hpp"

namespace stickslip {

std::vector<CcdfPoint> ccdf(std::span<const std::uint64_t> areas, double observation_window) {
  if (areas.empty()) throw Error(ErrorKind::empty_input, "cannot build a CCDF from an empty catalog");
  if (!(observation_window > 0.0)) throw Error(ErrorKind::parameter, "observation window must be positive");
  std::vector<std::uint64_t> sorted(areas.begin(), areas.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<CcdfPoint> points;
  const std::size_t n = sorted.size();
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && sorted[j] == sorted[i]) ++j;
    points.push_back({static_cast<double>(sorted[i]), static_cast<double>(n - i) / observation_window});
    i = j;
  }
  return points;
}

std::vector<CcdfPoint> ccdf(const EventCatalog &catalog) {
  const auto areas = catalog.areas();
  return ccdf(areas, catalog.observation_window);
}

double PowerLawFit::decades() const {
  return fit_hi > 0.0 && fit_lo > 0.0 ? std::log10(fit_hi / fit_lo) : 0.0;
}

namespace {

struct Line {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

Line least_squares(const std::vector<double> &x, const std::vector<double> &y) {
  const auto n = static_cast<double>(x.size());
  Line line;
  if (x.size() < 2) return line;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) return line;
  line.slope = sxy / sxx;
  line.intercept = my - line.slope * mx;
  line.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return line;
}

// Distinct values with suffix statistics, used by the x_min scan.
struct Tail {
  std::vector<double> value;       // distinct, ascending
  std::vector<std::size_t> count;  // samples >= value[k]
  std::vector<double> log_sum;     // sum of ln(A) over samples >= value[k]
};

Tail summarise(const std::vector<std::uint64_t> &sorted) {
  Tail t;
  const std::size_t n = sorted.size();
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && sorted[j] == sorted[i]) ++j;
    t.value.push_back(static_cast<double>(sorted[i]));
    t.count.push_back(n - i);
    i = j;
  }
  t.log_sum.assign(t.value.size() + 1, 0.0);
  for (std::size_t k = t.value.size(); k-- > 0;) {
    const std::size_t here = t.count[k] - (k + 1 < t.value.size() ? t.count[k + 1] : 0);
    t.log_sum[k] = t.log_sum[k + 1] + static_cast<double>(here) * std::log(t.value[k]);
  }
  return t;
}

double mle(const Tail &t, std::size_t k, double x_min) {
  const auto n = static_cast<double>(t.count[k]);
  return n / (t.log_sum[k] - n * std::log(x_min - 0.5));
}

double ks_distance(const Tail &t, std::size_t k0, double x_min, double b) {
  const auto n = static_cast<double>(t.count[k0]);
  const double base = x_min - 0.5;
  auto model = [&](double x) { return x <= x_min ? 1.0 : std::pow((x - 0.5) / base, -b); };
  double d = 0.0;
  for (std::size_t k = k0; k < t.value.size(); ++k) {
    const double emp = static_cast<double>(t.count[k]) / n;
    const double emp_above = k + 1 < t.value.size() ? static_cast<double>(t.count[k + 1]) / n : 0.0;
    d = std::max(d, std::abs(emp - model(t.value[k])));
    d = std::max(d, std::abs(emp_above - model(t.value[k] + 1.0)));
  }
  return std::min(d, 1.0);
}

}  // namespace

PowerLawFit fit_power_law(std::span<const std::uint64_t> areas, const PowerLawOptions &options) {
  if (areas.size() < options.min_tail)
    throw Error(ErrorKind::sample_size, "power-law fit needs at least " + std::to_string(options.min_tail) +
                                            " samples, got " + std::to_string(areas.size()));
  std::vector<std::uint64_t> sorted(areas.begin(), areas.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back())
    throw Error(ErrorKind::degenerate, "power-law fit is undefined when every sample is equal");
  if (sorted.front() == 0) throw Error(ErrorKind::parameter, "areas must be at least 1");
  const Tail tail = summarise(sorted);

  PowerLawFit fit;
  std::size_t k_min = 0;
  if (options.x_min) {
    if (!(*options.x_min >= 1.0)) throw Error(ErrorKind::parameter, "x_min must be at least 1");
    fit.x_min = *options.x_min;
    k_min = static_cast<std::size_t>(std::lower_bound(tail.value.begin(), tail.value.end(), fit.x_min) -
                                     tail.value.begin());
    if (k_min == tail.value.size() || tail.count[k_min] < options.min_tail)
      throw Error(ErrorKind::sample_size, "fewer than " + std::to_string(options.min_tail) + " samples >= x_min");
    fit.b_hat = mle(tail, k_min, fit.x_min);
    fit.ks_distance = ks_distance(tail, k_min, fit.x_min, fit.b_hat);
  } else {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k + 1 < tail.value.size() && tail.count[k] >= options.min_tail; ++k) {
      const double b = mle(tail, k, tail.value[k]);
      const double d = ks_distance(tail, k, tail.value[k], b);
      if (d < best) {
        best = d;
        k_min = k;
        fit.b_hat = b;
        fit.ks_distance = d;
        fit.x_min = tail.value[k];
      }
    }
    if (!std::isfinite(best))
      throw Error(ErrorKind::sample_size, "no x_min leaves " + std::to_string(options.min_tail) + " tail samples");
  }
  fit.n_tail = tail.count[k_min];
  fit.b_stderr = fit.b_hat / std::sqrt(static_cast<double>(fit.n_tail));

  // Log-log line through the CCDF.
  fit.fit_lo = fit.x_min;
  if (options.fit_max) {
    fit.fit_hi = *options.fit_max;
  } else {
    fit.fit_hi = fit.x_min;
    for (std::size_t k = k_min; k < tail.value.size() && tail.count[k] >= options.min_line_count; ++k)
      fit.fit_hi = tail.value[k];
  }
  std::vector<double> lx, ly;
  const double step = 1.0 / static_cast<double>(options.points_per_decade);
  const auto total = static_cast<double>(sorted.size());
  for (int i = 0;; ++i) {
    const double a = fit.fit_lo * std::pow(10.0, step * i);
    if (a > fit.fit_hi * (1.0 + 1e-12)) break;
    const auto above = static_cast<double>(sorted.end() -
                                           std::lower_bound(sorted.begin(), sorted.end(), static_cast<std::uint64_t>(std::ceil(a - 1e-9))));
    if (above <= 0.0) break;
    lx.push_back(std::log10(a));
    ly.push_back(std::log10(above / total));
  }
  const Line line = least_squares(lx, ly);
  fit.log_log_slope = line.slope;
  fit.log_log_intercept = line.intercept;
  fit.log_log_r2 = line.r2;
  return fit;
}

double fit_power_law_continuous(std::span<const double> samples, double x_min) {
  double sum = 0.0;
  std::size_t n = 0;
  for (double s : samples) {
    if (s >= x_min) {
      sum += std::log(s / x_min);
      ++n;
    }
  }
  if (n < 2 || sum <= 0.0) throw Error(ErrorKind::sample_size, "continuous power-law fit needs a non-trivial tail");
  return static_cast<double>(n) / sum;
}

std::vector<double> activity_series(const EventCatalog &catalog, double bin, ActivityQuantity quantity) {
  if (!(bin > 0.0)) throw Error(ErrorKind::parameter, "activity bin must be positive");
  const auto length = static_cast<std::size_t>(std::ceil(catalog.observation_window / bin));
  std::vector<double> series(length, 0.0);
  if (length == 0) return series;
  const auto bin_of = [&](double t) {
    return std::min(static_cast<std::size_t>(std::max(0.0, std::floor(t / bin))), length - 1);
  };
  for (const auto &e : catalog.events) {
    const double amount = quantity == ActivityQuantity::energy ? e.energy : e.moment;
    const std::size_t first = bin_of(e.t_start);
    const std::size_t last = bin_of(e.t_end);
    const double duration = e.t_end - e.t_start;
    if (first == last || !(duration > 0.0)) {
      series[first] += amount;
      continue;
    }
    // Overlap fractions; the final bin takes the remainder so the event's
    // total is preserved exactly up to one rounding.
    double placed = 0.0;
    for (std::size_t k = first; k < last; ++k) {
      const double lo = std::max(e.t_start, static_cast<double>(k) * bin);
      const double hi = std::min(e.t_end, static_cast<double>(k + 1) * bin);
      const double part = hi > lo ? amount * (hi - lo) / duration : 0.0;
      series[k] += part;
      placed += part;
    }
    series[last] += amount - placed;
  }
  return series;
}

Spectrum power_spectrum(std::span<const double> series, double sample_rate, const SpectrumOptions &options) {
  const std::size_t len = options.segment_length;
  if (len < 2) throw Error(ErrorKind::parameter, "segment length must be at least 2");
  if (!(sample_rate > 0.0)) throw Error(ErrorKind::parameter, "sample rate must be positive");
  if (!(options.overlap >= 0.0 && options.overlap < 1.0)) throw Error(ErrorKind::parameter, "overlap must lie in [0, 1)");
  if (series.size() < 2 * len)
    throw Error(ErrorKind::input_format, "series of length " + std::to_string(series.size()) +
                                             " is shorter than two segments of " + std::to_string(len));
  const auto hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(len) * (1.0 - options.overlap))));
  const auto window = hann_window_periodic(len);
  double window_power = 0.0;
  for (double w : window) window_power += w * w;

  RealFft fft(len);
  std::vector<double> segment(len);
  Spectrum spectrum;
  spectrum.segment_length = len;
  spectrum.sample_rate = sample_rate;
  spectrum.power.assign(len / 2 + 1, 0.0);
  for (std::size_t start = 0; start + len <= series.size(); start += hop) {
    double mean = 0.0;
    if (options.subtract_mean) {
      for (std::size_t i = 0; i < len; ++i) mean += series[start + i];
      mean /= static_cast<double>(len);
    }
    for (std::size_t i = 0; i < len; ++i) segment[i] = (series[start + i] - mean) * window[i];
    const auto bins = fft.forward(segment);
    for (std::size_t k = 0; k < bins.size(); ++k) spectrum.power[k] += std::norm(bins[k]);
    ++spectrum.segment_count;
  }
  const double scale = 1.0 / (sample_rate * window_power * static_cast<double>(spectrum.segment_count));
  spectrum.frequency.resize(spectrum.power.size());
  for (std::size_t k = 0; k < spectrum.power.size(); ++k) {
    const bool edge = k == 0 || (len % 2 == 0 && k == len / 2);
    spectrum.power[k] *= scale * (edge ? 1.0 : 2.0);
    spectrum.frequency[k] = sample_rate * static_cast<double>(k) / static_cast<double>(len);
  }
  return spectrum;
}

SlopeFit fit_spectral_slope(const Spectrum &spectrum, double band_lo, double band_hi) {
  if (!(band_lo > 0.0) || !(band_hi > band_lo)) throw Error(ErrorKind::parameter, "spectral band must satisfy 0 < lo < hi");
  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < spectrum.frequency.size(); ++k) {
    const double f = spectrum.frequency[k];
    if (f >= band_lo && f <= band_hi && spectrum.power[k] > 0.0) {
      lx.push_back(std::log10(f));
      ly.push_back(std::log10(spectrum.power[k]));
    }
  }
  if (lx.size() < 2) throw Error(ErrorKind::parameter, "spectral band lies outside the spectrum");
  const Line line = least_squares(lx, ly);
  return {line.slope, line.intercept, band_lo, band_hi, line.r2, lx.size()};
}

void write_spectrum_csv(std::ostream &out, const Spectrum &spectrum) {
  out << "frequency,power\n";
  for (std::size_t k = 0; k < spectrum.frequency.size(); ++k)
    out << format_double(spectrum.frequency[k]) << ',' << format_double(spectrum.power[k]) << '\n';
}

}  // namespace stickslip
