#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace stickslip {

/// Forward real-to-complex transform of a fixed length (FFTW backed).
/// Instances are not shareable across threads; create one per thread.
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(RealFft &&) noexcept;
  RealFft &operator=(RealFft &&) noexcept;

  std::size_t size() const { return n_; }

  /// Returns the n/2 + 1 non-negative frequency bins of `input`.
  std::span<const std::complex<double>> forward(std::span<const double> input);

  /// Unnormalised inverse of forward(): takes n/2 + 1 bins, returns n samples
  /// scaled by n.
  std::span<const double> inverse(std::span<const std::complex<double>> bins);

 private:
  struct Plan;
  std::size_t n_;
  std::unique_ptr<Plan> plan_;
};

/// Biased autocorrelation r[k] = sum_t x[t] x[t+k] for k in [0, max_lag],
/// computed through a zero-padded transform.
std::vector<double> autocorrelation(std::span<const double> x, std::size_t max_lag);

/// Symmetric Hann window of length n (n == 1 gives {1}).
std::vector<double> hann_window(std::size_t n);

/// Periodic Hann window, the usual choice for spectral analysis.
std::vector<double> hann_window_periodic(std::size_t n);

}  // namespace stickslip
