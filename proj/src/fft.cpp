#include "stickslip/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <mutex>
#include <numbers>

#include "stickslip/error.hpp"

namespace stickslip {

namespace {
// Plan creation and destruction in FFTW are not thread-safe.
std::mutex &planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

struct RealFft::Plan {
  double *in = nullptr;
  fftw_complex *out = nullptr;
  fftw_plan plan = nullptr;
  fftw_plan inverse_plan = nullptr;
  std::vector<std::complex<double>> result;
  std::vector<double> samples;

  ~Plan() {
    std::lock_guard lock(planner_mutex());
    if (plan) fftw_destroy_plan(plan);
    if (inverse_plan) fftw_destroy_plan(inverse_plan);
    fftw_free(in);
    fftw_free(out);
  }
};

RealFft::RealFft(std::size_t n) : n_(n), plan_(std::make_unique<Plan>()) {
  if (n == 0) throw Error(ErrorKind::parameter, "transform length must be positive");
  std::lock_guard lock(planner_mutex());
  plan_->in = fftw_alloc_real(n);
  plan_->out = fftw_alloc_complex(n / 2 + 1);
  plan_->plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), plan_->in, plan_->out, FFTW_ESTIMATE);
  plan_->result.resize(n / 2 + 1);
}

RealFft::~RealFft() = default;
RealFft::RealFft(RealFft &&) noexcept = default;
RealFft &RealFft::operator=(RealFft &&) noexcept = default;

std::span<const std::complex<double>> RealFft::forward(std::span<const double> input) {
  if (input.size() != n_) throw Error(ErrorKind::parameter, "transform input has the wrong length");
  std::memcpy(plan_->in, input.data(), n_ * sizeof(double));
  fftw_execute(plan_->plan);
  for (std::size_t k = 0; k < plan_->result.size(); ++k)
    plan_->result[k] = {plan_->out[k][0], plan_->out[k][1]};
  return plan_->result;
}

std::span<const double> RealFft::inverse(std::span<const std::complex<double>> bins) {
  if (bins.size() != n_ / 2 + 1) throw Error(ErrorKind::parameter, "inverse transform input has the wrong length");
  if (!plan_->inverse_plan) {
    std::lock_guard lock(planner_mutex());
    plan_->inverse_plan =
        fftw_plan_dft_c2r_1d(static_cast<int>(n_), plan_->out, plan_->in, FFTW_ESTIMATE | FFTW_DESTROY_INPUT);
    plan_->samples.resize(n_);
  }
  for (std::size_t k = 0; k < bins.size(); ++k) {
    plan_->out[k][0] = bins[k].real();
    plan_->out[k][1] = bins[k].imag();
  }
  fftw_execute(plan_->inverse_plan);
  std::memcpy(plan_->samples.data(), plan_->in, n_ * sizeof(double));
  return plan_->samples;
}

std::vector<double> autocorrelation(std::span<const double> x, std::size_t max_lag) {
  max_lag = std::min(max_lag, x.empty() ? 0 : x.size() - 1);
  std::vector<double> r(max_lag + 1, 0.0);
  if (x.empty()) return r;
  std::size_t n = 1;
  while (n < x.size() + max_lag + 1) n <<= 1;
  RealFft fft(n);
  std::vector<double> padded(n, 0.0);
  std::copy(x.begin(), x.end(), padded.begin());
  const auto spectrum = fft.forward(padded);
  std::vector<std::complex<double>> power(spectrum.size());
  for (std::size_t k = 0; k < spectrum.size(); ++k) power[k] = std::norm(spectrum[k]);
  const auto back = fft.inverse(power);
  for (std::size_t k = 0; k <= max_lag; ++k) r[k] = back[k] / static_cast<double>(n);
  return r;
}

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (n < 2) return w;
  for (std::size_t k = 0; k < n; ++k)
    w[k] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n - 1));
  return w;
}

std::vector<double> hann_window_periodic(std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (n < 2) return w;
  for (std::size_t k = 0; k < n; ++k)
    w[k] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
  return w;
}

}  // namespace stickslip
