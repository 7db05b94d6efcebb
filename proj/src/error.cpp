#include "stickslip/error.hpp"

#include <cmath>
#include <numbers>

#include "stickslip/rng.hpp"

namespace stickslip {

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::parameter:
      return 2;
    case ErrorKind::config:
      return 4;
    case ErrorKind::divergence:
    case ErrorKind::runaway:
      return 5;
    default:
      return 3;
  }
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u = uniform();
  while (u <= 0.0) u = uniform();
  const double v = uniform();
  const double r = std::sqrt(-2.0 * std::log(u));
  spare_ = r * std::sin(2.0 * std::numbers::pi * v);
  has_spare_ = true;
  return r * std::cos(2.0 * std::numbers::pi * v);
}

}  // namespace stickslip
