#pragma once

#include <cmath>

namespace fedsim {

// Phi(z) through the complementary error function. erfc keeps full relative
// precision in the lower tail, where 0.5 * (1 + erf(z / sqrt 2)) cancels.
inline double standard_normal_cdf(double z) noexcept {
  return 0.5 * std::erfc(-z * 0.70710678118654752440);
}

}  // namespace fedsim
