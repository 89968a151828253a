#include "handshake/rng.hpp"

#include <cmath>
#include <numbers>

namespace handshake {

double standard_normal(Rng& rng) {
  // u1 in (0, 1] keeps the log finite.
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace handshake
