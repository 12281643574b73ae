#include "ppl/rng.hpp"

#include <cmath>

namespace ppl {

double Rng::normal() {
  if (cached_normal_valid_) {
    cached_normal_valid_ = false;
    return cached_normal_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  cached_normal_ = v * f;
  cached_normal_valid_ = true;
  return u * f;
}

}  // namespace ppl
