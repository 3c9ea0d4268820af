#include "mpopi/random.hpp"

#include <cmath>
#include <numbers>

namespace mpopi {

void NormalStream::refill() {
  const auto out = Philox4x32::generate({block_++, sample_, cycle_, step_}, key_);
  const double u1 = to_unit(out[0], out[1]);
  const double u2 = to_unit(out[2], out[3]);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  cache_ = {radius * std::cos(angle), radius * std::sin(angle)};
  cached_ = 2;
}

double NormalStream::next() {
  if (cached_ == 0) refill();
  return cache_[static_cast<std::size_t>(2 - cached_--)];
}

}  // namespace mpopi
