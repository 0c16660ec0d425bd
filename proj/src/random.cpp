#include "agentprm/random.hpp"

#include <cmath>
#include <numbers>

namespace agentprm {

std::uint64_t hash_ints(std::uint64_t seed, const std::vector<int>& values) noexcept {
  std::uint64_t h = mix64(seed ^ values.size());
  for (int v : values) h = combine(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(v)));
  return h;
}

double Rng::normal() {
  double u1 = uniform();
  double u2 = uniform();
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace agentprm
