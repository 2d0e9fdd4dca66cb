#include "auxi/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "auxi/errors.hpp"

namespace auxi {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

double Rng::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  double u1 = 1.0 - uniform();  // (0, 1]
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 2.0 * std::numbers::pi * u2;
  cached_ = r * std::sin(a);
  has_cached_ = true;
  return r * std::cos(a);
}

int64_t Rng::index(int64_t n) {
  if (n <= 0) throw ContractError("Rng::index requires n > 0");
  uint64_t un = static_cast<uint64_t>(n);
  uint64_t lim = UINT64_MAX - UINT64_MAX % un;
  uint64_t x;
  do {
    x = bits();
  } while (x >= lim);
  return static_cast<int64_t>(x % un);
}

Rng Rng::fork(uint64_t stream) const {
  return Rng(splitmix64(seed_ ^ splitmix64(stream + 0x51ed2701ull)));
}

std::string Rng::state() const {
  std::ostringstream os;
  os << seed_ << " " << (has_cached_ ? 1 : 0) << " ";
  os.precision(17);
  os << cached_ << " " << eng_;
  return os.str();
}

void Rng::set_state(const std::string& s) {
  std::istringstream is(s);
  int flag = 0;
  is >> seed_ >> flag >> cached_ >> eng_;
  if (!is) throw ConfigError("malformed Rng state string");
  has_cached_ = flag != 0;
}

}  // namespace auxi
