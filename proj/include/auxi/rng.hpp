#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace auxi {

// mt19937_64 with hand-rolled value mappings. The engine sequence is fixed by
// the standard; std::uniform_real_distribution and friends are not, so all
// mappings from raw bits to values live here.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : seed_(seed), eng_(seed) {}

  uint64_t bits() { return eng_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal, Box-Muller with pair caching
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // uniform in [0, n), rejection sampled
  int64_t index(int64_t n);

  // Fisher-Yates
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int64_t i = static_cast<int64_t>(v.size()) - 1; i > 0; --i) {
      int64_t j = index(i + 1);
      std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(j)]);
    }
  }

  // Independent deterministic substream; does not advance this generator.
  Rng fork(uint64_t stream) const;

  std::string state() const;
  void set_state(const std::string& s);

 private:
  uint64_t seed_ = 0;
  std::mt19937_64 eng_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

uint64_t splitmix64(uint64_t x);

}  // namespace auxi
