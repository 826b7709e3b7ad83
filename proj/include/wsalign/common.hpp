#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace wsalign {

// Error taxonomy used across the library. All carry a human-readable message;
// the CLI maps each type to a distinct exit code.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shortest exact round-trip formatting for float64 (up to 17 significant
// digits). Every float written to CSV/JSON artifacts goes through this.
inline std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Counter-based deterministic RNG (splitmix64 core). No global state; streams
// are derived from explicit keys so results never depend on call order across
// components.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(mix(seed + kGolden)) {}

  // Derive an independent stream from a seed plus context keys,
  // e.g. Rng::keyed(seed, {round, client_id}).
  static Rng keyed(uint64_t seed, std::initializer_list<uint64_t> keys) {
    uint64_t s = mix(seed + kGolden);
    for (uint64_t k : keys) s = mix(s ^ mix(k + kGolden));
    Rng r(0);
    r.state_ = s;
    return r;
  }

  uint64_t next_u64() {
    state_ += kGolden;
    return mix(state_);
  }

  // Uniform in [0, 1).
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1].
  double next_double_open() {
    return double((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Uniform integer in [0, n).
  int64_t next_index(int64_t n) {
    return int64_t(next_u64() % uint64_t(n));
  }

  // Standard normal via Box-Muller (two fresh uniforms per draw).
  double next_gaussian() {
    double u1 = next_double_open();
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // Gamma(shape, 1) via Marsaglia-Tsang; shape < 1 boosted through
  // Gamma(shape+1) * U^(1/shape).
  double next_gamma(double shape) {
    if (shape < 1.0) {
      double u = next_double_open();
      return next_gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    double d = shape - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = next_gaussian();
      double t = 1.0 + c * x;
      if (t <= 0.0) continue;
      double v = t * t * t;
      double u = next_double_open();
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) {
        return d * v;
      }
    }
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (int64_t i = int64_t(v.size()) - 1; i > 0; --i) {
      int64_t j = next_index(i + 1);
      std::swap(v[i], v[size_t(j)]);
    }
  }

 private:
  static constexpr uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  static uint64_t mix(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  uint64_t state_;
};

}  // namespace wsalign
