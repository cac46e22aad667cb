#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace hlda {

// Random number source owned by a single chain.  All variate generation goes
// through this wrapper so that the full generator state can be serialized and
// a resumed chain replays the exact same stream (no hidden caches, unlike
// std::normal_distribution).
class Rng {
public:
  explicit Rng(std::uint64_t seed = 0) : eng_(seed) {}

  std::uint64_t next_raw() { return eng_(); }

  // uniform on [0, 1)
  double uniform() { return (eng_() >> 11) * 0x1.0p-53; }

  // uniform on (0, 1), never exactly zero
  double uniform_pos() {
    double u;
    do {
      u = uniform();
    } while (u <= 0.0);
    return u;
  }

  int uniform_int(int n) {
    // n small in practice; modulo bias is negligible for n << 2^64
    return static_cast<int>(eng_() % static_cast<std::uint64_t>(n));
  }

  double normal() {
    // polar method, spare value discarded to keep state serializable
    for (;;) {
      double u = 2.0 * uniform() - 1.0;
      double v = 2.0 * uniform() - 1.0;
      double s = u * u + v * v;
      if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
    }
  }

  double exponential(double rate) {
    if (rate <= 0.0) throw std::invalid_argument("exponential: rate must be > 0");
    return -std::log(uniform_pos()) / rate;
  }

  // Marsaglia-Tsang; shape < 1 handled by boosting
  double gamma(double shape, double rate = 1.0) {
    if (shape <= 0.0 || rate <= 0.0)
      throw std::invalid_argument("gamma: shape and rate must be > 0");
    if (shape < 1.0) {
      double u = uniform_pos();
      return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
    }
    double d = shape - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      double u = uniform_pos();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
    }
  }

  double beta(double a, double b) {
    double x = gamma(a);
    double y = gamma(b);
    return x / (x + y);
  }

  std::string serialize() const {
    std::ostringstream os;
    os << eng_;
    return os.str();
  }

  void deserialize(const std::string& s) {
    std::istringstream is(s);
    is >> eng_;
    if (is.fail()) throw std::runtime_error("Rng: malformed serialized state");
  }

  bool operator==(const Rng& o) const { return eng_ == o.eng_; }

private:
  std::mt19937_64 eng_;
};

}  // namespace hlda
