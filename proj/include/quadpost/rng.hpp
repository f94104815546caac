#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace quadpost {

/// Deterministic random source for the synthetic-data generators and Monte
/// Carlo checks. Uniforms come from mt19937_64 bits directly and normals
/// from Box-Muller, so a seed pins the full stream independent of the
/// standard library's distribution implementations.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform() {
        // 53 random bits in (0, 1]; never returns 0.
        return (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u = uniform();
        const double v = uniform();
        const double r = std::sqrt(-2.0 * std::log(u));
        const double a = 2.0 * std::numbers::pi * v;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Rejection-free modulo is fine here; bias is ~n / 2^64.
        return gen_() % n;
    }

  private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace quadpost
