#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace kernelstream {

/// Deterministic random stream: mt19937_64 with explicitly coded uniform and
/// Box-Muller normal conversions, so that sequences do not depend on the
/// standard library's distribution implementations. Consumption is fixed:
/// uniform() eats one engine draw, normal() eats two on every other call.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t raw() { return engine_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Standard normal via the trigonometric Box-Muller transform.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // 1 - u keeps the log argument in (0, 1].
        const double r = std::sqrt(-2.0 * std::log(1.0 - uniform()));
        const double theta = 2.0 * std::numbers::pi * uniform();
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace kernelstream
