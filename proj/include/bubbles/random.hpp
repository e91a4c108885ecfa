#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace bubbles {

using Rng = std::mt19937_64;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Independent generator for (seed, stream); stream is usually a replicate index.
inline Rng stream_rng(std::uint64_t seed, std::uint64_t stream) {
    return Rng(splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL)));
}

/// Two-level stream derivation, e.g. (seed, sample-size index, replicate).
inline Rng stream_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return stream_rng(splitmix64(seed ^ splitmix64(a + 0x1234567ULL)), b);
}

enum class MultiplierKind { gaussian, rademacher, skewed };

inline std::string to_string(MultiplierKind m) {
    switch (m) {
        case MultiplierKind::gaussian: return "gaussian";
        case MultiplierKind::rademacher: return "rademacher";
        case MultiplierKind::skewed: return "skewed";
    }
    return "gaussian";
}

inline MultiplierKind multiplier_from_string(std::string_view s) {
    if (s == "gaussian") return MultiplierKind::gaussian;
    if (s == "rademacher") return MultiplierKind::rademacher;
    if (s == "skewed") return MultiplierKind::skewed;
    throw std::invalid_argument("unknown multiplier '" + std::string(s) + "'");
}

/// Mean-zero, unit-variance bootstrap multiplier. The skewed kind is
/// u/sqrt(2) + (v^2 - 1)/2 with u, v independent N(0,1), third moment 1.
class Multiplier {
public:
    explicit Multiplier(MultiplierKind kind = MultiplierKind::gaussian) : kind_(kind) {}

    double operator()(Rng& rng) {
        switch (kind_) {
            case MultiplierKind::gaussian: return normal_(rng);
            case MultiplierKind::rademacher: return (rng() >> 63) ? 1.0 : -1.0;
            case MultiplierKind::skewed: {
                const double u = normal_(rng);
                const double v = normal_(rng);
                return u / std::sqrt(2.0) + (v * v - 1.0) / 2.0;
            }
        }
        return 0.0;
    }

private:
    MultiplierKind kind_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace bubbles
