#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "bubbles/bubbles.hpp"

namespace testing_util {

inline std::vector<double> random_walk(std::size_t T, std::uint64_t seed, double sigma = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, sigma);
    std::vector<double> y(T);
    double v = 0.0;
    for (auto& x : y) x = v += nd(rng);
    return y;
}

/// Random walk rounded to multiples of 2^-20, so integer shifts and power-of-two scalings are exact.
inline std::vector<double> dyadic_walk(std::size_t T, std::uint64_t seed) {
    auto v = random_walk(T, seed);
    for (auto& x : v) x = std::ldexp(std::round(std::ldexp(x, 20)), -20);
    return v;
}

inline bubbles::Series rw_series(std::size_t T, std::uint64_t seed) { return bubbles::Series(random_walk(T, seed)); }

/// Random walk with an explosive stretch rho on (a, b] of 1-based observations.
inline bubbles::Series bubble_series(std::size_t T, std::size_t a, std::size_t b, double rho, std::uint64_t seed,
                                     double level = 100.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> y(T);
    double v = level;
    for (std::size_t t = 1; t <= T; ++t) {
        if (t > a && t <= b) v = rho * v + nd(rng);
        else v += nd(rng);
        y[t - 1] = v;
    }
    return bubbles::Series(y);
}

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("bubbles_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    [[nodiscard]] std::string file(const std::string& name) const { return (path_ / name).string(); }
    [[nodiscard]] std::string write(const std::string& name, const std::string& text) const {
        const auto p = file(name);
        std::ofstream(p) << text;
        return p;
    }

private:
    std::filesystem::path path_;
};

}  // namespace testing_util
