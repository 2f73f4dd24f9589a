#include "mlml/rng.hpp"

#include <cmath>
#include <numbers>

#include "mlml/errors.hpp"

namespace mlml {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

}  // namespace

RngSeed derive_seed(RngSeed master, std::string_view stream_name) {
    std::uint64_t h = 0xCBF29CE484222325ull;  // FNV-1a
    for (unsigned char c : stream_name) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return splitmix64(splitmix64(master) ^ h);
}

double RngStream::uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_open(double lo, double hi) {
    require(lo < hi, "uniform_open: empty interval");
    for (;;) {
        double v = lo + (hi - lo) * uniform01();
        if (v > lo && v < hi) return v;
    }
}

std::uint64_t RngStream::below(std::uint64_t n) {
    require(n > 0, "below: n must be positive");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    for (;;) {
        std::uint64_t v = engine_();
        if (v < limit) return v % n;
    }
}

double RngStream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

}  // namespace mlml
