#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace mlml {

using RngSeed = std::uint64_t;

/// Mixes a master seed with a stream name so that independent stochastic
/// components (data, corruption, init, shuffle, disturbance) never share
/// a generator state.
RngSeed derive_seed(RngSeed master, std::string_view stream_name);

/// Deterministic random stream. All distributions are implemented here
/// rather than through <random> distributions, whose output is
/// implementation-defined.
class RngStream {
public:
    explicit RngStream(RngSeed seed) : engine_(seed) {}
    RngStream(RngSeed master, std::string_view name) : engine_(derive_seed(master, name)) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform01();
    /// Uniform in the open interval (lo, hi); requires lo < hi.
    double uniform_open(double lo, double hi);
    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
    /// Uniform integer in [0, n); requires n > 0.
    std::uint64_t below(std::uint64_t n);
    double normal();
    bool bernoulli(double p) { return uniform01() < p; }

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace mlml
