#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace frans {

/// Seeded generator with platform-independent draws.
///
/// std::mt19937_64 output is fully specified by the standard, the distributions in <random> are
/// not, so the draws below are computed here. Independent sub-streams (windowing, init, batching,
/// clustering, ...) are derived from one run seed plus a stream name.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    static Rng stream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0);

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer on [0, n); n must be positive.
    std::uint64_t index(std::uint64_t n);
    double normal();

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[index(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t mix_seed(std::uint64_t seed, std::string_view name, std::uint64_t index);

}  // namespace frans
