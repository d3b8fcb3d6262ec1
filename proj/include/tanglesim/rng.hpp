#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace tanglesim {

// splitmix64, used only to expand seeds into generator state.
struct SplitMix64 {
    std::uint64_t x;

    std::uint64_t next() {
        std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
};

// xoshiro256** seeded via splitmix64. All derived draws use fixed integer
// algorithms so traces replay bit-identically regardless of standard
// library implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
        SplitMix64 sm{seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1))};
        for (auto& w : state_) w = sm.next();
    }

    std::uint64_t next() {
        std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform_range(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased draw in [0, n) (Lemire's method with rejection).
    std::uint64_t below(std::uint64_t n) {
        unsigned __int128 m = static_cast<unsigned __int128>(next()) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            std::uint64_t threshold = (0 - n) % n;
            while (low < threshold) {
                m = static_cast<unsigned __int128>(next()) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    bool coin() { return (next() >> 63) != 0; }

    // Exponential with the given rate (mean 1/rate).
    double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

    // Number of Bernoulli(p) attempts up to and including the first success.
    double geometric_attempts(double successProbability) {
        if (successProbability >= 1.0) return 1.0;
        double u = uniform();
        return 1.0 + std::floor(std::log1p(-u) / std::log1p(-successProbability));
    }

    // First k entries of a random permutation of items (partial Fisher-Yates).
    template <class T>
    std::vector<T> sample_without_replacement(std::vector<T> items, std::size_t k) {
        k = std::min(k, items.size());
        for (std::size_t i = 0; i < k; ++i) {
            std::size_t j = i + static_cast<std::size_t>(below(items.size() - i));
            std::swap(items[i], items[j]);
        }
        items.resize(k);
        return items;
    }

    template <class T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t state_[4];
};

// Fixed stream ids so every component draws from an independent generator.
namespace streams {
inline constexpr std::uint64_t kFpcProtocol = 1;
inline constexpr std::uint64_t kFpcThreshold = 2;
inline constexpr std::uint64_t kTipSelection = 3;
inline constexpr std::uint64_t kScenario = 4;
inline constexpr std::uint64_t kNodeIssue = 1000;
inline constexpr std::uint64_t kNodeWork = 2000;
}  // namespace streams

}  // namespace tanglesim
