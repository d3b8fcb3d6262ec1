#pragma once

#include <cmath>
#include <deque>
#include <vector>

#include "tanglesim/bytes.hpp"
#include "tanglesim/rng.hpp"

namespace tanglesim {

// Adaptive PoW parameters. Difficulty grows with a node's recent issuance
// rate: d = base + ceil(gamma * max(0, r - freeCount)) where r counts the
// node's issuances inside the sliding window. freeCount defaults to zero,
// i.e. any recent traffic already raises the exponent.
struct PowParams {
    int baseDifficulty = 8;
    double gamma = 0.1;
    double windowSeconds = 60.0;
    double hashRate = 1e6;  // hashes per sim-second
    int freeCount = 0;
    enum class CountMode : std::uint8_t { Attachments, Attempts } countMode = CountMode::Attachments;

    void validate() const {
        if (baseDifficulty < 0) throw InvariantViolation("pow.baseDifficulty must be >= 0");
        if (gamma < 0) throw InvariantViolation("pow.gamma must be >= 0");
        if (windowSeconds <= 0) throw InvariantViolation("pow.windowSeconds must be > 0");
        if (hashRate <= 0) throw InvariantViolation("pow.hashRate must be > 0");
        if (freeCount < 0) throw InvariantViolation("pow.freeCount must be >= 0");
    }
};

// Per-node sliding-window issuance tracker feeding the difficulty rule.
class RateLimiter {
public:
    RateLimiter(PowParams params, std::size_t nodeCount) : params_(params), history_(nodeCount) {}

    const PowParams& params() const { return params_; }

    void record_issuance(std::size_t node, double t) {
        auto& h = history_[node];
        h.push_back(t);
        prune(h, t);
    }

    // Issuances in (now - W, now].
    int issuance_count(std::size_t node, double now) const {
        const auto& h = history_[node];
        int count = 0;
        for (auto it = h.rbegin(); it != h.rend() && *it > now - params_.windowSeconds; ++it) {
            if (*it <= now) ++count;
        }
        return count;
    }

    int difficulty_for(std::size_t node, double now) const {
        int rate = issuance_count(node, now);
        int excess = std::max(0, rate - params_.freeCount);
        return params_.baseDifficulty + static_cast<int>(std::ceil(params_.gamma * excess));
    }

private:
    void prune(std::deque<double>& h, double now) {
        while (!h.empty() && h.front() <= now - params_.windowSeconds) h.pop_front();
    }

    PowParams params_;
    std::vector<std::deque<double>> history_;
};

// Simulated solve time: geometric number of attempts with success
// probability 2^-difficulty, divided by the hash rate.
inline double pow_work_time(int difficulty, double hashRate, Rng& rng) {
    double successProbability = std::exp2(-static_cast<double>(difficulty));
    return rng.geometric_attempts(successProbability) / hashRate;
}

inline double expected_pow_time(int difficulty, double hashRate) {
    return std::exp2(static_cast<double>(difficulty)) / hashRate;
}

// Access-mana-proportional share of the network issuance budget.
inline double scheduler_quota(double accessManaShare, double networkIssueBudget) {
    return accessManaShare * networkIssueBudget;
}

}  // namespace tanglesim
