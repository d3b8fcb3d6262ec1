#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tanglesim/bytes.hpp"
#include "tanglesim/rng.hpp"

namespace tanglesim {

struct QuorumInfeasible : Error {
    using Error::Error;
};

enum class Opinion : std::uint8_t { Dislike = 0, Like = 1 };

enum class AdversaryStrategy : std::uint8_t { InverseMajority, FixedLike, FixedDislike, RandomOpinion };

inline const char* to_string(AdversaryStrategy s) {
    switch (s) {
        case AdversaryStrategy::InverseMajority: return "InverseMajority";
        case AdversaryStrategy::FixedLike: return "FixedLike";
        case AdversaryStrategy::FixedDislike: return "FixedDislike";
        case AdversaryStrategy::RandomOpinion: return "RandomOpinion";
    }
    return "?";
}

// Full parameter set of one voting instance. The last floor(q*N) node
// indices act adversarially; the rest follow the protocol.
struct FpcConfig {
    int N = 100;         // node count
    int k = 10;          // quorum size
    double q = 0.0;      // adversarial fraction
    double p0 = 0.5;     // initial Like fraction among honest nodes
    double tau = 0.5;    // round-1 threshold
    double beta = 0.3;   // later thresholds drawn from [beta, 1-beta]
    int l = 10;          // consecutive unchanged rounds to finalize (~log2 of the largest supported N)
    int M = 100;         // round cap
    bool manaWeighting = false;
    AdversaryStrategy adversaryStrategy = AdversaryStrategy::InverseMajority;
    std::uint64_t seed = 1;

    int adversary_count() const { return static_cast<int>(std::floor(q * N)); }
    int honest_count() const { return N - adversary_count(); }

    void validate() const {
        if (N < 2) throw InvariantViolation("N must be at least 2");
        if (k < 1 || k > N - 1) throw InvariantViolation("k must satisfy 1 <= k <= N-1");
        if (q < 0.0 || q > 0.5) throw InvariantViolation("q must lie in [0, 0.5]");
        if (p0 < 0.0 || p0 > 1.0) throw InvariantViolation("p0 must lie in [0, 1]");
        if (tau <= 0.0 || tau >= 1.0) throw InvariantViolation("tau must lie in (0, 1)");
        if (beta <= 0.0 || beta >= 0.5) throw InvariantViolation("beta must lie in (0, 0.5)");
        if (l < 1) throw InvariantViolation("l must be at least 1");
        if (M < l) throw InvariantViolation("M must be at least l");
    }
};

struct VoterState {
    bool honest = true;
    Opinion opinion = Opinion::Dislike;
    int unchangedStreak = 0;
    bool finalized = false;
    std::optional<int> terminationRound;
};

struct FpcOutcome {
    std::vector<std::pair<Opinion, std::optional<int>>> perNode;
    bool agreed = false;
    std::optional<Opinion> majorityOpinion;
    int roundsRun = 0;
    int honestCount = 0;
};

// Quorum composition instrumentation (adversary masking studies).
struct FpcStats {
    std::uint64_t quorums = 0;
    std::uint64_t zeroAdversaryQuorums = 0;
};

struct RoundTrace {
    int round = 0;
    double threshold = 0;
    std::vector<double> etas;       // per node; NaN where no opinion was computed
    std::vector<Opinion> opinions;  // state after the round's simultaneous update
};

using RoundObserver = std::function<void(const RoundTrace&)>;

// Common random threshold for rounds >= 2: uniform on [beta, 1-beta],
// identical for every node, reproducible from the shared seed.
inline double drng_threshold(std::uint64_t seed, int round, double beta) {
    Rng rng(seed, streams::kFpcThreshold * 0x100000000ULL + static_cast<std::uint64_t>(round));
    return rng.uniform_range(beta, 1.0 - beta);
}

// Weighted fraction of Like responses.
inline double compute_eta(std::span<const Opinion> responses, std::span<const double> weights) {
    double likeWeight = 0, totalWeight = 0;
    for (std::size_t i = 0; i < responses.size(); ++i) {
        totalWeight += weights[i];
        if (responses[i] == Opinion::Like) likeWeight += weights[i];
    }
    if (totalWeight <= 0) return 0.0;
    return likeWeight / totalWeight;
}

// Synthetic initial opinions: exactly ceil(p0 * honestCount) honest nodes
// start with Like, chosen by seeded shuffle.
inline std::vector<Opinion> initial_opinions(const FpcConfig& cfg, Rng& rng) {
    int honest = cfg.honest_count();
    auto likeCount = static_cast<int>(std::ceil(cfg.p0 * honest));
    std::vector<int> order(honest);
    for (int i = 0; i < honest; ++i) order[i] = i;
    rng.shuffle(order);
    std::vector<Opinion> opinions(cfg.N, Opinion::Dislike);
    for (int i = 0; i < likeCount && i < honest; ++i) opinions[order[i]] = Opinion::Like;
    return opinions;
}

namespace detail {

// Quorum of k responders excluding self: uniform without replacement, or
// consensus-mana-proportional with replacement when weighting is on.
inline void draw_quorum(std::vector<int>& out, int self, const FpcConfig& cfg,
                        std::span<const double> mana, std::span<const double> manaPrefix, double manaTotal,
                        Rng& rng) {
    out.clear();
    int others = cfg.N - 1;
    if (cfg.k > others) throw QuorumInfeasible("quorum size exceeds available responders");
    if (!cfg.manaWeighting || manaTotal <= 0.0) {
        if (cfg.k == others) {
            for (int j = 0; j < cfg.N; ++j)
                if (j != self) out.push_back(j);
        } else if (cfg.k * 2 < others) {
            // sparse quorums: rejection sampling
            while (static_cast<int>(out.size()) < cfg.k) {
                int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.N)));
                if (j == self) continue;
                if (std::find(out.begin(), out.end(), j) != out.end()) continue;
                out.push_back(j);
            }
        } else {
            std::vector<int> pool;
            pool.reserve(others);
            for (int j = 0; j < cfg.N; ++j)
                if (j != self) pool.push_back(j);
            out = rng.sample_without_replacement(std::move(pool), static_cast<std::size_t>(cfg.k));
        }
        if (cfg.manaWeighting && manaTotal <= 0.0) {
            // zero-mana fallback stays uniform but keeps replacement
            // semantics irrelevant: the draw above is already uniform.
        }
        return;
    }
    double selfMana = mana[static_cast<std::size_t>(self)];
    // redrawing on self-hits degenerates when self holds almost everything
    bool selfDominates = manaTotal - selfMana <= manaTotal * 1e-6;
    for (int drawn = 0; drawn < cfg.k; ++drawn) {
        if (selfDominates) {
            int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(others)));
            if (j >= self) ++j;
            out.push_back(j);
            continue;
        }
        int j = self;
        while (j == self) {
            double u = rng.uniform() * manaTotal;
            j = static_cast<int>(std::upper_bound(manaPrefix.begin(), manaPrefix.end(), u) - manaPrefix.begin());
            if (j >= cfg.N) j = cfg.N - 1;
        }
        out.push_back(j);
    }
}

}  // namespace detail

// One synchronous voting round: every non-finalized honest node samples a
// quorum against the opinion snapshot from the end of the previous round,
// then all updates apply at once. Finalized nodes keep answering queries.
inline void fpc_round(std::vector<VoterState>& states, const FpcConfig& cfg, int round, double threshold,
                      std::span<const double> mana, Rng& rng, FpcStats* stats = nullptr,
                      const RoundObserver* observer = nullptr) {
    int honest = cfg.honest_count();
    std::vector<Opinion> snapshot(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) snapshot[i] = states[i].opinion;

    // InverseMajority answers with the opinion held by the minority of
    // honest nodes at the end of the previous round.
    int honestLikes = 0;
    for (int i = 0; i < honest; ++i)
        if (snapshot[static_cast<std::size_t>(i)] == Opinion::Like) ++honestLikes;
    Opinion inverseAnswer = 2 * honestLikes < honest ? Opinion::Like : Opinion::Dislike;

    std::vector<double> manaPrefix;
    double manaTotal = 0;
    if (cfg.manaWeighting) {
        manaPrefix.reserve(mana.size());
        for (double m : mana) {
            manaTotal += m;
            manaPrefix.push_back(manaTotal);
        }
    }

    RoundTrace trace;
    if (observer && *observer) {
        trace.round = round;
        trace.threshold = threshold;
        trace.etas.assign(states.size(), std::numeric_limits<double>::quiet_NaN());
    }

    std::vector<Opinion> next = snapshot;
    std::vector<int> quorum;
    quorum.reserve(static_cast<std::size_t>(cfg.k));
    for (int i = 0; i < honest; ++i) {
        VoterState& state = states[static_cast<std::size_t>(i)];
        if (state.finalized) continue;
        detail::draw_quorum(quorum, i, cfg, mana, manaPrefix, manaTotal, rng);

        double likeWeight = 0, totalWeight = 0;
        bool sawAdversary = false;
        for (int j : quorum) {
            Opinion response;
            if (j < honest) {
                response = snapshot[static_cast<std::size_t>(j)];
            } else {
                sawAdversary = true;
                switch (cfg.adversaryStrategy) {
                    case AdversaryStrategy::InverseMajority: response = inverseAnswer; break;
                    case AdversaryStrategy::FixedLike: response = Opinion::Like; break;
                    case AdversaryStrategy::FixedDislike: response = Opinion::Dislike; break;
                    case AdversaryStrategy::RandomOpinion:
                    default: response = rng.coin() ? Opinion::Like : Opinion::Dislike; break;
                }
            }
            double w = cfg.manaWeighting ? mana[static_cast<std::size_t>(j)] : 1.0;
            totalWeight += w;
            if (response == Opinion::Like) likeWeight += w;
        }
        if (stats) {
            ++stats->quorums;
            if (!sawAdversary) ++stats->zeroAdversaryQuorums;
        }
        double eta = totalWeight > 0 ? likeWeight / totalWeight : 0.0;
        if (observer && *observer) trace.etas[static_cast<std::size_t>(i)] = eta;
        next[static_cast<std::size_t>(i)] = eta > threshold ? Opinion::Like : Opinion::Dislike;
    }

    for (int i = 0; i < honest; ++i) {
        VoterState& state = states[static_cast<std::size_t>(i)];
        if (state.finalized) continue;
        Opinion updated = next[static_cast<std::size_t>(i)];
        if (updated == state.opinion) {
            ++state.unchangedStreak;
        } else {
            state.opinion = updated;
            state.unchangedStreak = 0;
        }
        if (state.unchangedStreak >= cfg.l) {
            state.finalized = true;
            state.terminationRound = round;
        }
    }
    if (observer && *observer) {
        trace.opinions.reserve(states.size());
        for (const auto& s : states) trace.opinions.push_back(s.opinion);
        (*observer)(trace);
    }
}

// Full protocol run: rounds 1..M or until every honest node finalized.
// Deterministic given the config (seed included). An empty mana view means
// unit mana per node.
inline FpcOutcome run_fpc(const FpcConfig& cfg, std::span<const double> manaView = {}, FpcStats* stats = nullptr,
                          const RoundObserver* observer = nullptr) {
    cfg.validate();
    int honest = cfg.honest_count();
    Rng rng(cfg.seed, streams::kFpcProtocol);

    std::vector<double> mana;
    if (manaView.empty()) {
        mana.assign(static_cast<std::size_t>(cfg.N), 1.0);
    } else {
        if (manaView.size() != static_cast<std::size_t>(cfg.N))
            throw InvariantViolation("mana view size must equal N");
        mana.assign(manaView.begin(), manaView.end());
    }

    std::vector<VoterState> states(static_cast<std::size_t>(cfg.N));
    std::vector<Opinion> init = initial_opinions(cfg, rng);
    for (int i = 0; i < cfg.N; ++i) {
        states[static_cast<std::size_t>(i)].honest = i < honest;
        states[static_cast<std::size_t>(i)].opinion = init[static_cast<std::size_t>(i)];
    }

    FpcOutcome outcome;
    outcome.honestCount = honest;
    for (int round = 1; round <= cfg.M; ++round) {
        double threshold = round == 1 ? cfg.tau : drng_threshold(cfg.seed, round, cfg.beta);
        fpc_round(states, cfg, round, threshold, mana, rng, stats, observer);
        outcome.roundsRun = round;
        bool allFinal = true;
        for (int i = 0; i < honest; ++i)
            if (!states[static_cast<std::size_t>(i)].finalized) {
                allFinal = false;
                break;
            }
        if (allFinal) break;
    }

    outcome.perNode.reserve(states.size());
    for (const auto& s : states) outcome.perNode.emplace_back(s.opinion, s.terminationRound);

    bool allFinal = true;
    bool allEqual = true;
    for (int i = 0; i < honest; ++i) {
        const auto& s = states[static_cast<std::size_t>(i)];
        if (!s.finalized) allFinal = false;
        if (s.opinion != states[0].opinion) allEqual = false;
    }
    outcome.agreed = honest > 0 && allFinal && allEqual;
    if (outcome.agreed) outcome.majorityOpinion = states[0].opinion;
    return outcome;
}

// Mean termination round over honest nodes; nodes that never finalized
// contribute the round cap M.
inline double mean_termination_round(const FpcOutcome& outcome, const FpcConfig& cfg) {
    if (outcome.honestCount == 0) return 0.0;
    double sum = 0;
    for (int i = 0; i < outcome.honestCount; ++i) {
        const auto& [opinion, round] = outcome.perNode[static_cast<std::size_t>(i)];
        sum += round ? static_cast<double>(*round) : static_cast<double>(cfg.M);
    }
    return sum / outcome.honestCount;
}

// Integrated-mode initial opinion: a node likes the conflict member it saw
// first and dislikes later arrivals.
inline Opinion initial_opinion_from_arrival(double memberArrival, double firstArrival) {
    return memberArrival <= firstArrival ? Opinion::Like : Opinion::Dislike;
}

}  // namespace tanglesim
