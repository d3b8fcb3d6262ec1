#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "support/oracles.hpp"
#include "tanglesim/fpc.hpp"
#include "tanglesim/sim.hpp"

using namespace tanglesim;

TEST_CASE("synthetic initial opinions hit the exact Like count") {
    FpcConfig cfg;
    cfg.N = 100;
    cfg.q = 0;
    Rng rng(1);

    cfg.p0 = 1.0;
    auto all = initial_opinions(cfg, rng);
    CHECK(std::count(all.begin(), all.end(), Opinion::Like) == 100);

    cfg.p0 = 0.5;
    auto half = initial_opinions(cfg, rng);
    CHECK(std::count(half.begin(), half.end(), Opinion::Like) == 50);

    cfg.p0 = 0.301;
    auto odd = initial_opinions(cfg, rng);
    CHECK(std::count(odd.begin(), odd.end(), Opinion::Like) == 31);  // ceil
}

TEST_CASE("arrival order fixes integrated-mode opinions") {
    CHECK(initial_opinion_from_arrival(1.0, 1.0) == Opinion::Like);
    CHECK(initial_opinion_from_arrival(2.0, 1.0) == Opinion::Dislike);
}

TEST_CASE("drng thresholds are common, bounded and uniform") {
    const double beta = 0.3;
    CHECK(drng_threshold(7, 2, beta) == drng_threshold(7, 2, beta));
    CHECK(drng_threshold(7, 2, beta) != drng_threshold(7, 3, beta));
    CHECK(drng_threshold(7, 2, beta) != drng_threshold(8, 2, beta));

    double sum = 0;
    const int draws = 100000;
    for (int r = 0; r < draws; ++r) {
        double v = drng_threshold(99, r + 2, beta);
        REQUIRE(v >= beta);
        REQUIRE(v <= 1.0 - beta);
        sum += v;
    }
    double mean = sum / draws;
    CHECK(mean > 0.495);
    CHECK(mean < 0.505);

    // interval collapse: beta near 0.5 pins the threshold to 0.5
    for (int r = 2; r < 20; ++r) {
        double v = drng_threshold(42, r, 0.4999);
        CHECK(v >= 0.4999);
        CHECK(v <= 0.5001);
    }
}

TEST_CASE("eta is the weighted fraction of Like responses") {
    std::vector<Opinion> sixOfTen{Opinion::Like, Opinion::Like, Opinion::Like, Opinion::Like, Opinion::Like,
                                  Opinion::Like, Opinion::Dislike, Opinion::Dislike, Opinion::Dislike,
                                  Opinion::Dislike};
    std::vector<double> unit(10, 1.0);
    CHECK(compute_eta(sixOfTen, unit) == Catch::Approx(0.6));

    // mana-weighted two-responder fixture: shares 0.7 Like / 0.3 Dislike
    std::vector<Opinion> two{Opinion::Like, Opinion::Dislike};
    std::vector<double> weights{0.7, 0.3};
    CHECK(compute_eta(two, weights) == Catch::Approx(0.7));
    std::vector<double> scaled{0.7 * 55.0, 0.3 * 55.0};
    CHECK(compute_eta(two, scaled) == Catch::Approx(0.7));
}

TEST_CASE("the opinion update is a strict threshold on eta") {
    // k = N-1 = 10 makes the quorum deterministic: all ten neighbours,
    // six of whom like. eta = 0.6 must beat the threshold strictly.
    FpcConfig cfg;
    cfg.N = 11;
    cfg.k = 10;
    cfg.q = 0;
    cfg.l = 5;  // keep them un-finalized during the probe rounds

    auto probe = [&](double tau) {
        cfg.tau = tau;
        std::vector<VoterState> states(11);
        for (int i = 0; i < 11; ++i) {
            states[static_cast<std::size_t>(i)].honest = true;
            states[static_cast<std::size_t>(i)].opinion = i < 6 ? Opinion::Like : Opinion::Dislike;
        }
        std::vector<double> unit(11, 1.0);
        Rng rng(5);
        fpc_round(states, cfg, 1, tau, unit, rng);
        return states;
    };

    // node 10 (a disliker) sees 6 of 10 likes
    CHECK(probe(0.55)[10].opinion == Opinion::Like);
    CHECK(probe(0.65)[10].opinion == Opinion::Dislike);
    // node 0 (a liker) sees 5 of 10 likes: eta exactly 0.5 never beats tau=0.5
    CHECK(probe(0.5)[0].opinion == Opinion::Dislike);
}

TEST_CASE("unanimous start finalizes after exactly l rounds") {
    FpcConfig cfg;
    cfg.N = 50;
    cfg.k = 10;
    cfg.q = 0;
    cfg.p0 = 1.0;
    cfg.seed = 77;
    FpcOutcome outcome = run_fpc(cfg);
    CHECK(outcome.agreed);
    REQUIRE(outcome.majorityOpinion.has_value());
    CHECK(*outcome.majorityOpinion == Opinion::Like);
    CHECK(outcome.roundsRun == cfg.l);
    for (int i = 0; i < outcome.honestCount; ++i) {
        REQUIRE(outcome.perNode[static_cast<std::size_t>(i)].second.has_value());
        CHECK(*outcome.perNode[static_cast<std::size_t>(i)].second == cfg.l);
    }
}

TEST_CASE("unanimous dislike start stays dislike") {
    FpcConfig cfg;
    cfg.N = 50;
    cfg.k = 10;
    cfg.q = 0;
    cfg.p0 = 0.0;
    cfg.seed = 78;
    FpcOutcome outcome = run_fpc(cfg);
    CHECK(outcome.agreed);
    REQUIRE(outcome.majorityOpinion.has_value());
    CHECK(*outcome.majorityOpinion == Opinion::Dislike);
    CHECK(outcome.roundsRun == cfg.l);
}

TEST_CASE("identical configs give bit-identical outcomes") {
    FpcConfig cfg;
    cfg.N = 64;
    cfg.k = 12;
    cfg.q = 0.25;
    cfg.p0 = 0.4;
    cfg.seed = 0xfeed;
    FpcOutcome a = run_fpc(cfg);
    FpcOutcome b = run_fpc(cfg);
    REQUIRE(a.perNode.size() == b.perNode.size());
    for (std::size_t i = 0; i < a.perNode.size(); ++i) {
        CHECK(a.perNode[i].first == b.perNode[i].first);
        CHECK(a.perNode[i].second == b.perNode[i].second);
    }
    CHECK(a.agreed == b.agreed);
    CHECK(a.roundsRun == b.roundsRun);
}

TEST_CASE("honest-only voting converges for mixed starts") {
    FpcConfig cfg;
    cfg.N = 100;
    cfg.k = 20;
    cfg.q = 0;
    cfg.p0 = 0.7;
    cfg.seed = 1;
    MetricsRow row = run_fpc_experiment(cfg, 50);
    CHECK(row.agreementRate == 1.0);
    CHECK(*row.meanTerminationRound <= 15.0);
    CHECK(*row.notFinalizedRate == 0.0);
}

TEST_CASE("agreement flag matches the per-node quantifier") {
    FpcConfig cfg;
    cfg.N = 60;
    cfg.k = 8;
    cfg.q = 0.45;
    cfg.p0 = 0.5;
    cfg.adversaryStrategy = AdversaryStrategy::InverseMajority;
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        cfg.seed = seed;
        FpcOutcome outcome = run_fpc(cfg);
        bool allFinal = true;
        bool allEqual = true;
        for (int i = 0; i < outcome.honestCount; ++i) {
            if (!outcome.perNode[static_cast<std::size_t>(i)].second) allFinal = false;
            if (outcome.perNode[static_cast<std::size_t>(i)].first != outcome.perNode[0].first) allEqual = false;
        }
        REQUIRE(outcome.agreed == (allFinal && allEqual));
    }
}

TEST_CASE("finalized nodes never flip afterwards") {
    FpcConfig cfg;
    cfg.N = 80;
    cfg.k = 15;
    cfg.q = 0.3;
    cfg.p0 = 0.5;
    cfg.seed = 99;

    std::vector<RoundTrace> traces;
    RoundObserver observer = [&](const RoundTrace& t) { traces.push_back(t); };
    FpcOutcome outcome = run_fpc(cfg, {}, nullptr, &observer);

    for (int i = 0; i < outcome.honestCount; ++i) {
        const auto& termination = outcome.perNode[static_cast<std::size_t>(i)].second;
        if (!termination) continue;
        Opinion fixed = Opinion::Dislike;
        bool first = true;
        for (const auto& trace : traces) {
            if (trace.round < *termination) continue;
            if (first) {
                fixed = trace.opinions[static_cast<std::size_t>(i)];
                first = false;
            } else {
                REQUIRE(trace.opinions[static_cast<std::size_t>(i)] == fixed);
            }
        }
    }
}

TEST_CASE("zero-adversary quorum rate matches the sampling model") {
    FpcConfig cfg;
    cfg.N = 100;
    cfg.k = 5;
    cfg.q = 0.3;
    cfg.p0 = 0.5;
    cfg.seed = 5;
    FpcStats stats;
    run_fpc_experiment(cfg, 100, {}, &stats);
    REQUIRE(stats.quorums > 0);
    double measured = static_cast<double>(stats.zeroAdversaryQuorums) / static_cast<double>(stats.quorums);

    // 30 adversaries among the 99 potential responders, drawn without
    // replacement: hypergeometric zero-hit probability
    double hyper = 1.0;
    for (int i = 0; i < 5; ++i) hyper *= static_cast<double>(69 - i) / static_cast<double>(99 - i);
    double binom = std::pow(69.0 / 99.0, 5.0);
    CHECK(std::abs(measured - hyper) < 0.02);
    CHECK(std::abs(measured - binom) < 0.02);
}

TEST_CASE("full-network quorums beat small quorums under heavy attack") {
    FpcConfig base;
    base.N = 100;
    base.q = 0.4;
    base.p0 = 0.5;
    base.adversaryStrategy = AdversaryStrategy::InverseMajority;
    base.seed = 11;

    FpcConfig wide = base;
    wide.k = 99;
    FpcConfig narrow = base;
    narrow.k = 20;
    MetricsRow wideRow = run_fpc_experiment(wide, 100);
    MetricsRow narrowRow = run_fpc_experiment(narrow, 100);
    CHECK(*wideRow.agreementRate >= *narrowRow.agreementRate);
}

TEST_CASE("mana weighting: eta sequences are invariant under global scaling") {
    FpcConfig cfg;
    cfg.N = 40;
    cfg.k = 8;
    cfg.q = 0.2;
    cfg.p0 = 0.6;
    cfg.manaWeighting = true;
    cfg.seed = 1234;

    std::vector<double> mana;
    Rng mrng(9);
    for (int i = 0; i < cfg.N; ++i) mana.push_back(0.5 + static_cast<double>(mrng.below(1000)));
    std::vector<double> scaled;
    for (double m : mana) scaled.push_back(m * 1024.0);  // exact in floating point

    std::vector<RoundTrace> t1, t2;
    RoundObserver o1 = [&](const RoundTrace& t) { t1.push_back(t); };
    RoundObserver o2 = [&](const RoundTrace& t) { t2.push_back(t); };
    FpcOutcome r1 = run_fpc(cfg, mana, nullptr, &o1);
    FpcOutcome r2 = run_fpc(cfg, scaled, nullptr, &o2);

    CHECK(r1.agreed == r2.agreed);
    CHECK(r1.roundsRun == r2.roundsRun);
    REQUIRE(t1.size() == t2.size());
    for (std::size_t r = 0; r < t1.size(); ++r)
        for (std::size_t i = 0; i < t1[r].etas.size(); ++i) {
            double a = t1[r].etas[i];
            double b = t2[r].etas[i];
            if (std::isnan(a) && std::isnan(b)) continue;
            REQUIRE(a == Catch::Approx(b).epsilon(1e-12));
        }
}

TEST_CASE("mana-proportional quorum draws match the shares") {
    FpcConfig cfg;
    cfg.N = 4;
    cfg.k = 3;
    cfg.manaWeighting = true;
    std::vector<double> mana{0.0, 1.0, 2.0, 7.0};
    std::vector<double> prefix;
    double total = 0;
    for (double m : mana) {
        total += m;
        prefix.push_back(total);
    }

    Rng rng(0xdead);
    std::vector<int> quorum;
    std::vector<std::uint64_t> counts(4, 0);
    const int rounds = 30000;
    for (int r = 0; r < rounds; ++r) {
        detail::draw_quorum(quorum, 0, cfg, mana, prefix, total, rng);
        REQUIRE(quorum.size() == 3);
        for (int j : quorum) {
            REQUIRE(j != 0);  // self excluded even with zero self mana
            ++counts[static_cast<std::size_t>(j)];
        }
    }
    double draws = 3.0 * rounds;
    CHECK(counts[0] == 0);
    CHECK(std::abs(counts[1] / draws - 0.1) < 0.01);
    CHECK(std::abs(counts[2] / draws - 0.2) < 0.01);
    CHECK(std::abs(counts[3] / draws - 0.7) < 0.01);
}

TEST_CASE("mana-weighted quorums favour heavy nodes") {
    FpcConfig cfg;
    cfg.N = 10;
    cfg.k = 6;
    cfg.q = 0;
    cfg.manaWeighting = true;
    cfg.p0 = 1.0;
    cfg.seed = 3;
    // node 9 holds 90% of the mana
    std::vector<double> mana(10, 1.0);
    mana[9] = 81.0;
    FpcOutcome outcome = run_fpc(cfg, mana);
    CHECK(outcome.agreed);  // sampling bias must not break unanimity
}

TEST_CASE("fixed adversary strategies answer as configured") {
    // N=4, q=0.25: node 3 is adversarial; k=3 samples everyone else, so the
    // honest eta is fully determined by the strategy.
    auto run_round = [](AdversaryStrategy strategy, double tau) {
        FpcConfig cfg;
        cfg.N = 4;
        cfg.k = 3;
        cfg.q = 0.25;
        cfg.tau = tau;
        cfg.adversaryStrategy = strategy;
        std::vector<VoterState> states(4);
        for (int i = 0; i < 4; ++i) states[static_cast<std::size_t>(i)].honest = i < 3;
        std::vector<double> unit(4, 1.0);
        Rng rng(2);
        fpc_round(states, cfg, 1, tau, unit, rng);
        return states;
    };

    // all honest start Dislike; one third of the quorum is the adversary
    auto likeStates = run_round(AdversaryStrategy::FixedLike, 0.3);
    for (int i = 0; i < 3; ++i) CHECK(likeStates[static_cast<std::size_t>(i)].opinion == Opinion::Like);
    auto strictStates = run_round(AdversaryStrategy::FixedLike, 0.4);
    for (int i = 0; i < 3; ++i) CHECK(strictStates[static_cast<std::size_t>(i)].opinion == Opinion::Dislike);
    auto dislikeStates = run_round(AdversaryStrategy::FixedDislike, 0.3);
    for (int i = 0; i < 3; ++i) CHECK(dislikeStates[static_cast<std::size_t>(i)].opinion == Opinion::Dislike);
}

TEST_CASE("random-opinion adversaries keep runs deterministic per seed") {
    FpcConfig cfg;
    cfg.N = 50;
    cfg.k = 10;
    cfg.q = 0.3;
    cfg.p0 = 0.5;
    cfg.adversaryStrategy = AdversaryStrategy::RandomOpinion;
    cfg.seed = 31337;
    FpcOutcome a = run_fpc(cfg);
    FpcOutcome b = run_fpc(cfg);
    CHECK(a.agreed == b.agreed);
    CHECK(a.roundsRun == b.roundsRun);
    for (std::size_t i = 0; i < a.perNode.size(); ++i) CHECK(a.perNode[i] == b.perNode[i]);
}

TEST_CASE("quorum larger than the responder pool is infeasible") {
    FpcConfig cfg;
    cfg.N = 5;
    cfg.k = 5;  // only 4 other nodes exist
    std::vector<VoterState> states(5);
    for (auto& s : states) s.honest = true;
    std::vector<double> unit(5, 1.0);
    Rng rng(1);
    CHECK_THROWS_AS(fpc_round(states, cfg, 1, 0.5, unit, rng), QuorumInfeasible);
}

TEST_CASE("config invariants are enforced") {
    FpcConfig cfg;
    cfg.N = 100;
    cfg.k = 100;
    CHECK_THROWS_AS(cfg.validate(), InvariantViolation);
    cfg.k = 20;
    cfg.q = 0.6;
    CHECK_THROWS_AS(cfg.validate(), InvariantViolation);
    cfg.q = 0.1;
    cfg.beta = 0.5;
    CHECK_THROWS_AS(cfg.validate(), InvariantViolation);
    cfg.beta = 0.3;
    cfg.M = 2;
    cfg.l = 4;
    CHECK_THROWS_AS(cfg.validate(), InvariantViolation);
}
