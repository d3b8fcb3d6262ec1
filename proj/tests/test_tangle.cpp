#include <catch2/catch_amalgamated.hpp>

#include "support/oracles.hpp"
#include "tanglesim/scenario.hpp"
#include "tanglesim/tangle.hpp"

using namespace tanglesim;

namespace {

Message msg_on(const std::vector<MessageId>& parents, std::uint32_t issuer, double t, std::uint64_t salt = 0) {
    return build_and_sign(node_id_from_index(issuer), parents, DataPayload{}, seconds_to_micros(t), salt);
}

}  // namespace

TEST_CASE("attachment moves tips as the DAG grows") {
    Tangle tangle(TangleParams{}, 3);
    CHECK(tangle.tip_count() == 2);  // the two genesis anchors

    Message a = msg_on({tangle.genesis_a(), tangle.genesis_b()}, 0, 1.0);
    MessageId aId = tangle.attach(a, 0);
    CHECK(tangle.tip_count() == 1);
    CHECK(tangle.is_tip(aId));
    CHECK(!tangle.is_tip(tangle.genesis_a()));

    // two messages on disjoint parent pairs widen the DAG
    Message b = msg_on({tangle.genesis_a(), aId}, 1, 2.0);
    Message c = msg_on({tangle.genesis_b(), aId}, 2, 2.0);
    MessageId bId = tangle.attach(b, 1);
    MessageId cId = tangle.attach(c, 2);
    CHECK(tangle.tip_count() == 2);
    CHECK(tangle.is_tip(bId));
    CHECK(tangle.is_tip(cId));
}

TEST_CASE("attaching with an unknown parent fails") {
    Tangle tangle(TangleParams{}, 1);
    MessageId ghost;
    ghost.bytes[0] = 0xee;
    Message m = msg_on({tangle.genesis_a(), ghost}, 0, 1.0);
    CHECK_THROWS_AS(tangle.attach(m, 0), UnknownParent);
}

TEST_CASE("congestion controls the parent count") {
    CHECK(Tangle::parent_count_for_congestion(0.0) == 2);
    CHECK(Tangle::parent_count_for_congestion(0.1) == 2);
    CHECK(Tangle::parent_count_for_congestion(0.5) == 5);
    CHECK(Tangle::parent_count_for_congestion(1.0) == 8);
    CHECK(Tangle::parent_count_for_congestion(7.0) == 8);
}

TEST_CASE("a single eligible tip is padded with the genesis anchors") {
    Tangle tangle(TangleParams{}, 1);
    Message a = msg_on({tangle.genesis_a(), tangle.genesis_b()}, 0, 1.0);
    MessageId aId = tangle.attach(a, 0);

    Rng rng(1);
    auto picked = tangle.select_tips(1.5, 0.0, rng);
    REQUIRE(picked.size() == 2);
    CHECK(std::find(picked.begin(), picked.end(), aId) != picked.end());
    CHECK(picked[0] != picked[1]);
}

TEST_CASE("select_tips fails when nothing is eligible") {
    TangleParams params;
    params.eligibilityAge = 30.0;
    Tangle tangle(params, 1);
    Rng rng(1);
    CHECK_THROWS_AS(tangle.select_tips(100.0, 0.0, rng), NoEligibleTips);  // anchors aged out
}

TEST_CASE("disliked and rejected-branch tips are not eligible") {
    Tangle tangle(TangleParams{}, 2);
    Message a = msg_on({tangle.genesis_a(), tangle.genesis_b()}, 0, 1.0);
    MessageId aId = tangle.attach(a, 0, {}, PayloadOpinion::Dislike);
    Message b = msg_on({tangle.genesis_a(), aId}, 1, 1.0);
    BranchId rejected;
    rejected.bytes[0] = 0xbb;
    MessageId bId = tangle.attach(b, 1, Reality{rejected});
    tangle.set_branch_rejected_fn([&](const Reality& r) { return reality_contains(r, rejected); });

    CHECK(!tangle.eligible_tip(aId, 2.0));
    CHECK(!tangle.eligible_tip(bId, 2.0));
    CHECK(tangle.eligible_tip(tangle.genesis_b(), 2.0));
}

TEST_CASE("congested pools hand out more parents") {
    Tangle tangle(TangleParams{}, 32);
    std::vector<MessageId> anchors{tangle.genesis_a(), tangle.genesis_b()};
    for (int i = 0; i < 20; ++i)
        tangle.attach(msg_on(anchors, static_cast<std::uint32_t>(i % 8), 1.0, static_cast<std::uint64_t>(i)),
                      static_cast<std::uint32_t>(i % 8));
    Rng rng(6);
    auto calm = tangle.select_tips(2.0, 0.0, rng);
    CHECK(calm.size() == 2);
    auto busy = tangle.select_tips(2.0, 0.5, rng);
    CHECK(busy.size() == 5);
    auto jammed = tangle.select_tips(2.0, 1.0, rng);
    CHECK(jammed.size() == 8);
    for (std::size_t i = 1; i < jammed.size(); ++i) CHECK(jammed[i - 1] != jammed[i]);
}

TEST_CASE("uniform tip selection passes a chi-square test") {
    Tangle tangle(TangleParams{}, 16);
    std::vector<MessageId> anchors{tangle.genesis_a(), tangle.genesis_b()};
    // exactly 10 eligible tips on top of the anchors
    std::vector<MessageId> tips;
    for (int i = 0; i < 10; ++i)
        tips.push_back(tangle.attach(msg_on(anchors, static_cast<std::uint32_t>(i), 1.0, i), static_cast<std::uint32_t>(i)));
    REQUIRE(tangle.eligible_tip_count(2.0) == 10);

    Rng rng(0xfa57);
    std::vector<std::uint64_t> counts(10, 0);
    const int selections = 100000;
    for (int s = 0; s < selections; ++s) {
        auto picked = tangle.select_tips(2.0, 0.0, rng);
        REQUIRE(picked.size() == 2);
        REQUIRE(picked[0] != picked[1]);
        for (const auto& id : picked)
            for (std::size_t i = 0; i < tips.size(); ++i)
                if (tips[i] == id) ++counts[i];
    }
    std::vector<double> expected(10, 2.0 * selections / 10.0);
    double stat = oracle::chi_square_stat(counts, expected);
    CHECK(stat < oracle::chi_square_crit_99(9));
}

TEST_CASE("tip selection cost does not grow with DAG depth") {
    auto build = [](int depth, std::uint64_t& opsPerSelection) {
        Tangle tangle(TangleParams{}, 16);
        std::vector<MessageId> frontier{tangle.genesis_a(), tangle.genesis_b()};
        double t = 0.0;
        for (int i = 0; i < depth; ++i) {
            t += 0.001;
            MessageId id = tangle.attach(msg_on(frontier, 0, t, static_cast<std::uint64_t>(i)), 0);
            frontier = {frontier[1], id};
        }
        // leave exactly 10 fresh eligible tips
        std::vector<MessageId> parents = frontier;
        for (int i = 0; i < 10; ++i) {
            t += 0.001;
            tangle.attach(msg_on(parents, 1, t, static_cast<std::uint64_t>(1000 + i)), 1);
        }
        REQUIRE(tangle.eligible_tip_count(t) >= 10);
        Rng rng(3);
        tangle.reset_tip_scan_ops();
        const int selections = 2000;
        for (int s = 0; s < selections; ++s) tangle.select_tips(t, 0.0, rng);
        opsPerSelection = tangle.tip_scan_ops() / selections;
    };
    std::uint64_t shallow = 0, deep = 0;
    build(100, shallow);
    build(10000, deep);
    double ratio = static_cast<double>(deep) / static_cast<double>(shallow);
    CHECK(ratio < 1.1);
    CHECK(ratio > 0.9);
}

TEST_CASE("approval weight follows the mana in the future cone") {
    // three equal-mana nodes
    std::vector<double> mana{1.0, 1.0, 1.0};
    Tangle tangle(TangleParams{}, 3);
    std::vector<MessageId> anchors{tangle.genesis_a(), tangle.genesis_b()};

    MessageId target = tangle.attach(msg_on(anchors, 0, 1.0), 0);
    CHECK(tangle.approval_weight(target, mana) == 0.0);  // fresh tip

    MessageId r1 = tangle.attach(msg_on({target, anchors[0]}, 1, 2.0), 1);
    CHECK(tangle.approval_weight(target, mana) == Catch::Approx(1.0 / 3.0));

    // indirect reference through r1 by node 2
    MessageId r2 = tangle.attach(msg_on({r1, anchors[1]}, 2, 3.0), 2);
    CHECK(tangle.approval_weight(target, mana) == Catch::Approx(2.0 / 3.0));
    CHECK(tangle.approval_weight(target, mana) ==
          Catch::Approx(oracle::brute_force_approval_weight(tangle, target, mana)));

    // the issuer's own later message completes the set
    MessageId r3 = tangle.attach(msg_on({r2, r1}, 0, 4.0), 0);
    CHECK(tangle.approval_weight(target, mana) == Catch::Approx(1.0));
    (void)r3;

    CHECK_THROWS_AS(tangle.approval_weight(MessageId{}, mana), UnknownMessage);
}

TEST_CASE("incremental approval weight matches brute force on random DAGs") {
    Rng rng(0x9a6);
    for (int round = 0; round < 5; ++round) {
        std::size_t nodeCount = 4 + rng.below(5);
        Tangle tangle(TangleParams{}, nodeCount);
        std::vector<MessageId> ids{tangle.genesis_a(), tangle.genesis_b()};
        std::vector<double> mana;
        for (std::size_t i = 0; i < nodeCount; ++i) mana.push_back(1.0 + static_cast<double>(rng.below(10)));

        int messages = 50 + static_cast<int>(rng.below(150));
        for (int i = 0; i < messages; ++i) {
            MessageId p1 = ids[rng.below(ids.size())];
            MessageId p2 = ids[rng.below(ids.size())];
            if (p1 == p2) continue;
            auto issuer = static_cast<std::uint32_t>(rng.below(nodeCount));
            ids.push_back(tangle.attach(msg_on({p1, p2}, issuer, 1.0 + i, rng.next()), issuer));
        }
        for (int probe = 0; probe < 10; ++probe) {
            const MessageId& id = ids[rng.below(ids.size())];
            REQUIRE(tangle.approval_weight(id, mana) ==
                    Catch::Approx(oracle::brute_force_approval_weight(tangle, id, mana)).margin(1e-12));
        }
    }
}

TEST_CASE("approval weight is monotone while the DAG grows") {
    Rng rng(0x111);
    Tangle tangle(TangleParams{}, 5);
    std::vector<double> mana{5, 4, 3, 2, 1};
    std::vector<MessageId> ids{tangle.genesis_a(), tangle.genesis_b()};
    MessageId target = tangle.attach(msg_on({ids[0], ids[1]}, 0, 1.0), 0);
    ids.push_back(target);

    double last = 0.0;
    for (int i = 0; i < 60; ++i) {
        MessageId p1 = ids[rng.below(ids.size())];
        MessageId p2 = ids[rng.below(ids.size())];
        if (p1 == p2) continue;
        auto issuer = static_cast<std::uint32_t>(rng.below(5));
        ids.push_back(tangle.attach(msg_on({p1, p2}, issuer, 2.0 + i, rng.next()), issuer));
        double aw = tangle.approval_weight(target, mana);
        REQUIRE(aw >= last - 1e-15);
        last = aw;
    }
}

TEST_CASE("confirmation threshold with mana shares 0.3/0.3/0.4") {
    TangleParams params;
    params.confirmationThreshold = 0.5;
    Tangle tangle(params, 3);
    std::vector<double> mana{0.3, 0.3, 0.4};
    std::vector<MessageId> anchors{tangle.genesis_a(), tangle.genesis_b()};

    MessageId target = tangle.attach(msg_on(anchors, 2, 1.0), 2);
    MessageId r1 = tangle.attach(msg_on({target, anchors[0]}, 0, 2.0), 0);

    SweepResult first = tangle.confirmation_sweep(3.0, mana);
    CHECK(std::find(first.confirmed.begin(), first.confirmed.end(), target) == first.confirmed.end());
    CHECK(tangle.approval_weight(target, mana) == Catch::Approx(0.3));

    tangle.attach(msg_on({r1, target}, 1, 4.0), 1);
    CHECK(tangle.approval_weight(target, mana) == Catch::Approx(0.6));
    SweepResult second = tangle.confirmation_sweep(5.0, mana);
    CHECK(std::find(second.confirmed.begin(), second.confirmed.end(), target) != second.confirmed.end());
    CHECK(tangle.metadata(target).confirmationTime == 5.0);
}

TEST_CASE("a sole-mana issuer confirms messages through references") {
    Tangle tangle(TangleParams{}, 2);
    std::vector<double> mana{1.0, 0.0};
    std::vector<MessageId> anchors{tangle.genesis_a(), tangle.genesis_b()};
    MessageId target = tangle.attach(msg_on(anchors, 1, 1.0), 1);
    tangle.attach(msg_on({target, anchors[0]}, 0, 2.0), 0);
    CHECK(tangle.approval_weight(target, mana) == Catch::Approx(1.0));
    SweepResult sweep = tangle.confirmation_sweep(3.0, mana);
    CHECK(sweep.confirmed == std::vector<MessageId>{target});
}

TEST_CASE("unreferenced messages orphan after ten eligibility windows") {
    TangleParams params;
    params.eligibilityAge = 1.0;
    params.orphanAgeFactor = 10.0;
    Tangle tangle(params, 2);
    std::vector<double> mana{1.0, 1.0};
    MessageId lonely = tangle.attach(msg_on({tangle.genesis_a(), tangle.genesis_b()}, 0, 1.0), 0);

    SweepResult early = tangle.confirmation_sweep(5.0, mana);
    CHECK(early.orphaned.empty());

    SweepResult late = tangle.confirmation_sweep(11.5, mana);
    CHECK(late.orphaned == std::vector<MessageId>{lonely});
    CHECK(tangle.metadata(lonely).orphaned);
    CHECK(!tangle.metadata(lonely).confirmed());
    CHECK(!tangle.is_tip(lonely));
}
