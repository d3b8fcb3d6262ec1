#pragma once

#include <string>
#include <vector>

#include "tanglesim/bytes.hpp"
#include "tanglesim/hash.hpp"
#include "tanglesim/mana.hpp"
#include "tanglesim/rate_control.hpp"

namespace tanglesim {

struct GenesisOutput {
    Address address;
    std::uint64_t amount = 0;
};

// Scripted conflict: at `time` both spenders issue a value transaction
// consuming the same genesis output.
struct DoubleSpendEvent {
    double time = 0;
    std::uint16_t outputIndex = 0;
    int spenderA = 0;
    int spenderB = 0;
};

inline NodeId node_id_from_index(std::size_t index) {
    NodeId id;
    std::uint64_t v = static_cast<std::uint64_t>(index) + 1;  // keep distinct from the zero master id
    for (int i = 0; i < 8; ++i) id.bytes[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v >> (8 * i));
    return id;
}

inline Address derived_address(const std::string& label) {
    Bytes bytes(label.begin(), label.end());
    return Address{content_hash(bytes)};
}

struct ScenarioConfig {
    int nodes = 10;
    double issueRate = 1.0;            // Poisson rate per node, msgs/sim-second
    std::vector<double> issueRates;    // optional per-node override
    double duration = 300.0;
    double eligibilityAge = 30.0;      // Δ
    double confirmationThreshold = 0.5;
    double propagationDelay = 0.1;
    std::size_t tipPoolTarget = 100;
    double orphanAgeFactor = 10.0;
    double manaHalfLife = 3600.0;  // <= 0 disables decay
    PledgeMode manaPledgeMode = PledgeMode::TransactionValue;
    std::vector<double> accessEndowments;
    std::vector<double> consensusEndowments;
    PowParams pow;
    double schedulerBudget = 0.0;  // network msgs/s; <= 0 disables the quota gate
    std::vector<GenesisOutput> genesis;
    std::vector<DoubleSpendEvent> doubleSpends;
    std::uint64_t seed = 1;

    double rate_for(int node) const {
        return issueRates.empty() ? issueRate : issueRates[static_cast<std::size_t>(node)];
    }

    // Fills defaults that depend on other fields.
    void normalize() {
        if (genesis.empty()) genesis.push_back({derived_address("genesis-address-0"), 1'000'000});
        if (accessEndowments.empty()) accessEndowments.assign(static_cast<std::size_t>(nodes), 100.0);
        if (consensusEndowments.empty()) consensusEndowments.assign(static_cast<std::size_t>(nodes), 100.0);
    }

    void validate() const {
        if (nodes < 1) throw InvariantViolation("nodes must be >= 1");
        if (duration <= 0) throw InvariantViolation("duration must be > 0");
        if (issueRate < 0) throw InvariantViolation("issueRate must be >= 0");
        if (!issueRates.empty() && issueRates.size() != static_cast<std::size_t>(nodes))
            throw InvariantViolation("issueRates must list one rate per node");
        for (double r : issueRates)
            if (r < 0) throw InvariantViolation("issueRates entries must be >= 0");
        if (eligibilityAge <= 0) throw InvariantViolation("eligibilityAge must be > 0");
        if (confirmationThreshold <= 0 || confirmationThreshold > 1)
            throw InvariantViolation("confirmationThreshold must lie in (0, 1]");
        if (propagationDelay < 0) throw InvariantViolation("propagationDelay must be >= 0");
        if (tipPoolTarget == 0) throw InvariantViolation("tipPoolTarget must be >= 1");
        if (orphanAgeFactor <= 0) throw InvariantViolation("orphanAgeFactor must be > 0");
        if (manaHalfLife < 0) throw InvariantViolation("manaHalfLife must be >= 0 (0 disables decay)");
        if (!accessEndowments.empty() && accessEndowments.size() != static_cast<std::size_t>(nodes))
            throw InvariantViolation("accessEndowments must list one value per node");
        if (!consensusEndowments.empty() && consensusEndowments.size() != static_cast<std::size_t>(nodes))
            throw InvariantViolation("consensusEndowments must list one value per node");
        for (double v : accessEndowments)
            if (!(v >= 0) || !std::isfinite(v)) throw InvariantViolation("accessEndowments entries must be finite and >= 0");
        for (double v : consensusEndowments)
            if (!(v >= 0) || !std::isfinite(v)) throw InvariantViolation("consensusEndowments entries must be finite and >= 0");
        pow.validate();
        for (const auto& ds : doubleSpends) {
            if (ds.time < 0 || ds.time > duration)
                throw InvariantViolation("doubleSpendSchedule entry time must lie within [0, duration]");
            if (ds.outputIndex >= genesis.size() && !genesis.empty())
                throw InvariantViolation("doubleSpendSchedule outputIndex exceeds genesis outputs");
            if (ds.spenderA < 0 || ds.spenderA >= nodes || ds.spenderB < 0 || ds.spenderB >= nodes)
                throw InvariantViolation("doubleSpendSchedule spender index out of range");
            if (ds.spenderA == ds.spenderB)
                throw InvariantViolation("doubleSpendSchedule spenders must be distinct nodes");
        }
    }
};

}  // namespace tanglesim
