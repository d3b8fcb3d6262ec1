#pragma once

#include <cmath>
#include <span>
#include <unordered_map>
#include <vector>

#include "tanglesim/rng.hpp"
#include "tanglesim/transaction.hpp"

namespace tanglesim {

enum class ManaKind : std::uint8_t { Access, Consensus };

// How consensus mana gets pledged. Only transaction-value pledging exists
// today; the switch reserves room for per-participation modes.
enum class PledgeMode : std::uint8_t { TransactionValue };

struct ManaParams {
    // Exponential half-life in sim-seconds; <= 0 disables decay.
    double halfLifeSeconds = 3600.0;
    PledgeMode pledgeMode = PledgeMode::TransactionValue;

    bool decays() const { return halfLifeSeconds > 0 && std::isfinite(halfLifeSeconds); }

    double decay_factor(double elapsed) const {
        if (!decays() || elapsed <= 0) return 1.0;
        return std::exp2(-elapsed / halfLifeSeconds);
    }
};

// Per-node access and consensus mana with lazy exponential decay: stored
// values are brought current on write, reads apply decay on the fly.
class ManaLedger {
public:
    explicit ManaLedger(ManaParams params = {}) : params_(params) {}

    void endow(const NodeId& node, double access, double consensus, double now = 0.0) {
        Record& rec = touch(node, now);
        rec.access += access;
        rec.consensus += consensus;
    }

    // Value transactions pledge the moved token amount as both access and
    // consensus mana to the named nodes.
    void pledge_on_transaction(const Transaction& tx, double now) {
        double amount = static_cast<double>(tx.total_output_amount());
        touch(tx.accessPledge, now).access += amount;
        touch(tx.consensusPledge, now).consensus += amount;
    }

    double mana(const NodeId& node, ManaKind kind, double now) const {
        auto it = index_.find(node);
        if (it == index_.end()) return 0.0;
        const Record& rec = records_[it->second];
        double stored = kind == ManaKind::Access ? rec.access : rec.consensus;
        return stored * params_.decay_factor(now - rec.lastUpdate);
    }

    double total(ManaKind kind, double now) const {
        double sum = 0;
        for (const Record& rec : records_) {
            double stored = kind == ManaKind::Access ? rec.access : rec.consensus;
            sum += stored * params_.decay_factor(now - rec.lastUpdate);
        }
        return sum;
    }

    // Node's fraction of the network total; uniform fallback when nobody
    // holds mana of this kind.
    double share(const NodeId& node, ManaKind kind, double now) const {
        double t = total(kind, now);
        if (t <= 0.0) return records_.empty() ? 0.0 : 1.0 / static_cast<double>(records_.size());
        return mana(node, kind, now) / t;
    }

    // Draws a node with probability proportional to its consensus mana
    // (uniform fallback when the total is zero).
    NodeId sample_by_consensus_mana(Rng& rng, double now) const {
        if (records_.empty()) throw Error("mana ledger has no nodes to sample");
        double t = total(ManaKind::Consensus, now);
        if (t <= 0.0) return order_[rng.below(order_.size())];
        double u = rng.uniform() * t;
        double acc = 0;
        for (std::size_t i = 0; i < records_.size(); ++i) {
            acc += records_[i].consensus * params_.decay_factor(now - records_[i].lastUpdate);
            if (u < acc) return order_[i];
        }
        return order_.back();
    }

    std::size_t node_count() const { return records_.size(); }

    const std::vector<NodeId>& nodes() const { return order_; }

    // Snapshot of decayed values in the given node order, for approval
    // weight and FPC views.
    std::vector<double> view(ManaKind kind, std::span<const NodeId> nodeOrder, double now) const {
        std::vector<double> out;
        out.reserve(nodeOrder.size());
        for (const auto& node : nodeOrder) out.push_back(mana(node, kind, now));
        return out;
    }

private:
    struct Record {
        double access = 0;
        double consensus = 0;
        double lastUpdate = 0;
    };

    Record& touch(const NodeId& node, double now) {
        auto [it, inserted] = index_.emplace(node, records_.size());
        if (inserted) {
            records_.emplace_back();
            order_.push_back(node);
        }
        Record& rec = records_[it->second];
        if (now > rec.lastUpdate) {
            double f = params_.decay_factor(now - rec.lastUpdate);
            rec.access *= f;
            rec.consensus *= f;
            rec.lastUpdate = now;
        }
        return rec;
    }

    ManaParams params_;
    std::unordered_map<NodeId, std::size_t> index_;
    std::vector<Record> records_;  // registration order, for deterministic iteration
    std::vector<NodeId> order_;
};

}  // namespace tanglesim
