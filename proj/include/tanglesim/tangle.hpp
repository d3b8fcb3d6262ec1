#pragma once

#include <bit>
#include <functional>
#include <optional>
#include <unordered_map>
#include <unordered_set>

#include "tanglesim/message.hpp"
#include "tanglesim/rng.hpp"
#include "tanglesim/utxo.hpp"

namespace tanglesim {

struct UnknownParent : Error {
    using Error::Error;
};
struct UnknownMessage : Error {
    using Error::Error;
};
struct NoEligibleTips : Error {
    using Error::Error;
};

enum class PayloadOpinion : std::uint8_t { Like, Dislike, NA };

// Distinct issuers seen in a message's future cone, as a bitset over
// simulation node indices.
class IssuerSet {
public:
    explicit IssuerSet(std::size_t bits = 0) : words_((bits + 63) / 64, 0) {}

    bool test(std::uint32_t i) const { return (words_[i >> 6] >> (i & 63)) & 1; }

    // Returns true when the bit was newly set.
    bool set(std::uint32_t i) {
        std::uint64_t mask = 1ULL << (i & 63);
        if (words_[i >> 6] & mask) return false;
        words_[i >> 6] |= mask;
        return true;
    }

    std::size_t count() const {
        std::size_t n = 0;
        for (auto w : words_) n += std::popcount(w);
        return n;
    }

    double weighted_sum(std::span<const double> weights) const {
        double sum = 0;
        for (std::size_t wi = 0; wi < words_.size(); ++wi) {
            std::uint64_t w = words_[wi];
            while (w) {
                int bit = std::countr_zero(w);
                sum += weights[wi * 64 + bit];
                w &= w - 1;
            }
        }
        return sum;
    }

private:
    std::vector<std::uint64_t> words_;
};

struct TangleParams {
    double eligibilityAge = 30.0;       // Δ
    double confirmationThreshold = 0.5; // θ
    double orphanAgeFactor = 10.0;      // orphan age = factor * Δ
    std::size_t tipPoolTarget = 100;    // congestion normalization
};

struct MessageMetadata {
    double attachTime = 0;
    Reality reality;  // conflict branches this message is attributed to
    PayloadOpinion opinion = PayloadOpinion::NA;
    std::optional<double> confirmationTime;
    bool orphaned = false;
    std::uint32_t issuerIndex = kNoIssuer;

    static constexpr std::uint32_t kNoIssuer = 0xffffffff;

    bool confirmed() const { return confirmationTime.has_value(); }
};

struct SweepResult {
    std::vector<MessageId> confirmed;
    std::vector<MessageId> orphaned;
};

// The message DAG: attachment, tip bookkeeping, restricted uniform random
// tip selection, and mana-weighted approval weight. One instance models
// the shared ledger view of a simulation run.
class Tangle {
public:
    Tangle(TangleParams params, std::size_t nodeCount) : params_(params), nodeCount_(nodeCount) {
        genesisA_ = MessageId{content_hash(Bytes{'a', 'n', 'c', 'h', 'o', 'r', '-', 'a'})};
        genesisB_ = MessageId{content_hash(Bytes{'a', 'n', 'c', 'h', 'o', 'r', '-', 'b'})};
        for (const auto& id : {genesisA_, genesisB_}) {
            Entry entry(nodeCount_);
            entry.meta.attachTime = 0.0;
            entry.meta.confirmationTime = 0.0;
            add_entry(id, std::move(entry));
        }
    }

    const TangleParams& params() const { return params_; }
    MessageId genesis_a() const { return genesisA_; }
    MessageId genesis_b() const { return genesisB_; }

    // Lets eligibility consult the UTXO branch statuses; unset means no
    // branch is ever rejected.
    void set_branch_rejected_fn(std::function<bool(const Reality&)> fn) { branchRejected_ = std::move(fn); }

    std::size_t size() const { return order_.size(); }
    const std::vector<MessageId>& messages_in_order() const { return order_; }

    bool contains(const MessageId& id) const { return entries_.count(id) != 0; }

    const MessageMetadata& metadata(const MessageId& id) const { return entry(id).meta; }
    const std::vector<MessageId>& parents_of(const MessageId& id) const { return entry(id).parents; }
    const std::vector<MessageId>& approvers_of(const MessageId& id) const { return entry(id).approvers; }
    const std::optional<Message>& message(const MessageId& id) const { return entry(id).message; }

    bool is_tip(const MessageId& id) const { return tipIndex_.count(id) != 0; }
    std::size_t tip_count() const { return tips_.size(); }

    MessageId attach(const Message& m, std::uint32_t issuerIndex, Reality reality = {},
                     PayloadOpinion opinion = PayloadOpinion::NA,
                     std::optional<double> attachTime = std::nullopt) {
        MessageId id = message_id(m);
        if (entries_.count(id)) return id;  // idempotent re-attach
        for (const auto& p : m.parents)
            if (!entries_.count(p)) throw UnknownParent("parent " + to_hex(p) + " not attached");

        Entry entry(nodeCount_);
        entry.message = m;
        entry.parents = m.parents;
        entry.meta.attachTime = attachTime.value_or(m.timestamp_seconds());
        entry.meta.reality = std::move(reality);
        entry.meta.opinion = opinion;
        entry.meta.issuerIndex = issuerIndex;
        add_entry(id, std::move(entry));

        for (const auto& p : m.parents) {
            entries_.at(p).approvers.push_back(id);
            remove_tip(p);
        }
        tips_.push_back(id);
        tipIndex_.emplace(id, tips_.size() - 1);
        unconfirmed_.push_back(id);

        if (issuerIndex != MessageMetadata::kNoIssuer) propagate_issuer(m.parents, issuerIndex);
        return id;
    }

    // Overrides the attach timestamp (scripted fixtures that re-date events).
    void set_attach_time(const MessageId& id, double t) { entries_.at(id).meta.attachTime = t; }

    bool eligible_tip(const MessageId& id, double now) const {
        const Entry& e = entry(id);
        if (now - e.meta.attachTime > params_.eligibilityAge) return false;
        if (e.meta.opinion == PayloadOpinion::Dislike) return false;
        if (branchRejected_ && !e.meta.reality.empty() && branchRejected_(e.meta.reality)) return false;
        return true;
    }

    std::size_t eligible_tip_count(double now) const {
        std::size_t n = 0;
        for (const auto& id : tips_)
            if (eligible_tip(id, now)) ++n;
        return n;
    }

    double congestion_level(double now) const {
        double level = static_cast<double>(eligible_tip_count(now)) / static_cast<double>(params_.tipPoolTarget);
        return std::min(1.0, level);
    }

    // 2 parents when calm, up to 8 under congestion.
    static std::size_t parent_count_for_congestion(double level) {
        double clamped = std::clamp(level, 0.0, 1.0);
        auto count = static_cast<std::size_t>(2 + std::floor(6.0 * clamped));
        return std::clamp<std::size_t>(count, kMinParents, kMaxParents);
    }

    // Uniform draw without replacement from the eligible tip pool. A
    // one-tip pool is padded with the genesis anchors so parents stay
    // distinct.
    std::vector<MessageId> select_tips(double now, double congestionLevel, Rng& rng) {
        std::vector<MessageId> eligible;
        eligible.reserve(tips_.size());
        for (const auto& id : tips_) {
            ++tipScanOps_;
            if (eligible_tip(id, now)) eligible.push_back(id);
        }
        if (eligible.empty()) throw NoEligibleTips("no eligible tips at t=" + std::to_string(now));

        std::size_t want = parent_count_for_congestion(congestionLevel);
        std::vector<MessageId> picked;
        if (eligible.size() == 1) {
            picked.push_back(eligible.front());
            for (const auto& anchor : {genesisA_, genesisB_}) {
                if (picked.size() >= kMinParents) break;
                if (std::find(picked.begin(), picked.end(), anchor) == picked.end()) picked.push_back(anchor);
            }
        } else {
            picked = rng.sample_without_replacement(std::move(eligible), want);
        }
        std::sort(picked.begin(), picked.end());
        return picked;
    }

    // Fraction of total consensus mana whose holders issued messages in the
    // future cone. The issuer's own mana counts only if it also issued a
    // referencing message.
    double approval_weight(const MessageId& id, std::span<const double> consensusMana) const {
        const Entry& e = entry_or_throw(id);
        double total = 0;
        for (double m : consensusMana) total += m;
        if (total <= 0) return 0.0;
        return e.referencedBy.weighted_sum(consensusMana) / total;
    }

    std::size_t referencing_issuer_count(const MessageId& id) const { return entry_or_throw(id).referencedBy.count(); }

    // Confirms unconfirmed messages whose approval weight reached the
    // threshold and ages out unreferenced ones. Branch resolution on top of
    // this lives in the simulation harness.
    SweepResult confirmation_sweep(double now, std::span<const double> consensusMana) {
        SweepResult result;
        double orphanAge = params_.orphanAgeFactor * params_.eligibilityAge;
        std::vector<MessageId> remaining;
        remaining.reserve(unconfirmed_.size());
        for (const auto& id : unconfirmed_) {
            Entry& e = entries_.at(id);
            bool rejected = branchRejected_ && !e.meta.reality.empty() && branchRejected_(e.meta.reality);
            if (!rejected && approval_weight(id, consensusMana) >= params_.confirmationThreshold) {
                e.meta.confirmationTime = now;
                result.confirmed.push_back(id);
                continue;
            }
            if (e.approvers.empty() && now - e.meta.attachTime > orphanAge) {
                e.meta.orphaned = true;
                result.orphaned.push_back(id);
                remove_tip(id);
                continue;
            }
            remaining.push_back(id);
        }
        unconfirmed_ = std::move(remaining);
        return result;
    }

    // Re-merge bookkeeping after branch resolution: drop the given branches
    // from every message reality that references them, except the excluded
    // messages (carriers of rejected payloads, which stay rejected).
    // Returns the re-parented messages.
    std::vector<MessageId> strip_branches(const std::vector<BranchId>& branches,
                                          const std::unordered_set<MessageId>& exclude = {}) {
        std::vector<MessageId> touched;
        if (branches.empty()) return touched;
        for (const auto& id : order_) {
            if (exclude.count(id)) continue;
            Entry& e = entries_.at(id);
            if (e.meta.reality.empty()) continue;
            Reality cleaned;
            cleaned.reserve(e.meta.reality.size());
            for (const auto& b : e.meta.reality)
                if (std::find(branches.begin(), branches.end(), b) == branches.end()) cleaned.push_back(b);
            if (cleaned.size() != e.meta.reality.size()) {
                e.meta.reality = std::move(cleaned);
                touched.push_back(id);
            }
        }
        return touched;
    }

    void set_opinion(const MessageId& id, PayloadOpinion opinion) { entries_.at(id).meta.opinion = opinion; }
    void set_reality(const MessageId& id, Reality reality) { entries_.at(id).meta.reality = std::move(reality); }

    std::uint64_t tip_scan_ops() const { return tipScanOps_; }
    void reset_tip_scan_ops() { tipScanOps_ = 0; }

private:
    struct Entry {
        explicit Entry(std::size_t nodeCount) : referencedBy(nodeCount) {}

        std::optional<Message> message;  // genesis anchors carry none
        std::vector<MessageId> parents;
        std::vector<MessageId> approvers;
        MessageMetadata meta;
        IssuerSet referencedBy;
    };

    const Entry& entry(const MessageId& id) const { return entries_.at(id); }

    const Entry& entry_or_throw(const MessageId& id) const {
        auto it = entries_.find(id);
        if (it == entries_.end()) throw UnknownMessage("unknown message " + to_hex(id));
        return it->second;
    }

    void add_entry(const MessageId& id, Entry entry) {
        entries_.emplace(id, std::move(entry));
        order_.push_back(id);
        if (entries_.at(id).message == std::nullopt && entries_.at(id).parents.empty()) {
            tips_.push_back(id);
            tipIndex_.emplace(id, tips_.size() - 1);
        }
    }

    void remove_tip(const MessageId& id) {
        auto it = tipIndex_.find(id);
        if (it == tipIndex_.end()) return;
        std::size_t pos = it->second;
        tipIndex_.erase(it);
        if (pos + 1 != tips_.size()) {
            tips_[pos] = tips_.back();
            tipIndex_[tips_[pos]] = pos;
        }
        tips_.pop_back();
    }

    // Walk ancestors adding the issuer bit; stop where it is already set
    // (all further ancestors then carry it too).
    void propagate_issuer(const std::vector<MessageId>& parents, std::uint32_t issuer) {
        std::vector<const MessageId*> work;
        for (const auto& p : parents) work.push_back(&p);
        while (!work.empty()) {
            const MessageId& cur = *work.back();
            work.pop_back();
            Entry& e = entries_.at(cur);
            if (!e.referencedBy.set(issuer)) continue;
            for (const auto& p : e.parents) work.push_back(&p);
        }
    }

    TangleParams params_;
    std::size_t nodeCount_;
    MessageId genesisA_, genesisB_;
    std::unordered_map<MessageId, Entry> entries_;
    std::vector<MessageId> order_;
    std::vector<MessageId> tips_;
    std::unordered_map<MessageId, std::size_t> tipIndex_;
    std::vector<MessageId> unconfirmed_;
    std::function<bool(const Reality&)> branchRejected_;
    mutable std::uint64_t tipScanOps_ = 0;
};

}  // namespace tanglesim
