#pragma once

#include <algorithm>
#include <optional>
#include <unordered_map>
#include <unordered_set>

#include "tanglesim/transaction.hpp"

namespace tanglesim {

struct UnknownBranch : Error {
    using Error::Error;
};
struct WinnerNotPending : Error {
    using Error::Error;
};

enum class BranchStatus : std::uint8_t { Pending, Confirmed, Rejected };
enum class TxStatus : std::uint8_t { Pending, Confirmed, Rejected };

// A reality is the set of conflict branches a transaction depends on.
// Empty means master. Kept sorted and duplicate-free.
using Reality = std::vector<BranchId>;

inline constexpr BranchId kMasterBranch{};  // all-zero digest

inline bool reality_contains(const Reality& r, const BranchId& b) {
    return std::binary_search(r.begin(), r.end(), b);
}

inline void reality_insert(Reality& r, const BranchId& b) {
    auto it = std::lower_bound(r.begin(), r.end(), b);
    if (it == r.end() || *it != b) r.insert(it, b);
}

inline Reality reality_union(const Reality& a, const Reality& b) {
    Reality out;
    out.reserve(a.size() + b.size());
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

enum class InvalidReason : std::uint8_t {
    None,
    NoInputs,
    NoOutputs,
    DuplicateInput,
    NonPositiveAmount,
    MissingInput,
    BalanceMismatch,
    AlreadySpentInReality,
    UnmergeableRealities,
    DuplicateTransaction,
};

inline const char* to_string(InvalidReason r) {
    switch (r) {
        case InvalidReason::None: return "none";
        case InvalidReason::NoInputs: return "no-inputs";
        case InvalidReason::NoOutputs: return "no-outputs";
        case InvalidReason::DuplicateInput: return "duplicate-input";
        case InvalidReason::NonPositiveAmount: return "non-positive-amount";
        case InvalidReason::MissingInput: return "missing-input";
        case InvalidReason::BalanceMismatch: return "balance-mismatch";
        case InvalidReason::AlreadySpentInReality: return "already-spent-in-reality";
        case InvalidReason::UnmergeableRealities: return "unmergeable-realities";
        case InvalidReason::DuplicateTransaction: return "duplicate-transaction";
    }
    return "?";
}

struct ApplyOutcome {
    enum class Kind : std::uint8_t { Valid, Conflict, Invalid } kind = Kind::Invalid;
    TxId txId;
    BranchId branch = kMasterBranch;  // own conflict branch, or representative of the inherited reality
    Reality reality;                  // full inherited reality (conflict branch excluded)
    std::vector<TxId> conflictSet;    // populated for Kind::Conflict
    InvalidReason reason = InvalidReason::None;

    bool valid() const { return kind == Kind::Valid; }
    bool conflict() const { return kind == Kind::Conflict; }
    bool invalid() const { return kind == Kind::Invalid; }
};

struct ResolutionReport {
    BranchId winner;
    std::vector<BranchId> confirmedBranches;
    std::vector<BranchId> rejectedBranches;
    std::vector<TxId> rejectedPayloads;  // conflict losers plus spends that vanish with them
    std::vector<TxId> remerged;          // non-conflicting txs re-parented into the winning reality
};

// Unspent-transaction-output ledger with reality-based branch bookkeeping.
// Double spends fork sibling branches; resolution confirms one member per
// conflict set and re-merges non-conflicting descendants. Lookups never
// touch the message DAG.
class UtxoLedger {
public:
    struct BranchInfo {
        BranchId id;
        TxId member;                         // the conflicting transaction that defines this branch
        Reality parents;                     // reality the branch forked from
        std::vector<OutputRef> conflictRefs; // contested outputs this branch is a party to
        BranchStatus status = BranchStatus::Pending;
    };

    explicit UtxoLedger(const std::vector<TxOutput>& genesisOutputs) {
        genesisTxId_ = TxId{content_hash(Bytes{'g', 'e', 'n', 'e', 's', 'i', 's'})};
        for (std::size_t i = 0; i < genesisOutputs.size(); ++i) {
            OutputRef ref{genesisTxId_, static_cast<std::uint16_t>(i)};
            outputs_.emplace(ref, OutputState{genesisOutputs[i], genesisTxId_, {}});
            genesisSupply_ += genesisOutputs[i].amount;
        }
    }

    TxId genesis_tx_id() const { return genesisTxId_; }
    OutputRef genesis_output_ref(std::uint16_t index) const { return OutputRef{genesisTxId_, index}; }
    std::uint64_t genesis_supply() const { return genesisSupply_; }

    static BranchId branch_id_for(const TxId& tx) { return BranchId{tx.bytes}; }

    ApplyOutcome apply(const Transaction& tx, double arrivalTime, const Reality& context = {}) {
        ApplyOutcome out;
        out.txId = tx_id(tx);

        if (tx.inputs.empty()) return invalid(out, InvalidReason::NoInputs);
        if (tx.outputs.empty()) return invalid(out, InvalidReason::NoOutputs);
        for (std::size_t i = 0; i < tx.inputs.size(); ++i)
            for (std::size_t j = i + 1; j < tx.inputs.size(); ++j)
                if (tx.inputs[i] == tx.inputs[j]) return invalid(out, InvalidReason::DuplicateInput);
        for (const auto& o : tx.outputs)
            if (o.amount == 0) return invalid(out, InvalidReason::NonPositiveAmount);
        if (txs_.count(out.txId)) return invalid(out, InvalidReason::DuplicateTransaction);

        std::uint64_t inputSum = 0;
        std::vector<const OutputState*> inputStates;
        inputStates.reserve(tx.inputs.size());
        for (const auto& ref : tx.inputs) {
            const OutputState* state = find_output(ref);
            if (!state) return invalid(out, InvalidReason::MissingInput);
            inputStates.push_back(state);
            inputSum += state->output.amount;
        }
        if (inputSum != tx.total_output_amount()) return invalid(out, InvalidReason::BalanceMismatch);

        Reality inherited = context;
        for (const auto& ref : tx.inputs) inherited = reality_union(inherited, output_reality(ref));
        Reality closed = closure(inherited);
        if (has_internal_conflict(closed)) return invalid(out, InvalidReason::UnmergeableRealities);

        // Double spends against transactions the new tx itself builds on are
        // self-contradictions, not new realities. A consumer whose branch is
        // already Confirmed lives in every future reality, so its inputs are
        // gone for good.
        std::vector<const OutputRef*> contested;
        for (std::size_t i = 0; i < tx.inputs.size(); ++i) {
            for (const TxId& consumer : inputStates[i]->consumers) {
                const TxRecord& c = txs_.at(consumer);
                if (c.ownBranch) {
                    if (branches_.at(*c.ownBranch).status == BranchStatus::Confirmed ||
                        reality_contains(closed, *c.ownBranch))
                        return invalid(out, InvalidReason::AlreadySpentInReality);
                } else if (is_input_ancestor(consumer, tx)) {
                    return invalid(out, InvalidReason::AlreadySpentInReality);
                }
            }
            if (!inputStates[i]->consumers.empty()) contested.push_back(&tx.inputs[i]);
        }

        out.reality = inherited;
        if (!contested.empty()) {
            for (const OutputRef* ref : contested)
                for (TxId consumer : outputs_.at(*ref).consumers) ensure_branch(consumer, *ref);
            BranchId own = branch_id_for(out.txId);
            BranchInfo info;
            info.id = own;
            info.member = out.txId;
            info.parents = inherited;
            for (const OutputRef* ref : contested) info.conflictRefs.push_back(*ref);
            branches_.emplace(own, std::move(info));
            record_tx(tx, out.txId, arrivalTime, inherited, own);
            out.kind = ApplyOutcome::Kind::Conflict;
            out.branch = own;
            std::unordered_set<TxId> members;
            for (const OutputRef* ref : contested)
                for (const TxId& consumer : outputs_.at(*ref).consumers) members.insert(consumer);
            out.conflictSet.assign(members.begin(), members.end());
            std::sort(out.conflictSet.begin(), out.conflictSet.end());
        } else {
            record_tx(tx, out.txId, arrivalTime, inherited, std::nullopt);
            out.kind = ApplyOutcome::Kind::Valid;
            out.branch = representative(inherited);
        }
        return out;
    }

    // All transactions ever applied that consume the output; empty if
    // unspent or unknown.
    std::vector<TxId> conflict_set(const OutputRef& ref) const {
        auto it = outputs_.find(ref);
        if (it == outputs_.end()) return {};
        return it->second.consumers;
    }

    ResolutionReport resolve(const BranchId& winner) {
        auto it = branches_.find(winner);
        if (it == branches_.end()) throw UnknownBranch("unknown branch " + to_hex(winner));
        if (it->second.status != BranchStatus::Pending)
            throw WinnerNotPending("branch " + to_hex(winner) + " is not pending");

        ResolutionReport report;
        report.winner = winner;

        Reality confirm;
        reality_insert(confirm, winner);
        for (const BranchId& b : closure(it->second.parents))
            if (b != kMasterBranch) reality_insert(confirm, b);
        for (const BranchId& b : confirm)
            if (branches_.at(b).status == BranchStatus::Rejected)
                throw WinnerNotPending("ancestor branch " + to_hex(b) + " already rejected");

        // Siblings of every confirmed branch lose, then rejection flows to
        // every branch forked inside a losing reality.
        std::unordered_set<BranchId> rejected;
        for (const BranchId& b : confirm)
            for (const OutputRef& ref : branches_.at(b).conflictRefs)
                for (const TxId& member : outputs_.at(ref).consumers) {
                    BranchId mb = branch_id_for(member);
                    if (!reality_contains(confirm, mb)) rejected.insert(mb);
                }
        for (bool grew = true; grew;) {
            grew = false;
            for (auto& [id, info] : branches_) {
                if (rejected.count(id) || info.status == BranchStatus::Rejected) continue;
                for (const BranchId& parent : info.parents)
                    if (rejected.count(parent)) {
                        rejected.insert(id);
                        grew = true;
                        break;
                    }
            }
        }

        for (const BranchId& b : confirm) {
            auto& info = branches_.at(b);
            if (info.status == BranchStatus::Pending) {
                info.status = BranchStatus::Confirmed;
                report.confirmedBranches.push_back(b);
            }
        }
        for (const BranchId& b : rejected) {
            auto& info = branches_.at(b);
            if (info.status == BranchStatus::Pending) info.status = BranchStatus::Rejected;
        }
        report.rejectedBranches.assign(rejected.begin(), rejected.end());
        std::sort(report.rejectedBranches.begin(), report.rejectedBranches.end());

        // Arrival order guarantees creators are classified before consumers.
        for (const TxId& id : txOrder_) {
            TxRecord& rec = txs_.at(id);
            if (rec.status == TxStatus::Rejected) continue;
            if (rec.ownBranch && rejected.count(*rec.ownBranch)) {
                rec.status = TxStatus::Rejected;
                report.rejectedPayloads.push_back(id);
                continue;
            }
            bool inputGone = false;
            for (const auto& ref : rec.tx.inputs) {
                if (ref.txId == genesisTxId_) continue;
                if (txs_.at(ref.txId).status == TxStatus::Rejected) {
                    inputGone = true;
                    break;
                }
            }
            if (inputGone) {
                rec.status = TxStatus::Rejected;
                report.rejectedPayloads.push_back(id);
                continue;
            }
            bool tainted = false;
            Reality cleaned;
            for (const BranchId& b : rec.reality) {
                if (rejected.count(b)) {
                    tainted = true;
                } else {
                    cleaned.push_back(b);
                }
            }
            if (tainted) {
                rec.reality = std::move(cleaned);
                report.remerged.push_back(id);
            }
            if (rec.ownBranch && branches_.at(*rec.ownBranch).status == BranchStatus::Confirmed)
                rec.status = TxStatus::Confirmed;
        }
        return report;
    }

    BranchStatus branch_status(const BranchId& id) const {
        if (id == kMasterBranch) return BranchStatus::Confirmed;
        auto it = branches_.find(id);
        if (it == branches_.end()) throw UnknownBranch("unknown branch " + to_hex(id));
        return it->second.status;
    }

    bool any_rejected(const Reality& reality) const {
        for (const auto& b : reality)
            if (branch_status(b) == BranchStatus::Rejected) return true;
        return false;
    }

    const BranchInfo* branch(const BranchId& id) const {
        auto it = branches_.find(id);
        return it == branches_.end() ? nullptr : &it->second;
    }

    bool contains_tx(const TxId& id) const { return txs_.count(id) != 0; }

    TxStatus tx_status(const TxId& id) const { return txs_.at(id).status; }

    const Transaction& transaction(const TxId& id) const { return txs_.at(id).tx; }

    Reality tx_reality(const TxId& id) const { return txs_.at(id).reality; }

    std::optional<BranchId> tx_branch(const TxId& id) const { return txs_.at(id).ownBranch; }

    std::vector<TxId> transactions_in_order() const { return txOrder_; }

    // Token supply visible in the confirmed reality. Unresolved conflict
    // members are excluded, so their contested inputs count as unspent.
    std::uint64_t confirmed_reality_supply() const {
        std::uint64_t supply = 0;
        for (const auto& [ref, state] : outputs_) {
            if (!tx_in_confirmed_reality(state.creator)) continue;
            bool spent = false;
            for (const TxId& consumer : state.consumers)
                if (tx_in_confirmed_reality(consumer)) {
                    spent = true;
                    break;
                }
            if (!spent) supply += state.output.amount;
        }
        return supply;
    }

    bool tx_in_confirmed_reality(const TxId& id) const {
        if (id == genesisTxId_) return true;
        const TxRecord& rec = txs_.at(id);
        if (rec.status == TxStatus::Rejected) return false;
        if (rec.ownBranch) return branches_.at(*rec.ownBranch).status == BranchStatus::Confirmed;
        return true;
    }

    // Contested outputs with two or more consumers, in first-contest order.
    std::vector<OutputRef> conflicts() const { return conflictRefs_; }

    std::uint64_t lookup_ops() const { return lookupOps_; }

private:
    struct OutputState {
        TxOutput output;
        TxId creator;
        std::vector<TxId> consumers;  // arrival order
    };

    struct TxRecord {
        Transaction tx;
        Reality reality;  // inherited conflict branches, own branch excluded
        std::optional<BranchId> ownBranch;
        TxStatus status = TxStatus::Pending;
        double arrivalTime = 0;
    };

    ApplyOutcome& invalid(ApplyOutcome& out, InvalidReason reason) {
        out.kind = ApplyOutcome::Kind::Invalid;
        out.reason = reason;
        return out;
    }

    const OutputState* find_output(const OutputRef& ref) const {
        ++lookupOps_;
        auto it = outputs_.find(ref);
        return it == outputs_.end() ? nullptr : &it->second;
    }

    Reality output_reality(const OutputRef& ref) const {
        ++lookupOps_;
        const OutputState& state = outputs_.at(ref);
        if (state.creator == genesisTxId_) return {};
        const TxRecord& rec = txs_.at(state.creator);
        Reality r = rec.reality;
        if (rec.ownBranch) reality_insert(r, *rec.ownBranch);
        return r;
    }

    Reality closure(const Reality& reality) const {
        Reality out = reality;
        std::vector<BranchId> work(reality.begin(), reality.end());
        while (!work.empty()) {
            BranchId b = work.back();
            work.pop_back();
            auto it = branches_.find(b);
            if (it == branches_.end()) continue;
            for (const BranchId& parent : it->second.parents)
                if (!reality_contains(out, parent)) {
                    reality_insert(out, parent);
                    work.push_back(parent);
                }
        }
        return out;
    }

    // Two branches conflict when they are distinct members of a shared
    // conflict set (they contest the same output).
    bool has_internal_conflict(const Reality& closed) const {
        std::unordered_map<OutputRef, BranchId> seen;
        for (const BranchId& b : closed) {
            auto it = branches_.find(b);
            if (it == branches_.end()) continue;
            for (const OutputRef& ref : it->second.conflictRefs) {
                auto [pos, inserted] = seen.emplace(ref, b);
                if (!inserted && pos->second != b) return true;
            }
        }
        return false;
    }

    // Does candidate appear on the creator chain of any of tx's inputs?
    bool is_input_ancestor(const TxId& candidate, const Transaction& tx) const {
        std::vector<TxId> work;
        std::unordered_set<TxId> visited;
        for (const auto& ref : tx.inputs) {
            auto it = outputs_.find(ref);
            if (it != outputs_.end()) work.push_back(it->second.creator);
        }
        while (!work.empty()) {
            TxId cur = work.back();
            work.pop_back();
            if (cur == genesisTxId_ || !visited.insert(cur).second) continue;
            if (cur == candidate) return true;
            for (const auto& ref : txs_.at(cur).tx.inputs) {
                auto it = outputs_.find(ref);
                if (it != outputs_.end()) work.push_back(it->second.creator);
            }
        }
        return false;
    }

    // Retroactively fork an existing consumer into its own conflict branch
    // and push the new branch into every dependent reality.
    void ensure_branch(const TxId& member, const OutputRef& contestedRef) {
        BranchId id = branch_id_for(member);
        auto it = branches_.find(id);
        if (it == branches_.end()) {
            TxRecord& rec = txs_.at(member);
            BranchInfo info;
            info.id = id;
            info.member = member;
            info.parents = rec.reality;
            branches_.emplace(id, std::move(info));
            rec.ownBranch = id;
            propagate_fork(member, id);
            it = branches_.find(id);
        }
        auto& refs = it->second.conflictRefs;
        if (std::find(refs.begin(), refs.end(), contestedRef) == refs.end()) refs.push_back(contestedRef);
        if (std::find(conflictRefs_.begin(), conflictRefs_.end(), contestedRef) == conflictRefs_.end())
            conflictRefs_.push_back(contestedRef);
    }

    void propagate_fork(const TxId& forked, const BranchId& branch) {
        std::vector<TxId> work = output_consumers(forked);
        while (!work.empty()) {
            TxId cur = work.back();
            work.pop_back();
            TxRecord& rec = txs_.at(cur);
            if (reality_contains(rec.reality, branch)) continue;
            reality_insert(rec.reality, branch);
            if (rec.ownBranch) reality_insert(branches_.at(*rec.ownBranch).parents, branch);
            for (TxId next : output_consumers(cur)) work.push_back(next);
        }
    }

    std::vector<TxId> output_consumers(const TxId& creator) const {
        std::vector<TxId> out;
        auto it = txs_.find(creator);
        if (it == txs_.end()) return out;
        for (std::uint16_t i = 0; i < it->second.tx.outputs.size(); ++i) {
            auto oit = outputs_.find(OutputRef{creator, i});
            if (oit != outputs_.end())
                out.insert(out.end(), oit->second.consumers.begin(), oit->second.consumers.end());
        }
        return out;
    }

    void record_tx(const Transaction& tx, const TxId& id, double arrivalTime, Reality reality,
                   std::optional<BranchId> ownBranch) {
        for (const auto& ref : tx.inputs) outputs_.at(ref).consumers.push_back(id);
        for (std::uint16_t i = 0; i < tx.outputs.size(); ++i) {
            ++lookupOps_;
            outputs_.emplace(OutputRef{id, i}, OutputState{tx.outputs[i], id, {}});
        }
        TxRecord rec;
        rec.tx = tx;
        rec.reality = std::move(reality);
        rec.ownBranch = ownBranch;
        rec.arrivalTime = arrivalTime;
        txs_.emplace(id, std::move(rec));
        txOrder_.push_back(id);
    }

    BranchId representative(const Reality& reality) const {
        if (reality.empty()) return kMasterBranch;
        if (reality.size() == 1) return reality.front();
        Hasher h;
        for (const auto& b : reality) h.update(b);
        return BranchId{h.final()};
    }

    TxId genesisTxId_;
    std::uint64_t genesisSupply_ = 0;
    std::unordered_map<OutputRef, OutputState> outputs_;
    std::unordered_map<TxId, TxRecord> txs_;
    std::vector<TxId> txOrder_;
    std::unordered_map<BranchId, BranchInfo> branches_;
    std::vector<OutputRef> conflictRefs_;
    mutable std::uint64_t lookupOps_ = 0;
};

}  // namespace tanglesim
