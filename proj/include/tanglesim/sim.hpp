#pragma once

#include <atomic>
#include <deque>
#include <memory>
#include <ostream>
#include <queue>
#include <thread>
#include <unordered_set>

#include "tanglesim/csv.hpp"
#include "tanglesim/fpc.hpp"
#include "tanglesim/mana.hpp"
#include "tanglesim/rate_control.hpp"
#include "tanglesim/scenario.hpp"
#include "tanglesim/tangle.hpp"

namespace tanglesim {

struct ConflictOutcome {
    TxId winner;
    BranchId winnerBranch;
    double resolvedAt = 0;
    std::vector<TxId> rejectedPayloads;
    std::size_t remergedTxCount = 0;
    std::size_t remergedMessageCount = 0;
};

// One row of experiment output. Fields that a given experiment does not
// measure stay unset and render as empty CSV cells.
struct MetricsRow {
    std::optional<double> tps;
    std::optional<double> meanConfirmationTime;
    std::optional<double> orphanRate;
    std::optional<double> agreementRate;
    std::optional<double> meanTerminationRound;
    std::optional<double> notFinalizedRate;
    std::vector<ConflictOutcome> conflictOutcomes;
};

// ---------------------------------------------------------------------------
// FPC experiments
// ---------------------------------------------------------------------------

// Monte-Carlo aggregate over `runs` seeds (seed, seed+1, ...).
inline MetricsRow run_fpc_experiment(const FpcConfig& base, int runs, std::span<const double> manaView = {},
                                     FpcStats* stats = nullptr) {
    if (runs < 1) throw InvariantViolation("runs must be >= 1");
    base.validate();
    int agreedRuns = 0;
    int notFinalizedRuns = 0;
    double termSum = 0;
    for (int r = 0; r < runs; ++r) {
        FpcConfig cfg = base;
        cfg.seed = base.seed + static_cast<std::uint64_t>(r);
        FpcOutcome outcome = run_fpc(cfg, manaView, stats);
        if (outcome.agreed) ++agreedRuns;
        bool allFinal = true;
        for (int i = 0; i < outcome.honestCount; ++i)
            if (!outcome.perNode[static_cast<std::size_t>(i)].second) {
                allFinal = false;
                break;
            }
        if (!allFinal) ++notFinalizedRuns;
        termSum += mean_termination_round(outcome, cfg);
    }
    MetricsRow row;
    row.agreementRate = static_cast<double>(agreedRuns) / runs;
    row.meanTerminationRound = termSum / runs;
    row.notFinalizedRate = static_cast<double>(notFinalizedRuns) / runs;
    return row;
}

struct SweepGrid {
    std::vector<int> N;
    std::vector<int> k;
    std::vector<double> q;
};

struct SweepRow {
    FpcConfig config;
    bool feasible = true;
    std::string infeasibleReason;
    MetricsRow metrics;
};

// Cartesian sweep in grid order (N outer, k middle, q inner). Infeasible
// grid points (k >= N) are reported per-row, not fatal. Rows are
// independent; `jobs` > 1 runs them concurrently without changing output
// order or values.
inline std::vector<SweepRow> run_fpc_sweep(const FpcConfig& base, const SweepGrid& grid, int runs, int jobs = 1) {
    std::vector<int> Ns = grid.N.empty() ? std::vector<int>{base.N} : grid.N;
    std::vector<int> ks = grid.k.empty() ? std::vector<int>{base.k} : grid.k;
    std::vector<double> qs = grid.q.empty() ? std::vector<double>{base.q} : grid.q;

    std::vector<SweepRow> rows;
    for (int N : Ns)
        for (int k : ks)
            for (double q : qs) {
                SweepRow row;
                row.config = base;
                row.config.N = N;
                row.config.k = k;
                row.config.q = q;
                rows.push_back(std::move(row));
            }

    auto runRow = [runs](SweepRow& row) {
        try {
            row.config.validate();
        } catch (const InvariantViolation& e) {
            row.feasible = false;
            row.infeasibleReason = e.what();
            return;
        }
        row.metrics = run_fpc_experiment(row.config, runs);
    };

    if (jobs <= 1 || rows.size() <= 1) {
        for (auto& row : rows) runRow(row);
        return rows;
    }
    std::atomic<std::size_t> nextIndex{0};
    std::vector<std::thread> workers;
    std::size_t workerCount = std::min<std::size_t>(static_cast<std::size_t>(jobs), rows.size());
    workers.reserve(workerCount);
    for (std::size_t w = 0; w < workerCount; ++w)
        workers.emplace_back([&] {
            for (;;) {
                std::size_t i = nextIndex.fetch_add(1);
                if (i >= rows.size()) return;
                runRow(rows[i]);
            }
        });
    for (auto& t : workers) t.join();
    return rows;
}

// ---------------------------------------------------------------------------
// Whole-Tangle scenario
// ---------------------------------------------------------------------------

struct ScenarioResult {
    MetricsRow metrics;
    std::unique_ptr<Tangle> tangle;
    std::unique_ptr<UtxoLedger> ledger;
    std::unique_ptr<ManaLedger> mana;
    std::vector<NodeId> nodeIds;
    std::unordered_map<TxId, MessageId> carriers;
    std::uint64_t attachedCount = 0;
    std::vector<std::uint64_t> perNodeAttached;
    std::vector<int> perNodeMaxDifficulty;
};

namespace detail {

struct SimEvent {
    double time = 0;
    std::uint64_t seq = 0;
    enum class Type : std::uint8_t { PoissonTick, Request, PowDone, Deliver, Sweep } type = Type::Sweep;
    int node = -1;
    std::size_t index = 0;  // request or delivery slot

    bool operator>(const SimEvent& other) const {
        if (time != other.time) return time > other.time;
        return seq > other.seq;
    }
};

struct IssueRequest {
    int node = 0;
    bool isValueTx = false;
    Transaction tx;
};

struct PendingDelivery {
    Message message;
    int node = 0;
    bool isValueTx = false;
};

}  // namespace detail

// Deterministic discrete-event run: Poisson issuance -> scheduler quota ->
// adaptive PoW -> RURTS tip selection -> delivery -> 1 Hz confirmation
// sweeps with AW-threshold branch resolution.
class ScenarioEngine {
public:
    explicit ScenarioEngine(ScenarioConfig cfg, std::ostream* trace = nullptr) : cfg_(std::move(cfg)), trace_(trace) {
        cfg_.normalize();
        cfg_.validate();
    }

    ScenarioResult run() {
        setup();
        schedule_initial_events();
        double lastSweep = 0;
        while (!events_.empty()) {
            detail::SimEvent ev = events_.top();
            events_.pop();
            if (ev.time > cfg_.duration) break;
            now_ = ev.time;
            dispatch(ev);
            if (ev.type == detail::SimEvent::Type::Sweep) lastSweep = ev.time;
        }
        if (lastSweep < cfg_.duration) {
            now_ = cfg_.duration;
            run_sweep();
        }
        return collect();
    }

private:
    using EventType = detail::SimEvent::Type;

    void setup() {
        TangleParams tp;
        tp.eligibilityAge = cfg_.eligibilityAge;
        tp.confirmationThreshold = cfg_.confirmationThreshold;
        tp.orphanAgeFactor = cfg_.orphanAgeFactor;
        tp.tipPoolTarget = cfg_.tipPoolTarget;
        tangle_ = std::make_unique<Tangle>(tp, static_cast<std::size_t>(cfg_.nodes));

        std::vector<TxOutput> genesisOutputs;
        for (const auto& g : cfg_.genesis) genesisOutputs.push_back({g.address, g.amount});
        ledger_ = std::make_unique<UtxoLedger>(genesisOutputs);
        UtxoLedger* ledger = ledger_.get();
        tangle_->set_branch_rejected_fn([ledger](const Reality& r) { return ledger->any_rejected(r); });

        mana_ = std::make_unique<ManaLedger>(ManaParams{cfg_.manaHalfLife, cfg_.manaPledgeMode});
        nodeIds_.reserve(static_cast<std::size_t>(cfg_.nodes));
        for (int i = 0; i < cfg_.nodes; ++i) {
            nodeIds_.push_back(node_id_from_index(static_cast<std::size_t>(i)));
            mana_->endow(nodeIds_.back(), cfg_.accessEndowments[static_cast<std::size_t>(i)],
                         cfg_.consensusEndowments[static_cast<std::size_t>(i)], 0.0);
        }

        limiter_ = std::make_unique<RateLimiter>(cfg_.pow, static_cast<std::size_t>(cfg_.nodes));
        tipRng_ = std::make_unique<Rng>(cfg_.seed, streams::kTipSelection);
        issueRngs_.clear();
        workRngs_.clear();
        for (int i = 0; i < cfg_.nodes; ++i) {
            issueRngs_.emplace_back(cfg_.seed, streams::kNodeIssue + static_cast<std::uint64_t>(i));
            workRngs_.emplace_back(cfg_.seed, streams::kNodeWork + static_cast<std::uint64_t>(i));
        }
        powBusy_.assign(static_cast<std::size_t>(cfg_.nodes), false);
        powQueue_.assign(static_cast<std::size_t>(cfg_.nodes), {});
        nextAllowed_.assign(static_cast<std::size_t>(cfg_.nodes), 0.0);
        perNodeAttached_.assign(static_cast<std::size_t>(cfg_.nodes), 0);
        perNodeMaxDifficulty_.assign(static_cast<std::size_t>(cfg_.nodes), 0);
    }

    void schedule_initial_events() {
        for (int i = 0; i < cfg_.nodes; ++i)
            if (cfg_.rate_for(i) > 0) schedule_poisson_tick(i, 0.0);
        for (const auto& ds : cfg_.doubleSpends) {
            schedule_double_spend_leg(ds, ds.spenderA, "a");
            schedule_double_spend_leg(ds, ds.spenderB, "b");
        }
        push_event(1.0, EventType::Sweep, -1, 0);
    }

    void schedule_double_spend_leg(const DoubleSpendEvent& ds, int spender, const std::string& leg) {
        detail::IssueRequest req;
        req.node = spender;
        req.isValueTx = true;
        Transaction tx;
        tx.inputs.push_back(ledger_->genesis_output_ref(ds.outputIndex));
        std::uint64_t amount = cfg_.genesis[ds.outputIndex].amount;
        tx.outputs.push_back({derived_address("double-spend-" + leg + "-" + std::to_string(ds.outputIndex) + "-" +
                                              std::to_string(spender)),
                              amount});
        tx.accessPledge = nodeIds_[static_cast<std::size_t>(spender)];
        tx.consensusPledge = nodeIds_[static_cast<std::size_t>(spender)];
        req.tx = std::move(tx);
        requests_.push_back(std::move(req));
        push_event(ds.time, EventType::Request, spender, requests_.size() - 1);
    }

    void schedule_poisson_tick(int node, double from) {
        double dt = issueRngs_[static_cast<std::size_t>(node)].exponential(cfg_.rate_for(node));
        push_event(from + dt, EventType::PoissonTick, node, 0);
    }

    void push_event(double time, EventType type, int node, std::size_t index) {
        detail::SimEvent ev;
        ev.time = time;
        ev.seq = nextSeq_++;
        ev.type = type;
        ev.node = node;
        ev.index = index;
        events_.push(ev);
    }

    void dispatch(const detail::SimEvent& ev) {
        switch (ev.type) {
            case EventType::PoissonTick: {
                schedule_poisson_tick(ev.node, now_);
                detail::IssueRequest req;
                req.node = ev.node;
                requests_.push_back(std::move(req));
                process_request(requests_.size() - 1);
                break;
            }
            case EventType::Request:
                process_request(ev.index);
                break;
            case EventType::PowDone:
                on_pow_done(ev.node, ev.index);
                break;
            case EventType::Deliver:
                on_deliver(ev.index);
                break;
            case EventType::Sweep:
                run_sweep();
                if (now_ + 1.0 <= cfg_.duration) push_event(now_ + 1.0, EventType::Sweep, -1, 0);
                break;
        }
    }

    void process_request(std::size_t reqIndex) {
        const auto& req = requests_[reqIndex];
        int node = req.node;
        trace("issue", "node=" + std::to_string(node));
        if (cfg_.schedulerBudget > 0) {
            double share = mana_->share(nodeIds_[static_cast<std::size_t>(node)], ManaKind::Access, now_);
            double quota = scheduler_quota(share, cfg_.schedulerBudget);
            if (quota <= 0) return;  // starved while others hold access mana
            double& allowed = nextAllowed_[static_cast<std::size_t>(node)];
            if (now_ + 1e-12 < allowed) {
                push_event(allowed, EventType::Request, node, reqIndex);
                return;
            }
            allowed = std::max(allowed, now_) + 1.0 / quota;
        }
        if (powBusy_[static_cast<std::size_t>(node)]) {
            powQueue_[static_cast<std::size_t>(node)].push_back(reqIndex);
        } else {
            start_pow(node, reqIndex);
        }
    }

    void start_pow(int node, std::size_t reqIndex) {
        if (cfg_.pow.countMode == PowParams::CountMode::Attempts)
            limiter_->record_issuance(static_cast<std::size_t>(node), now_);
        int difficulty = limiter_->difficulty_for(static_cast<std::size_t>(node), now_);
        perNodeMaxDifficulty_[static_cast<std::size_t>(node)] =
            std::max(perNodeMaxDifficulty_[static_cast<std::size_t>(node)], difficulty);
        double dt = pow_work_time(difficulty, cfg_.pow.hashRate, workRngs_[static_cast<std::size_t>(node)]);
        powBusy_[static_cast<std::size_t>(node)] = true;
        powDifficulty_[reqIndex] = difficulty;
        push_event(now_ + dt, EventType::PowDone, node, reqIndex);
    }

    void on_pow_done(int node, std::size_t reqIndex) {
        const auto& req = requests_[reqIndex];
        if (cfg_.pow.countMode == PowParams::CountMode::Attachments)
            limiter_->record_issuance(static_cast<std::size_t>(node), now_);

        double level = tangle_->congestion_level(now_);
        std::vector<MessageId> parents = tangle_->select_tips(now_, level, *tipRng_);
        Payload payload;
        if (req.isValueTx)
            payload = ValueTxPayload{req.tx};
        else
            payload = DataPayload{};
        Message m = build_and_sign(nodeIds_[static_cast<std::size_t>(node)], std::move(parents), std::move(payload),
                                   seconds_to_micros(now_), 0);
        trace("pow", "node=" + std::to_string(node) + " difficulty=" + std::to_string(powDifficulty_[reqIndex]) +
                         " id=" + short_id(message_id(m)));

        deliveries_.push_back({std::move(m), node, req.isValueTx});
        push_event(now_ + cfg_.propagationDelay, EventType::Deliver, node, deliveries_.size() - 1);

        powBusy_[static_cast<std::size_t>(node)] = false;
        auto& queue = powQueue_[static_cast<std::size_t>(node)];
        if (!queue.empty()) {
            std::size_t next = queue.front();
            queue.pop_front();
            start_pow(node, next);
        }
    }

    void on_deliver(std::size_t index) {
        auto& pending = deliveries_[index];
        const Message& m = pending.message;
        // structural/signature/timestamp validation; PoW is simulated by
        // the work-time model, so the nonce carries no difficulty here
        ValidationResult verdict = validate(m, now_, 0);
        if (verdict != ValidationResult::Ok)
            throw Error(std::string("message failed validation at delivery: ") + to_string(verdict));
        Reality context;
        for (const auto& p : m.parents) context = reality_union(context, tangle_->metadata(p).reality);

        Reality reality = context;
        PayloadOpinion opinion = PayloadOpinion::NA;
        std::optional<ApplyOutcome> outcome;
        if (pending.isValueTx) {
            const Transaction& tx = std::get<ValueTxPayload>(m.payload).tx;
            outcome = ledger_->apply(tx, now_, context);
            if (outcome->valid()) {
                reality = outcome->reality;
                opinion = PayloadOpinion::Like;
                mana_->pledge_on_transaction(tx, now_);
            } else if (outcome->conflict()) {
                reality = outcome->reality;
                reality_insert(reality, outcome->branch);
                opinion = PayloadOpinion::Dislike;  // later arrival of the conflict set
                mana_->pledge_on_transaction(tx, now_);
            } else {
                opinion = PayloadOpinion::Dislike;
            }
        }

        MessageId id = tangle_->attach(m, static_cast<std::uint32_t>(pending.node), std::move(reality), opinion, now_);
        ++attachedCount_;
        ++perNodeAttached_[static_cast<std::size_t>(pending.node)];
        trace("deliver", "node=" + std::to_string(pending.node) + " id=" + short_id(id));
        pending.message = Message{};  // the tangle owns its copy now

        if (outcome && !outcome->invalid()) {
            carriers_[outcome->txId] = id;
            if (outcome->conflict()) {
                for (const auto& member : outcome->conflictSet) {
                    if (!activeMembers_.insert(member).second) continue;
                    activeConflicts_.push_back(member);
                    // Earlier members were forked retroactively; attribute
                    // their carrier messages to the new branch.
                    auto it = carriers_.find(member);
                    if (it != carriers_.end() && member != outcome->txId) {
                        Reality patched = tangle_->metadata(it->second).reality;
                        reality_insert(patched, UtxoLedger::branch_id_for(member));
                        tangle_->set_reality(it->second, std::move(patched));
                    }
                }
                trace("conflict", "tx=" + short_id(outcome->txId) +
                                      " members=" + std::to_string(outcome->conflictSet.size()));
            }
        }
    }

    void run_sweep() {
        std::vector<double> manaView = mana_->view(ManaKind::Consensus, nodeIds_, now_);
        resolve_ready_conflicts(manaView);
        SweepResult result = tangle_->confirmation_sweep(now_, manaView);
        for (const auto& id : result.confirmed) trace("confirm", "id=" + short_id(id));
        for (const auto& id : result.orphaned) trace("orphan", "id=" + short_id(id));
    }

    // A conflict resolves as soon as one member's branch (measured at its
    // carrier message) reaches the confirmation threshold.
    void resolve_ready_conflicts(std::span<const double> manaView) {
        for (const auto& member : activeConflicts_) {
            BranchId branch = UtxoLedger::branch_id_for(member);
            if (ledger_->branch_status(branch) != BranchStatus::Pending) continue;
            auto carrier = carriers_.find(member);
            if (carrier == carriers_.end()) continue;
            double aw = tangle_->approval_weight(carrier->second, manaView);
            if (aw < cfg_.confirmationThreshold) continue;

            ResolutionReport report = ledger_->resolve(branch);
            std::unordered_set<MessageId> keepRejected;
            for (const auto& tx : report.rejectedPayloads) {
                auto it = carriers_.find(tx);
                if (it != carriers_.end()) {
                    keepRejected.insert(it->second);
                    tangle_->set_opinion(it->second, PayloadOpinion::Dislike);
                }
            }
            std::size_t remergedMessages = tangle_->strip_branches(report.rejectedBranches, keepRejected).size();

            ConflictOutcome co;
            co.winner = member;
            co.winnerBranch = branch;
            co.resolvedAt = now_;
            co.rejectedPayloads = report.rejectedPayloads;
            co.remergedTxCount = report.remerged.size();
            co.remergedMessageCount = remergedMessages;
            conflictOutcomes_.push_back(std::move(co));
            trace("resolve", "winner=" + short_id(member) + " rejected=" + std::to_string(report.rejectedPayloads.size()) +
                                 " remerged=" + std::to_string(report.remerged.size()));
        }
    }

    ScenarioResult collect() {
        ScenarioResult result;
        result.metrics.tps = static_cast<double>(attachedCount_) / cfg_.duration;
        double confirmSum = 0;
        std::uint64_t confirmCount = 0;
        std::uint64_t orphanCount = 0;
        for (const auto& id : tangle_->messages_in_order()) {
            if (id == tangle_->genesis_a() || id == tangle_->genesis_b()) continue;
            const auto& meta = tangle_->metadata(id);
            if (meta.confirmed()) {
                confirmSum += *meta.confirmationTime - meta.attachTime;
                ++confirmCount;
            }
            if (meta.orphaned) ++orphanCount;
        }
        if (confirmCount > 0) result.metrics.meanConfirmationTime = confirmSum / static_cast<double>(confirmCount);
        if (attachedCount_ > 0)
            result.metrics.orphanRate = static_cast<double>(orphanCount) / static_cast<double>(attachedCount_);
        result.metrics.conflictOutcomes = conflictOutcomes_;
        result.tangle = std::move(tangle_);
        result.ledger = std::move(ledger_);
        result.mana = std::move(mana_);
        result.nodeIds = nodeIds_;
        result.carriers = carriers_;
        result.attachedCount = attachedCount_;
        result.perNodeAttached = perNodeAttached_;
        result.perNodeMaxDifficulty = perNodeMaxDifficulty_;
        return result;
    }

    static std::string short_id(const MessageId& id) { return to_hex(id).substr(0, 16); }
    static std::string short_id(const TxId& id) { return to_hex(id).substr(0, 16); }

    void trace(const char* type, const std::string& detail) {
        if (!trace_) return;
        *trace_ << format_fixed(now_, 6) << ' ' << type << ' ' << detail << '\n';
    }

    ScenarioConfig cfg_;
    std::ostream* trace_ = nullptr;
    double now_ = 0;
    std::uint64_t nextSeq_ = 0;
    std::priority_queue<detail::SimEvent, std::vector<detail::SimEvent>, std::greater<>> events_;

    std::unique_ptr<Tangle> tangle_;
    std::unique_ptr<UtxoLedger> ledger_;
    std::unique_ptr<ManaLedger> mana_;
    std::unique_ptr<RateLimiter> limiter_;
    std::unique_ptr<Rng> tipRng_;
    std::vector<Rng> issueRngs_;
    std::vector<Rng> workRngs_;
    std::vector<NodeId> nodeIds_;

    std::vector<detail::IssueRequest> requests_;
    std::vector<detail::PendingDelivery> deliveries_;
    std::unordered_map<std::size_t, int> powDifficulty_;
    std::vector<bool> powBusy_;
    std::vector<std::deque<std::size_t>> powQueue_;
    std::vector<double> nextAllowed_;

    std::unordered_map<TxId, MessageId> carriers_;
    std::vector<TxId> activeConflicts_;
    std::unordered_set<TxId> activeMembers_;
    std::vector<ConflictOutcome> conflictOutcomes_;

    std::uint64_t attachedCount_ = 0;
    std::vector<std::uint64_t> perNodeAttached_;
    std::vector<int> perNodeMaxDifficulty_;
};

inline ScenarioResult run_tangle_scenario(const ScenarioConfig& cfg, std::ostream* trace = nullptr) {
    ScenarioEngine engine(cfg, trace);
    return engine.run();
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

inline constexpr const char* kFpcCsvHeader =
    "N,k,q,p0,tau,beta,l,M,seed,runs,agreement_rate,mean_termination_round,not_finalized_rate";

inline std::string fpc_csv_row(const FpcConfig& cfg, int runs, const MetricsRow& row) {
    std::string out;
    out += std::to_string(cfg.N);
    out += ',';
    out += std::to_string(cfg.k);
    out += ',';
    out += format_double(cfg.q);
    out += ',';
    out += format_double(cfg.p0);
    out += ',';
    out += format_double(cfg.tau);
    out += ',';
    out += format_double(cfg.beta);
    out += ',';
    out += std::to_string(cfg.l);
    out += ',';
    out += std::to_string(cfg.M);
    out += ',';
    out += std::to_string(cfg.seed);
    out += ',';
    out += std::to_string(runs);
    out += ',';
    out += format_optional(row.agreementRate);
    out += ',';
    out += format_optional(row.meanTerminationRound);
    out += ',';
    out += format_optional(row.notFinalizedRate);
    return out;
}

inline constexpr const char* kTangleCsvHeader = "tps,mean_confirmation_time,orphan_rate,conflicts_resolved";

inline std::string tangle_csv_row(const MetricsRow& row) {
    std::string out;
    out += format_optional(row.tps);
    out += ',';
    out += format_optional(row.meanConfirmationTime);
    out += ',';
    out += format_optional(row.orphanRate);
    out += ',';
    out += std::to_string(row.conflictOutcomes.size());
    return out;
}

}  // namespace tanglesim
