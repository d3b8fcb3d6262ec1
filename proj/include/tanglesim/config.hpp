#pragma once

#include <fstream>
#include <set>
#include <string>

#include "json.hpp"

#include "tanglesim/fpc.hpp"
#include "tanglesim/scenario.hpp"
#include "tanglesim/sim.hpp"

namespace tanglesim {

struct ParseError : Error {
    using Error::Error;
};
struct UnknownKey : Error {
    using Error::Error;
};

using Json = nlohmann::json;

namespace detail {

inline void require_object(const Json& j, const std::string& where) {
    if (!j.is_object()) throw ParseError(where + " must be a JSON object");
}

// Unknown keys are fatal; silent ignoring hides typos in experiment setups.
inline void reject_unknown_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key)) throw UnknownKey("unknown key \"" + where + key + "\"");
}

template <class T>
T get_or(const Json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw ParseError("key \"" + key + "\": " + e.what());
    }
}

inline AdversaryStrategy parse_strategy(const std::string& name) {
    if (name == "InverseMajority") return AdversaryStrategy::InverseMajority;
    if (name == "FixedLike") return AdversaryStrategy::FixedLike;
    if (name == "FixedDislike") return AdversaryStrategy::FixedDislike;
    if (name == "RandomOpinion") return AdversaryStrategy::RandomOpinion;
    throw ParseError("adversaryStrategy \"" + name + "\" is not one of InverseMajority, FixedLike, FixedDislike, RandomOpinion");
}

}  // namespace detail

struct FpcExperimentConfig {
    FpcConfig fpc;
    int runs = 100;
    SweepGrid sweep;
    std::vector<double> manaEndowments;  // optional; length N when present
};

inline FpcExperimentConfig fpc_config_from_json(const Json& j) {
    detail::require_object(j, "config");
    detail::reject_unknown_keys(j,
                                {"N", "k", "q", "p0", "tau", "beta", "l", "M", "manaWeighting",
                                 "adversaryStrategy", "seed", "runs", "sweep", "manaEndowments"},
                                "");
    FpcExperimentConfig out;
    out.fpc.N = detail::get_or(j, "N", out.fpc.N);
    out.fpc.k = detail::get_or(j, "k", out.fpc.k);
    out.fpc.q = detail::get_or(j, "q", out.fpc.q);
    out.fpc.p0 = detail::get_or(j, "p0", out.fpc.p0);
    out.fpc.tau = detail::get_or(j, "tau", out.fpc.tau);
    out.fpc.beta = detail::get_or(j, "beta", out.fpc.beta);
    out.fpc.l = detail::get_or(j, "l", out.fpc.l);
    out.fpc.M = detail::get_or(j, "M", out.fpc.M);
    out.fpc.manaWeighting = detail::get_or(j, "manaWeighting", out.fpc.manaWeighting);
    if (j.contains("adversaryStrategy"))
        out.fpc.adversaryStrategy = detail::parse_strategy(j.at("adversaryStrategy").get<std::string>());
    out.fpc.seed = detail::get_or<std::uint64_t>(j, "seed", out.fpc.seed);
    out.runs = detail::get_or(j, "runs", out.runs);
    if (out.runs < 1) throw InvariantViolation("runs must be >= 1");
    if (j.contains("sweep")) {
        const Json& s = j.at("sweep");
        detail::require_object(s, "sweep");
        detail::reject_unknown_keys(s, {"N", "k", "q"}, "sweep.");
        out.sweep.N = detail::get_or(s, "N", out.sweep.N);
        out.sweep.k = detail::get_or(s, "k", out.sweep.k);
        out.sweep.q = detail::get_or(s, "q", out.sweep.q);
    }
    if (j.contains("manaEndowments")) {
        out.manaEndowments = j.at("manaEndowments").get<std::vector<double>>();
        if (out.manaEndowments.size() != static_cast<std::size_t>(out.fpc.N))
            throw InvariantViolation("manaEndowments must list one value per node (N entries)");
        if (!out.sweep.N.empty() || !out.sweep.k.empty() || !out.sweep.q.empty())
            throw InvariantViolation("manaEndowments cannot be combined with sweep (grid points change N)");
    }
    out.fpc.validate();
    return out;
}

inline Json fpc_config_to_json(const FpcExperimentConfig& cfg) {
    Json j;
    j["N"] = cfg.fpc.N;
    j["k"] = cfg.fpc.k;
    j["q"] = cfg.fpc.q;
    j["p0"] = cfg.fpc.p0;
    j["tau"] = cfg.fpc.tau;
    j["beta"] = cfg.fpc.beta;
    j["l"] = cfg.fpc.l;
    j["M"] = cfg.fpc.M;
    j["manaWeighting"] = cfg.fpc.manaWeighting;
    j["adversaryStrategy"] = to_string(cfg.fpc.adversaryStrategy);
    j["seed"] = cfg.fpc.seed;
    j["runs"] = cfg.runs;
    if (!cfg.sweep.N.empty() || !cfg.sweep.k.empty() || !cfg.sweep.q.empty()) {
        Json s = Json::object();
        if (!cfg.sweep.N.empty()) s["N"] = cfg.sweep.N;
        if (!cfg.sweep.k.empty()) s["k"] = cfg.sweep.k;
        if (!cfg.sweep.q.empty()) s["q"] = cfg.sweep.q;
        j["sweep"] = s;
    }
    if (!cfg.manaEndowments.empty()) j["manaEndowments"] = cfg.manaEndowments;
    return j;
}

inline ScenarioConfig scenario_config_from_json(const Json& j) {
    detail::require_object(j, "config");
    detail::reject_unknown_keys(j,
                                {"nodes", "issueRate", "issueRates", "duration", "eligibilityAge",
                                 "confirmationThreshold", "propagationDelay", "tipPoolTarget", "orphanAgeFactor",
                                 "manaHalfLife", "manaPledgeMode", "accessEndowments", "consensusEndowments",
                                 "pow", "scheduler", "genesis", "doubleSpendSchedule", "seed"},
                                "");
    ScenarioConfig out;
    out.nodes = detail::get_or(j, "nodes", out.nodes);
    out.issueRate = detail::get_or(j, "issueRate", out.issueRate);
    out.issueRates = detail::get_or(j, "issueRates", out.issueRates);
    out.duration = detail::get_or(j, "duration", out.duration);
    out.eligibilityAge = detail::get_or(j, "eligibilityAge", out.eligibilityAge);
    out.confirmationThreshold = detail::get_or(j, "confirmationThreshold", out.confirmationThreshold);
    out.propagationDelay = detail::get_or(j, "propagationDelay", out.propagationDelay);
    out.tipPoolTarget = detail::get_or(j, "tipPoolTarget", out.tipPoolTarget);
    out.orphanAgeFactor = detail::get_or(j, "orphanAgeFactor", out.orphanAgeFactor);
    out.manaHalfLife = detail::get_or(j, "manaHalfLife", out.manaHalfLife);
    if (j.contains("manaPledgeMode")) {
        std::string mode = j.at("manaPledgeMode").get<std::string>();
        if (mode != "transactionValue")
            throw ParseError("manaPledgeMode \"" + mode + "\" is not supported (only \"transactionValue\")");
        out.manaPledgeMode = PledgeMode::TransactionValue;
    }
    out.accessEndowments = detail::get_or(j, "accessEndowments", out.accessEndowments);
    out.consensusEndowments = detail::get_or(j, "consensusEndowments", out.consensusEndowments);
    if (j.contains("pow")) {
        const Json& p = j.at("pow");
        detail::require_object(p, "pow");
        detail::reject_unknown_keys(p, {"baseDifficulty", "gamma", "windowSeconds", "hashRate", "freeCount", "countMode"},
                                    "pow.");
        out.pow.baseDifficulty = detail::get_or(p, "baseDifficulty", out.pow.baseDifficulty);
        out.pow.gamma = detail::get_or(p, "gamma", out.pow.gamma);
        out.pow.windowSeconds = detail::get_or(p, "windowSeconds", out.pow.windowSeconds);
        out.pow.hashRate = detail::get_or(p, "hashRate", out.pow.hashRate);
        out.pow.freeCount = detail::get_or(p, "freeCount", out.pow.freeCount);
        if (p.contains("countMode")) {
            std::string mode = p.at("countMode").get<std::string>();
            if (mode == "attachments")
                out.pow.countMode = PowParams::CountMode::Attachments;
            else if (mode == "attempts")
                out.pow.countMode = PowParams::CountMode::Attempts;
            else
                throw ParseError("pow.countMode must be \"attachments\" or \"attempts\"");
        }
    }
    if (j.contains("scheduler")) {
        const Json& s = j.at("scheduler");
        detail::require_object(s, "scheduler");
        detail::reject_unknown_keys(s, {"budget"}, "scheduler.");
        out.schedulerBudget = detail::get_or(s, "budget", out.schedulerBudget);
    }
    if (j.contains("genesis")) {
        const Json& g = j.at("genesis");
        if (!g.is_array()) throw ParseError("genesis must be an array of {address, amount}");
        for (const auto& entry : g) {
            detail::require_object(entry, "genesis entry");
            detail::reject_unknown_keys(entry, {"address", "amount"}, "genesis[].");
            GenesisOutput out2;
            if (!entry.contains("amount")) throw ParseError("genesis entry is missing \"amount\"");
            out2.amount = entry.at("amount").get<std::uint64_t>();
            if (entry.contains("address"))
                out2.address = Address{digest_from_hex(entry.at("address").get<std::string>())};
            else
                out2.address = derived_address("genesis-address-" + std::to_string(out.genesis.size()));
            out.genesis.push_back(out2);
        }
    }
    if (j.contains("doubleSpendSchedule")) {
        const Json& d = j.at("doubleSpendSchedule");
        if (!d.is_array()) throw ParseError("doubleSpendSchedule must be an array");
        for (const auto& entry : d) {
            detail::require_object(entry, "doubleSpendSchedule entry");
            detail::reject_unknown_keys(entry, {"time", "outputIndex", "spenders"}, "doubleSpendSchedule[].");
            DoubleSpendEvent ev;
            ev.time = detail::get_or(entry, "time", 0.0);
            ev.outputIndex = detail::get_or<std::uint16_t>(entry, "outputIndex", 0);
            auto spenders = detail::get_or(entry, "spenders", std::vector<int>{});
            if (spenders.size() != 2) throw ParseError("doubleSpendSchedule spenders must list exactly two nodes");
            ev.spenderA = spenders[0];
            ev.spenderB = spenders[1];
            out.doubleSpends.push_back(ev);
        }
    }
    out.seed = detail::get_or<std::uint64_t>(j, "seed", out.seed);
    out.normalize();
    out.validate();
    return out;
}

inline Json scenario_config_to_json(const ScenarioConfig& cfg) {
    Json j;
    j["nodes"] = cfg.nodes;
    j["issueRate"] = cfg.issueRate;
    if (!cfg.issueRates.empty()) j["issueRates"] = cfg.issueRates;
    j["duration"] = cfg.duration;
    j["eligibilityAge"] = cfg.eligibilityAge;
    j["confirmationThreshold"] = cfg.confirmationThreshold;
    j["propagationDelay"] = cfg.propagationDelay;
    j["tipPoolTarget"] = cfg.tipPoolTarget;
    j["orphanAgeFactor"] = cfg.orphanAgeFactor;
    j["manaHalfLife"] = cfg.manaHalfLife;
    j["manaPledgeMode"] = "transactionValue";
    j["accessEndowments"] = cfg.accessEndowments;
    j["consensusEndowments"] = cfg.consensusEndowments;
    j["pow"] = {{"baseDifficulty", cfg.pow.baseDifficulty},
                {"gamma", cfg.pow.gamma},
                {"windowSeconds", cfg.pow.windowSeconds},
                {"hashRate", cfg.pow.hashRate},
                {"freeCount", cfg.pow.freeCount},
                {"countMode", cfg.pow.countMode == PowParams::CountMode::Attempts ? "attempts" : "attachments"}};
    j["scheduler"] = {{"budget", cfg.schedulerBudget}};
    Json genesis = Json::array();
    for (const auto& g : cfg.genesis) genesis.push_back({{"address", to_hex(g.address)}, {"amount", g.amount}});
    j["genesis"] = genesis;
    Json ds = Json::array();
    for (const auto& e : cfg.doubleSpends)
        ds.push_back({{"time", e.time}, {"outputIndex", e.outputIndex}, {"spenders", {e.spenderA, e.spenderB}}});
    j["doubleSpendSchedule"] = ds;
    j["seed"] = cfg.seed;
    return j;
}

// --set key=value overrides, dotted paths. Values parse as JSON literals
// where possible and fall back to strings.
inline void apply_override(Json& j, const std::string& dottedKey, const std::string& value) {
    Json parsed;
    try {
        parsed = Json::parse(value);
    } catch (const Json::exception&) {
        parsed = value;
    }
    Json* cursor = &j;
    std::size_t start = 0;
    for (;;) {
        std::size_t dot = dottedKey.find('.', start);
        std::string part = dottedKey.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ParseError("override key \"" + dottedKey + "\" has an empty path segment");
        if (dot == std::string::npos) {
            (*cursor)[part] = parsed;
            return;
        }
        cursor = &(*cursor)[part];
        start = dot + 1;
    }
}

inline Json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file \"" + path + "\"");
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw ParseError("config file \"" + path + "\": " + e.what());
    }
}

enum class ConfigKind { Fpc, Scenario };

// validate-config auto-detection: FPC configs carry N/k, scenarios carry
// nodes/duration.
inline ConfigKind detect_config_kind(const Json& j) {
    detail::require_object(j, "config");
    bool looksFpc = j.contains("N") || j.contains("k");
    bool looksScenario = j.contains("nodes") || j.contains("duration") || j.contains("genesis");
    if (looksFpc && !looksScenario) return ConfigKind::Fpc;
    if (looksScenario && !looksFpc) return ConfigKind::Scenario;
    throw ParseError("cannot tell FPC config (N, k, ...) from tangle scenario (nodes, duration, ...)");
}

}  // namespace tanglesim
