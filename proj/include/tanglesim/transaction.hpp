#pragma once

#include "tanglesim/bytes.hpp"
#include "tanglesim/hash.hpp"

namespace tanglesim {

// Reference to the index-th output of an earlier transaction.
struct OutputRef {
    TxId txId;
    std::uint16_t index = 0;

    auto operator<=>(const OutputRef&) const = default;
};

struct TxOutput {
    Address address;
    std::uint64_t amount = 0;

    bool operator==(const TxOutput&) const = default;
};

// Feeless value transfer. Moved tokens also pledge access and consensus
// mana to the named nodes.
struct Transaction {
    std::vector<OutputRef> inputs;
    std::vector<TxOutput> outputs;
    NodeId accessPledge;
    NodeId consensusPledge;

    bool operator==(const Transaction&) const = default;

    std::uint64_t total_output_amount() const {
        std::uint64_t sum = 0;
        for (const auto& out : outputs) sum += out.amount;
        return sum;
    }
};

// Canonical layout: inputCount(2) inputs(34 each) outputCount(2)
// outputs(40 each) accessPledge(32) consensusPledge(32), little-endian.
inline void encode_transaction(ByteWriter& w, const Transaction& tx) {
    w.u16(static_cast<std::uint16_t>(tx.inputs.size()));
    for (const auto& in : tx.inputs) {
        w.id(in.txId);
        w.u16(in.index);
    }
    w.u16(static_cast<std::uint16_t>(tx.outputs.size()));
    for (const auto& out : tx.outputs) {
        w.id(out.address);
        w.u64(out.amount);
    }
    w.id(tx.accessPledge);
    w.id(tx.consensusPledge);
}

inline Bytes encode_transaction(const Transaction& tx) {
    ByteWriter w;
    encode_transaction(w, tx);
    return w.take();
}

inline Transaction decode_transaction(ByteReader& r) {
    Transaction tx;
    std::uint16_t inputs = r.u16();
    tx.inputs.reserve(inputs);
    for (std::uint16_t i = 0; i < inputs; ++i) {
        OutputRef ref;
        ref.txId = r.id<TxIdTag>();
        ref.index = r.u16();
        tx.inputs.push_back(ref);
    }
    std::uint16_t outputs = r.u16();
    tx.outputs.reserve(outputs);
    for (std::uint16_t i = 0; i < outputs; ++i) {
        TxOutput out;
        out.address = r.id<AddressTag>();
        out.amount = r.u64();
        tx.outputs.push_back(out);
    }
    tx.accessPledge = r.id<NodeIdTag>();
    tx.consensusPledge = r.id<NodeIdTag>();
    return tx;
}

inline TxId tx_id(const Transaction& tx) {
    return TxId{content_hash(encode_transaction(tx))};
}

}  // namespace tanglesim

template <>
struct std::hash<tanglesim::OutputRef> {
    std::size_t operator()(const tanglesim::OutputRef& ref) const {
        return tanglesim::id_hash(ref.txId) * 0x9e3779b97f4a7c15ULL + ref.index;
    }
};
