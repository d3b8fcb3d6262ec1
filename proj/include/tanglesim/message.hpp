#pragma once

#include <cmath>
#include <optional>
#include <variant>

#include "tanglesim/bytes.hpp"
#include "tanglesim/hash.hpp"
#include "tanglesim/transaction.hpp"

namespace tanglesim {

inline constexpr std::uint8_t kProtocolVersion = 1;
inline constexpr std::size_t kMinParents = 2;
inline constexpr std::size_t kMaxParents = 8;
inline constexpr double kDefaultTimestampWindow = 30.0;  // sim-seconds

struct ParentCountOutOfRange : Error {
    using Error::Error;
};
struct DuplicateParent : Error {
    using Error::Error;
};

struct DataPayload {
    Bytes bytes;
    bool operator==(const DataPayload&) const = default;
};

struct ValueTxPayload {
    Transaction tx;
    bool operator==(const ValueTxPayload&) const = default;
};

struct CustomPayload {
    std::uint32_t applicationTag = 0;
    Bytes bytes;
    bool operator==(const CustomPayload&) const = default;
};

using Payload = std::variant<DataPayload, ValueTxPayload, CustomPayload>;

enum class PayloadTag : std::uint8_t { Data = 0, ValueTx = 1, Custom = 2 };

inline PayloadTag payload_tag(const Payload& p) {
    return static_cast<PayloadTag>(p.index());
}

// Atomic data unit: header (version, parents, issuer, timestamp, nonce),
// payload variant, 64-byte authenticator over header plus payload.
struct Message {
    std::uint8_t version = kProtocolVersion;
    std::vector<MessageId> parents;  // 2..8, distinct
    NodeId issuer;
    std::uint64_t timestampMicros = 0;
    std::uint64_t nonce = 0;
    Payload payload = DataPayload{};
    std::array<std::uint8_t, 64> signature{};

    bool operator==(const Message&) const = default;

    double timestamp_seconds() const { return static_cast<double>(timestampMicros) * 1e-6; }
};

inline std::uint64_t seconds_to_micros(double seconds) {
    return static_cast<std::uint64_t>(std::llround(seconds * 1e6));
}

inline void check_parents(const std::vector<MessageId>& parents) {
    if (parents.size() < kMinParents || parents.size() > kMaxParents)
        throw ParentCountOutOfRange("parent count " + std::to_string(parents.size()) + " outside [2, 8]");
    for (std::size_t i = 0; i < parents.size(); ++i)
        for (std::size_t j = i + 1; j < parents.size(); ++j)
            if (parents[i] == parents[j]) throw DuplicateParent("duplicate parent " + to_hex(parents[i]));
}

inline void encode_payload_body(ByteWriter& w, const Payload& payload) {
    if (const auto* data = std::get_if<DataPayload>(&payload)) {
        w.raw(data->bytes);
    } else if (const auto* value = std::get_if<ValueTxPayload>(&payload)) {
        encode_transaction(w, value->tx);
    } else {
        const auto& custom = std::get<CustomPayload>(payload);
        w.u32(custom.applicationTag);
        w.raw(custom.bytes);
    }
}

// Canonical layout, little-endian fixed widths:
//   version(1) parentCount(1) parents(32 each) issuerId(32)
//   timestampMicros(8) nonce(8) payloadTag(1) payloadLen(4) payload sig(64)
// A minimal two-parent Data message is exactly 183 bytes.
inline Bytes encode(const Message& m) {
    // framing needs only the count bound; distinctness is validate()'s job
    if (m.parents.size() < kMinParents || m.parents.size() > kMaxParents)
        throw ParentCountOutOfRange("parent count " + std::to_string(m.parents.size()) + " outside [2, 8]");
    ByteWriter w;
    w.u8(m.version);
    w.u8(static_cast<std::uint8_t>(m.parents.size()));
    for (const auto& p : m.parents) w.id(p);
    w.id(m.issuer);
    w.u64(m.timestampMicros);
    w.u64(m.nonce);
    ByteWriter body;
    encode_payload_body(body, m.payload);
    w.u8(static_cast<std::uint8_t>(payload_tag(m.payload)));
    w.u32(static_cast<std::uint32_t>(body.size()));
    w.raw(body.bytes());
    w.raw(m.signature);
    return w.take();
}

inline std::size_t header_length(std::size_t parentCount) {
    return 1 + 1 + 32 * parentCount + 32 + 8 + 8;
}

inline Message decode(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    Message m;
    m.version = r.u8();
    std::uint8_t parentCount = r.u8();
    if (parentCount < kMinParents || parentCount > kMaxParents)
        throw MalformedEncoding("parent count " + std::to_string(parentCount) + " outside [2, 8]");
    m.parents.reserve(parentCount);
    for (std::uint8_t i = 0; i < parentCount; ++i) m.parents.push_back(r.id<MessageIdTag>());
    m.issuer = r.id<NodeIdTag>();
    m.timestampMicros = r.u64();
    m.nonce = r.u64();
    std::uint8_t tag = r.u8();
    std::uint32_t payloadLen = r.u32();
    Bytes body = r.raw(payloadLen);
    switch (static_cast<PayloadTag>(tag)) {
        case PayloadTag::Data:
            m.payload = DataPayload{std::move(body)};
            break;
        case PayloadTag::ValueTx: {
            ByteReader br(body);
            m.payload = ValueTxPayload{decode_transaction(br)};
            if (!br.done()) throw MalformedEncoding("payload length exceeds encoded transaction");
            break;
        }
        case PayloadTag::Custom: {
            if (payloadLen < 4) throw MalformedEncoding("custom payload shorter than its tag field");
            ByteReader br(body);
            CustomPayload custom;
            custom.applicationTag = br.u32();
            custom.bytes = br.raw(payloadLen - 4);
            m.payload = std::move(custom);
            break;
        }
        default:
            throw MalformedEncoding("unknown payload tag " + std::to_string(tag));
    }
    auto sig = r.raw(64);
    std::copy(sig.begin(), sig.end(), m.signature.begin());
    if (!r.done()) throw MalformedEncoding("trailing bytes after signature");
    return m;
}

// Header plus payload; what the stub signature covers.
inline Bytes body_bytes(const Message& m) {
    Bytes full = encode(m);
    full.resize(full.size() - 64);
    return full;
}

// Structural signing stub: contentHash(issuerId || body) repeated to 64
// bytes. Scope matches the real scheme (entire message, payload included);
// strength does not.
inline std::array<std::uint8_t, 64> sign_stub(const NodeId& issuer, std::span<const std::uint8_t> body) {
    Digest32 h = Hasher().update(issuer).update(body).final();
    std::array<std::uint8_t, 64> sig;
    std::copy(h.begin(), h.end(), sig.begin());
    std::copy(h.begin(), h.end(), sig.begin() + 32);
    return sig;
}

inline bool verify_signature(const Message& m) {
    return m.signature == sign_stub(m.issuer, body_bytes(m));
}

inline Message build_and_sign(const NodeId& issuer, std::vector<MessageId> parents, Payload payload,
                              std::uint64_t timestampMicros, std::uint64_t nonce) {
    check_parents(parents);
    Message m;
    m.parents = std::move(parents);
    m.issuer = issuer;
    m.timestampMicros = timestampMicros;
    m.nonce = nonce;
    m.payload = std::move(payload);
    m.signature = sign_stub(issuer, body_bytes(m));
    return m;
}

inline MessageId message_id(const Message& m) {
    return MessageId{content_hash(encode(m))};
}

// PoW digest: hash of the encoded header (which ends with the nonce).
inline Digest32 pow_digest(const Message& m) {
    Bytes full = encode(m);
    return content_hash(std::span<const std::uint8_t>(full.data(), header_length(m.parents.size())));
}

// Brute-force nonce search. Returns the found nonce; the caller re-signs.
inline std::uint64_t find_nonce(const Message& m, int difficulty, std::uint64_t startNonce = 0,
                                std::uint64_t* attemptsOut = nullptr) {
    Bytes full = encode(m);
    std::size_t headerLen = header_length(m.parents.size());
    std::span<std::uint8_t> header(full.data(), headerLen);
    std::uint64_t attempts = 0;
    for (std::uint64_t nonce = startNonce;; ++nonce) {
        for (int i = 0; i < 8; ++i) header[headerLen - 8 + i] = static_cast<std::uint8_t>(nonce >> (8 * i));
        ++attempts;
        if (leading_zero_bits(content_hash(std::span<const std::uint8_t>(header))) >= difficulty) {
            if (attemptsOut) *attemptsOut = attempts;
            return nonce;
        }
    }
}

enum class ValidationResult : std::uint8_t {
    Ok,
    BadVersion,
    ParentCountOutOfRange,
    DuplicateParent,
    SelfParent,
    BadSignature,
    InsufficientPow,
    TimestampOutOfWindow,
};

inline const char* to_string(ValidationResult r) {
    switch (r) {
        case ValidationResult::Ok: return "ok";
        case ValidationResult::BadVersion: return "bad-version";
        case ValidationResult::ParentCountOutOfRange: return "parent-count-out-of-range";
        case ValidationResult::DuplicateParent: return "duplicate-parent";
        case ValidationResult::SelfParent: return "self-parent";
        case ValidationResult::BadSignature: return "bad-signature";
        case ValidationResult::InsufficientPow: return "insufficient-pow";
        case ValidationResult::TimestampOutOfWindow: return "timestamp-out-of-window";
    }
    return "?";
}

// Checks run in order: structure, signature, PoW, timestamp plausibility.
// The verdict is the first failed check.
inline ValidationResult validate(const Message& m, double nowSeconds, int difficulty,
                                 double timestampWindow = kDefaultTimestampWindow) {
    if (m.version != kProtocolVersion) return ValidationResult::BadVersion;
    if (m.parents.size() < kMinParents || m.parents.size() > kMaxParents)
        return ValidationResult::ParentCountOutOfRange;
    for (std::size_t i = 0; i < m.parents.size(); ++i)
        for (std::size_t j = i + 1; j < m.parents.size(); ++j)
            if (m.parents[i] == m.parents[j]) return ValidationResult::DuplicateParent;
    MessageId self = message_id(m);
    for (const auto& p : m.parents)
        if (p == self) return ValidationResult::SelfParent;
    if (!verify_signature(m)) return ValidationResult::BadSignature;
    if (leading_zero_bits(pow_digest(m)) < difficulty) return ValidationResult::InsufficientPow;
    if (std::abs(m.timestamp_seconds() - nowSeconds) > timestampWindow)
        return ValidationResult::TimestampOutOfWindow;
    return ValidationResult::Ok;
}

}  // namespace tanglesim
