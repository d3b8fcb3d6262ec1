#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tanglesim {

using Bytes = std::vector<std::uint8_t>;
using Digest32 = std::array<std::uint8_t, 32>;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Framing violation while decoding a canonical encoding: truncation, bad
// variant tag, or a length field that disagrees with the actual bytes.
struct MalformedEncoding : Error {
    using Error::Error;
};

// A config or parameter constraint does not hold; the message names the
// offending key and constraint.
struct InvariantViolation : Error {
    using Error::Error;
};

// 32-byte identifier with a phantom tag so message ids, transaction ids,
// node ids and addresses cannot be mixed up.
template <class Tag>
struct Id32 {
    Digest32 bytes{};

    auto operator<=>(const Id32&) const = default;

    bool is_zero() const {
        for (auto b : bytes)
            if (b != 0) return false;
        return true;
    }
};

using MessageId = Id32<struct MessageIdTag>;
using TxId = Id32<struct TxIdTag>;
using NodeId = Id32<struct NodeIdTag>;
using Address = Id32<struct AddressTag>;
using BranchId = Id32<struct BranchIdTag>;

template <class Tag>
std::size_t id_hash(const Id32<Tag>& id) {
    // Ids are already uniform digests; the first eight bytes suffice.
    std::uint64_t h;
    std::memcpy(&h, id.bytes.data(), sizeof(h));
    return static_cast<std::size_t>(h);
}

inline std::string to_hex(std::span<const std::uint8_t> data) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(data.size() * 2);
    for (auto b : data) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0x0f]);
    }
    return out;
}

template <class Tag>
std::string to_hex(const Id32<Tag>& id) {
    return to_hex(std::span<const std::uint8_t>(id.bytes));
}

inline int hex_nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

inline Bytes from_hex(const std::string& s) {
    if (s.size() % 2 != 0) throw Error("hex string has odd length");
    Bytes out;
    out.reserve(s.size() / 2);
    for (std::size_t i = 0; i < s.size(); i += 2) {
        int hi = hex_nibble(s[i]);
        int lo = hex_nibble(s[i + 1]);
        if (hi < 0 || lo < 0) throw Error("invalid hex digit in \"" + s + "\"");
        out.push_back(static_cast<std::uint8_t>(hi << 4 | lo));
    }
    return out;
}

inline Digest32 digest_from_hex(const std::string& s) {
    Bytes raw = from_hex(s);
    if (raw.size() != 32) throw Error("expected 32-byte hex digest, got " + std::to_string(raw.size()) + " bytes");
    Digest32 d;
    std::memcpy(d.data(), raw.data(), 32);
    return d;
}

// Little-endian fixed-width writer for the canonical encodings.
class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) {
        buf_.push_back(static_cast<std::uint8_t>(v));
        buf_.push_back(static_cast<std::uint8_t>(v >> 8));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void raw(std::span<const std::uint8_t> data) { buf_.insert(buf_.end(), data.begin(), data.end()); }
    template <class Tag>
    void id(const Id32<Tag>& v) {
        raw(std::span<const std::uint8_t>(v.bytes));
    }

    const Bytes& bytes() const { return buf_; }
    Bytes take() { return std::move(buf_); }
    std::size_t size() const { return buf_.size(); }

private:
    Bytes buf_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

    std::uint8_t u8() { return take(1)[0]; }
    std::uint16_t u16() {
        auto b = take(2);
        return static_cast<std::uint16_t>(b[0] | b[1] << 8);
    }
    std::uint32_t u32() {
        auto b = take(4);
        return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
               static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
    }
    std::uint64_t u64() {
        auto b = take(8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = v << 8 | b[i];
        return v;
    }
    Bytes raw(std::size_t n) {
        auto b = take(n);
        return Bytes(b.begin(), b.end());
    }
    template <class Tag>
    Id32<Tag> id() {
        auto b = take(32);
        Id32<Tag> out;
        std::memcpy(out.bytes.data(), b.data(), 32);
        return out;
    }

    std::size_t remaining() const { return data_.size() - pos_; }
    bool done() const { return remaining() == 0; }

private:
    std::span<const std::uint8_t> take(std::size_t n) {
        if (remaining() < n) throw MalformedEncoding("truncated encoding");
        auto out = data_.subspan(pos_, n);
        pos_ += n;
        return out;
    }

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

}  // namespace tanglesim

template <class Tag>
struct std::hash<tanglesim::Id32<Tag>> {
    std::size_t operator()(const tanglesim::Id32<Tag>& id) const { return tanglesim::id_hash(id); }
};
