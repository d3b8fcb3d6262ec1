#pragma once

#include <bit>
#include <initializer_list>

#include <sodium.h>

#include "tanglesim/bytes.hpp"

namespace tanglesim {

// Project-wide content hash: BLAKE2b-256. Every id (message, transaction,
// branch) derives from this; golden files pin the choice.
inline Digest32 content_hash(std::span<const std::uint8_t> data) {
    Digest32 out;
    static const std::uint8_t empty = 0;
    crypto_generichash(out.data(), out.size(), data.empty() ? &empty : data.data(), data.size(), nullptr, 0);
    return out;
}

inline Digest32 content_hash(const Bytes& data) {
    return content_hash(std::span<const std::uint8_t>(data));
}

// Streaming variant for hashing concatenations without copying.
class Hasher {
public:
    Hasher() { crypto_generichash_init(&state_, nullptr, 0, 32); }

    Hasher& update(std::span<const std::uint8_t> data) {
        if (!data.empty()) crypto_generichash_update(&state_, data.data(), data.size());
        return *this;
    }
    template <class Tag>
    Hasher& update(const Id32<Tag>& id) {
        return update(std::span<const std::uint8_t>(id.bytes));
    }

    Digest32 final() {
        Digest32 out;
        crypto_generichash_final(&state_, out.data(), out.size());
        return out;
    }

private:
    crypto_generichash_state state_;
};

inline int leading_zero_bits(const Digest32& digest) {
    int bits = 0;
    for (auto b : digest) {
        if (b == 0) {
            bits += 8;
            continue;
        }
        bits += std::countl_zero(b);
        break;
    }
    return bits;
}

}  // namespace tanglesim
