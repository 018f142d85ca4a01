// Copyright 2026 The Commute Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <cstring>
#include <functional>

#include "commute/bytes.hpp"
#include "commute/crypto.hpp"

namespace commute {

using ContractId = std::array<uint8_t, 32>;
using LocalKey = std::array<uint8_t, 32>;

/// 64-byte storage key: contract id followed by a contract-local key.
/// Ordered lexicographically over the full 64 bytes.
struct Address {
    ContractId contract{};
    LocalKey local{};

    auto operator<=>(const Address&) const = default;

    std::array<uint8_t, 64> bytes() const
    {
        std::array<uint8_t, 64> out;
        std::memcpy(out.data(), contract.data(), 32);
        std::memcpy(out.data() + 32, local.data(), 32);
        return out;
    }

    static Address from_bytes(BytesView b)
    {
        Address a;
        std::memcpy(a.contract.data(), b.data(), 32);
        std::memcpy(a.local.data(), b.data() + 32, 32);
        return a;
    }
};

struct AddressHash {
    size_t operator()(const Address& a) const
    {
        // Addresses are mostly hash-derived already; fold a few words.
        uint64_t x = 0;
        for (int i = 0; i < 4; ++i)
            x ^= get_u64be(a.contract.data() + 8 * i) * 0x9e3779b97f4a7c15ULL;
        for (int i = 0; i < 4; ++i)
            x ^= get_u64be(a.local.data() + 8 * i) * 0xc2b2ae3d27d4eb4fULL;
        x ^= x >> 29;
        return size_t(x);
    }
};

}  // namespace commute
