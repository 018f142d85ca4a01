// Copyright 2026 The Commute Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "commute/host.hpp"

namespace commute::contracts {

// Locks and linear constraints built from the nonnegative-integer type.
// An exclusive acquire is set_add(1, -1): at most one per block per key.
// A shared acquire is set_add(0, 0): compatible with itself, conflicting
// with any exclusive through the base mismatch.
class Locks : public Program {
  public:
    static constexpr uint8_t kAcquireExclusive = 1;
    static constexpr uint8_t kAcquireShared = 2;
    static constexpr uint8_t kConstraintUpdate = 3;

    static ContractId id() { return hash32("contract:locks"); }

    void run(HostContext& host, uint8_t method, BytesView input) override
    {
        ByteReader r(input);
        switch (method) {
        case kAcquireExclusive:
            host.int64_set_add(r.hash32(), 1, -1);
            break;
        case kAcquireShared:
            host.int64_set_add(r.hash32(), 0, 0);
            break;
        case kConstraintUpdate: {
            // Caller supplies the recomputed slack and its own adjustment.
            LocalKey key = r.hash32();
            int64_t base = r.i64be();
            int64_t delta = r.i64be();
            host.int64_set_add(key, base, delta);
            break;
        }
        default:
            host.abort_program("unknown locks method");
        }
    }

    static Bytes key_input(const LocalKey& key)
    {
        return Bytes(key.begin(), key.end());
    }

    static Bytes constraint_input(const LocalKey& key, int64_t base, int64_t delta)
    {
        Bytes b(key.begin(), key.end());
        put_i64be(b, base);
        put_i64be(b, delta);
        return b;
    }
};

/// Slack of a linear constraint sum(a_i * x_i) >= c.
inline int64_t constraint_slack(std::span<const int64_t> coeffs, std::span<const int64_t> xs,
                                int64_t c)
{
    __int128 acc = 0;
    for (size_t i = 0; i < coeffs.size(); ++i)
        acc += __int128(coeffs[i]) * xs[i];
    return int64_t(acc - c);
}

/// Adjustment emitted when variable j moves from xs[j] to new_value.
inline int64_t constraint_adjustment(std::span<const int64_t> coeffs,
                                     std::span<const int64_t> xs, size_t j, int64_t new_value)
{
    return int64_t(__int128(coeffs[j]) * (__int128(new_value) - xs[j]));
}

}  // namespace commute::contracts
