// Copyright 2026 The Commute Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "commute/host.hpp"

namespace commute::contracts {

// Fungible token. Balances are nonnegative integers keyed by 32-byte
// account ids (contracts hold balances under their contract id). Spending
// someone else's balance consumes an allowance granted to the calling
// contract; approvals move by deltas, never absolute writes.
class Token : public Program {
  public:
    static constexpr uint8_t kTransferFrom = 1;
    static constexpr uint8_t kAllowanceDelta = 2;
    static constexpr uint8_t kTransfer = 3;

    static ContractId id() { return hash32("contract:token"); }

    static LocalKey balance_key(const std::array<uint8_t, 32>& account)
    {
        return hash32({to_bytes("token:balance"), BytesView(account.data(), 32)});
    }

    static LocalKey allowance_key(const std::array<uint8_t, 32>& owner,
                                  const ContractId& spender)
    {
        return hash32(
            {to_bytes("token:allowance"), BytesView(owner.data(), 32), BytesView(spender.data(), 32)});
    }

    void run(HostContext& host, uint8_t method, BytesView input) override
    {
        ByteReader r(input);
        switch (method) {
        case kTransferFrom: {
            auto from = r.hash32();
            auto to = r.hash32();
            int64_t amount = r.i64be();
            if (amount < 0)
                host.abort_program("negative transfer amount");
            host.int64_add(allowance_key(from, host.get_caller_address()), -amount);
            host.int64_add(balance_key(from), -amount);
            host.int64_add(balance_key(to), amount);
            break;
        }
        case kAllowanceDelta: {
            // The authorizing account adjusts what the calling contract may
            // spend on its behalf; authentication happens in that caller.
            auto authorizing = r.hash32();
            int64_t amount = r.i64be();
            host.int64_add(allowance_key(authorizing, host.get_caller_address()), amount);
            break;
        }
        case kTransfer: {
            // A contract moving its own funds needs no allowance.
            auto to = r.hash32();
            int64_t amount = r.i64be();
            if (amount < 0)
                host.abort_program("negative transfer amount");
            host.int64_add(balance_key(host.get_caller_address()), -amount);
            host.int64_add(balance_key(to), amount);
            break;
        }
        default:
            host.abort_program("unknown token method");
        }
    }

    static Bytes transfer_from_input(const std::array<uint8_t, 32>& from,
                                     const std::array<uint8_t, 32>& to, int64_t amount)
    {
        Bytes b;
        b.insert(b.end(), from.begin(), from.end());
        b.insert(b.end(), to.begin(), to.end());
        put_i64be(b, amount);
        return b;
    }

    static Bytes allowance_delta_input(const std::array<uint8_t, 32>& authorizing,
                                       int64_t amount)
    {
        Bytes b;
        b.insert(b.end(), authorizing.begin(), authorizing.end());
        put_i64be(b, amount);
        return b;
    }

    static Bytes transfer_input(const std::array<uint8_t, 32>& to, int64_t amount)
    {
        Bytes b;
        b.insert(b.end(), to.begin(), to.end());
        put_i64be(b, amount);
        return b;
    }
};

}  // namespace commute::contracts
