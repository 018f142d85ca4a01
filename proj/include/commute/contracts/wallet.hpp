// Copyright 2026 The Commute Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "commute/contracts/token.hpp"

namespace commute::contracts {

// Entry contract for user transactions: checks the registered key and the
// transaction signature, records the transaction hash for replay
// prevention, then drives the token.
//
// Replay sets are sharded by expiration parity: the shard written at block
// b was fully cleared by block b-1's transactions, so its snapshot is empty
// and capacity never throttles admission, while a duplicate hash always
// lands in the same shard as the original.
class Wallet : public Program {
  public:
    static constexpr uint8_t kPay = 1;
    static constexpr uint8_t kAuthorize = 2;

    using AccountId = std::array<uint8_t, 32>;

    static ContractId id() { return hash32("contract:wallet"); }

    static LocalKey pubkey_key(const AccountId& account)
    {
        return hash32({to_bytes("wallet:pk"), BytesView(account.data(), 32)});
    }

    static LocalKey token_config_key() { return hash32("wallet:cfg:token"); }

    static LocalKey replay_shard_key(const AccountId& account, uint64_t parity)
    {
        Bytes p;
        put_u64be(p, parity & 1);
        return hash32({to_bytes("wallet:replay"), BytesView(account.data(), 32), BytesView(p)});
    }

    void run(HostContext& host, uint8_t method, BytesView input) override
    {
        ByteReader r(input);
        switch (method) {
        case kPay: {
            auto sender = r.hash32();
            auto receiver = r.hash32();
            int64_t amount = r.i64be();
            authenticate(host, sender);
            record_replay(host, sender);
            ContractId token = token_contract(host);
            host.call(token, Token::kTransferFrom,
                      Token::transfer_from_input(sender, receiver, amount));
            break;
        }
        case kAuthorize: {
            auto sender = r.hash32();
            int64_t amount = r.i64be();
            authenticate(host, sender);
            record_replay(host, sender);
            host.call(token_contract(host), Token::kAllowanceDelta,
                      Token::allowance_delta_input(sender, amount));
            break;
        }
        default:
            host.abort_program("unknown wallet method");
        }
    }

    static Bytes pay_input(const AccountId& sender, const AccountId& receiver, int64_t amount)
    {
        Bytes b;
        b.insert(b.end(), sender.begin(), sender.end());
        b.insert(b.end(), receiver.begin(), receiver.end());
        put_i64be(b, amount);
        return b;
    }

    static Bytes authorize_input(const AccountId& sender, int64_t amount)
    {
        Bytes b;
        b.insert(b.end(), sender.begin(), sender.end());
        put_i64be(b, amount);
        return b;
    }

  private:
    static void authenticate(HostContext& host, const AccountId& sender)
    {
        Bytes registered = host.string_get(pubkey_key(sender));
        if (registered.size() != 32)
            host.abort_program("unregistered account");
        const auto& pk = host.tx().meta.sender_pubkey;
        if (!std::equal(registered.begin(), registered.end(), pk.begin()))
            host.abort_program("wrong key for account");
        if (!host.check_signature(pk, host.tx().signable(), host.tx().meta.signature))
            host.abort_program("bad signature");
    }

    static void record_replay(HostContext& host, const AccountId& sender)
    {
        uint64_t expiration = host.tx().meta.expiration;
        uint64_t now = host.get_block_number();
        if (expiration < now)
            host.abort_program("transaction expired");
        host.set_insert(replay_shard_key(sender, expiration), expiration, host.tx_hash());
        // Prune the shard whose entries can only carry already-expired tags.
        host.set_clear(replay_shard_key(sender, now + 1), now);
    }

    static ContractId token_contract(HostContext& host)
    {
        Bytes cfg = host.string_get(token_config_key());
        if (cfg.size() != 32)
            host.abort_program("wallet not configured");
        ContractId token;
        std::copy(cfg.begin(), cfg.end(), token.begin());
        return token;
    }
};

}  // namespace commute::contracts
