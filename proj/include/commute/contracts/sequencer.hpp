// Copyright 2026 The Commute Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "commute/contracts/token.hpp"

namespace commute::contracts {

// Sequencer pattern: transactions submit actions into the current block's
// ordered set; in a later block one transaction loads the set and applies
// every action, highest fee first (ties by hash, ascending). Funds and fees
// are escrowed at submission, so applying an action can never conflict.
class Sequencer : public Program {
  public:
    static constexpr uint8_t kSetup = 1;
    static constexpr uint8_t kSubmit = 2;
    static constexpr uint8_t kExec = 3;

    using AccountId = std::array<uint8_t, 32>;

    static ContractId id() { return hash32("contract:sequencer"); }

    static LocalKey config_key() { return hash32("seq:cfg"); }

    static LocalKey round_key(uint64_t round)
    {
        Bytes b;
        put_u64be(b, round);
        return hash32({to_bytes("seq:round"), BytesView(b)});
    }

    static LocalKey semaphore_key(uint64_t round)
    {
        Bytes b;
        put_u64be(b, round);
        return hash32({to_bytes("seq:sem"), BytesView(b)});
    }

    void run(HostContext& host, uint8_t method, BytesView input) override
    {
        ByteReader r(input);
        switch (method) {
        case kSetup: {
            if (input.size() != 32)
                host.abort_program("bad sequencer config");
            host.string_set(config_key(), Bytes(input.begin(), input.end()));
            break;
        }
        case kSubmit: {
            auto submitter = r.hash32();
            uint64_t fee = r.u64be();
            auto target = r.hash32();
            uint64_t amount = r.u64be();
            ContractId token = token_contract(host);

            // Escrow the fee and the transferred amount now; applying the
            // action later must not be able to fail.
            host.call(token, Token::kTransferFrom,
                      Token::transfer_from_input(submitter, host.get_self_address(),
                                                 int64_t(fee + amount)));

            uint64_t round = host.get_block_number();
            Bytes action;
            action.insert(action.end(), target.begin(), target.end());
            put_u64be(action, amount);
            Hash32 h = hash32({BytesView(action), BytesView(host.tx_hash().data(), 32)});
            host.set_insert(round_key(round), fee, h);
            host.string_set(LocalKey(h), std::move(action));
            break;
        }
        case kExec: {
            uint64_t round = r.u64be();
            auto executor = r.hash32();
            if (round >= host.get_block_number())
                host.abort_program("round not yet closed");
            ContractId token = token_contract(host);
            host.int64_set_add(semaphore_key(round), 1, -1);

            OrderedSet actions = host.set_get(round_key(round));
            uint64_t fees = 0;
            // Descending fee, ascending hash within a fee: walk tag groups
            // from the back, forward within each group.
            size_t end = actions.elements.size();
            while (end > 0) {
                size_t begin = end;
                uint64_t fee = actions.elements[end - 1].tag;
                while (begin > 0 && actions.elements[begin - 1].tag == fee)
                    --begin;
                for (size_t i = begin; i < end; ++i)
                    fees += dispatch(host, token, actions.elements[i]);
                end = begin;
            }
            if (fees > 0)
                host.call(token, Token::kTransfer,
                          Token::transfer_input(executor, int64_t(fees)));
            host.delete_value(round_key(round));
            break;
        }
        default:
            host.abort_program("unknown sequencer method");
        }
    }

    static Bytes setup_input(const ContractId& token)
    {
        return Bytes(token.begin(), token.end());
    }

    static Bytes submit_input(const AccountId& submitter, uint64_t fee, const AccountId& target,
                              uint64_t amount)
    {
        Bytes b;
        b.insert(b.end(), submitter.begin(), submitter.end());
        put_u64be(b, fee);
        b.insert(b.end(), target.begin(), target.end());
        put_u64be(b, amount);
        return b;
    }

    static Bytes exec_input(uint64_t round, const AccountId& executor)
    {
        Bytes b;
        put_u64be(b, round);
        b.insert(b.end(), executor.begin(), executor.end());
        return b;
    }

  private:
    uint64_t dispatch(HostContext& host, const ContractId& token, const SetElement& e)
    {
        Bytes action = host.string_get(LocalKey(e.hash));
        if (action.size() != 40)
            host.abort_program("missing action record");
        AccountId target;
        std::copy(action.begin(), action.begin() + 32, target.begin());
        uint64_t amount = get_u64be(action.data() + 32);
        if (amount > 0)
            host.call(token, Token::kTransfer, Token::transfer_input(target, int64_t(amount)));
        host.delete_value(LocalKey(e.hash));
        return e.tag;
    }

    static ContractId token_contract(HostContext& host)
    {
        Bytes cfg = host.string_get(config_key());
        if (cfg.size() != 32)
            host.abort_program("sequencer not configured");
        ContractId token;
        std::copy(cfg.begin(), cfg.end(), token.begin());
        return token;
    }
};

}  // namespace commute::contracts
