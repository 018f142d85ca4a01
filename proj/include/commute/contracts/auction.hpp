// Copyright 2026 The Commute Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "commute/contracts/token.hpp"

namespace commute::contracts {

// Second-price auction over an ordered set of bids. Bids escrow their price
// on submission; the set keeps them sorted, so settlement reads the top two
// elements. A refund set prevents paying a losing bid back twice.
class Auction : public Program {
  public:
    static constexpr uint8_t kSetup = 1;
    static constexpr uint8_t kBid = 2;
    static constexpr uint8_t kSettle = 3;
    static constexpr uint8_t kRefund = 4;

    // When the bid set is this close to its limit, a new bid must match the
    // current second-highest price to displace anything worth keeping.
    static constexpr uint32_t kNearCapacityMargin = 8;

    using AccountId = std::array<uint8_t, 32>;

    static ContractId id() { return hash32("contract:auction"); }

    static LocalKey config_key() { return hash32("auction:cfg"); }
    static LocalKey bids_key() { return hash32("auction:bids"); }
    static LocalKey refunds_key() { return hash32("auction:refunds"); }
    static LocalKey result_key() { return hash32("auction:result"); }
    static LocalKey settle_once_key() { return hash32("auction:settle-once"); }

    static Hash32 bid_hash(uint64_t price, const AccountId& bidder)
    {
        Bytes b;
        put_u64be(b, price);
        b.insert(b.end(), bidder.begin(), bidder.end());
        return hash32(b);
    }

    struct Config {
        uint64_t close_block = 0;
        AccountId beneficiary{};
        ContractId token{};
    };

    void run(HostContext& host, uint8_t method, BytesView input) override
    {
        ByteReader r(input);
        switch (method) {
        case kSetup: {
            Bytes cfg(input.begin(), input.end());
            if (cfg.size() != 8 + 32 + 32)
                host.abort_program("bad auction config");
            host.string_set(config_key(), std::move(cfg));
            break;
        }
        case kBid: {
            uint64_t price = r.u64be();
            auto bidder = r.hash32();
            Config cfg = config(host);
            if (host.get_block_number() >= cfg.close_block)
                host.abort_program("auction closed");
            OrderedSet bids = host.set_get(bids_key());
            if (bids.elements.size() >= bids.limit)
                host.abort_program("bid set full");
            if (bids.elements.size() + kNearCapacityMargin >= bids.limit &&
                price < second_highest(bids))
                host.abort_program("bid below second-highest near capacity");

            Hash32 h = bid_hash(price, bidder);
            host.call(cfg.token, Token::kTransferFrom,
                      Token::transfer_from_input(bidder, host.get_self_address(),
                                                 int64_t(price)));
            host.set_insert(bids_key(), price, h);
            Bytes record;
            put_u64be(record, price);
            record.insert(record.end(), bidder.begin(), bidder.end());
            host.string_set(LocalKey(h), std::move(record));
            break;
        }
        case kSettle: {
            Config cfg = config(host);
            if (host.get_block_number() < cfg.close_block)
                host.abort_program("auction still open");
            if (!host.string_get(result_key()).empty())
                host.abort_program("already settled");
            host.int64_set_add(settle_once_key(), 1, -1);  // one settle per block

            OrderedSet bids = host.set_get(bids_key());
            if (bids.elements.empty())
                host.abort_program("no bids");
            const SetElement& winner = bids.elements.back();
            uint64_t price =
                bids.elements.size() >= 2 ? bids.elements[bids.elements.size() - 2].tag : 0;

            Bytes record = host.string_get(LocalKey(winner.hash));
            if (record.size() != 40)
                host.abort_program("missing winner record");
            AccountId winner_bidder;
            std::copy(record.begin() + 8, record.end(), winner_bidder.begin());

            host.call(cfg.token, Token::kTransfer,
                      Token::transfer_input(cfg.beneficiary, int64_t(price)));
            uint64_t overbid = winner.tag - price;
            if (overbid > 0)
                host.call(cfg.token, Token::kTransfer,
                          Token::transfer_input(winner_bidder, int64_t(overbid)));

            Bytes result;
            result.insert(result.end(), winner.hash.begin(), winner.hash.end());
            put_u64be(result, price);
            host.string_set(result_key(), std::move(result));
            break;
        }
        case kRefund: {
            uint64_t price = r.u64be();
            auto bidder = r.hash32();
            Config cfg = config(host);
            Bytes result = host.string_get(result_key());
            if (result.size() != 40)
                host.abort_program("not settled");
            Hash32 h = bid_hash(price, bidder);
            if (std::equal(result.begin(), result.begin() + 32, h.begin()))
                host.abort_program("winning bid is not refundable");
            if (host.string_get(LocalKey(h)).empty())
                host.abort_program("no such bid");
            // Double refunds conflict on the hash.
            host.set_insert(refunds_key(), price, h);
            host.call(cfg.token, Token::kTransfer,
                      Token::transfer_input(bidder, int64_t(price)));
            break;
        }
        default:
            host.abort_program("unknown auction method");
        }
    }

    static Bytes setup_input(uint64_t close_block, const AccountId& beneficiary,
                             const ContractId& token)
    {
        Bytes b;
        put_u64be(b, close_block);
        b.insert(b.end(), beneficiary.begin(), beneficiary.end());
        b.insert(b.end(), token.begin(), token.end());
        return b;
    }

    static Bytes bid_input(uint64_t price, const AccountId& bidder)
    {
        Bytes b;
        put_u64be(b, price);
        b.insert(b.end(), bidder.begin(), bidder.end());
        return b;
    }

    static Bytes refund_input(uint64_t price, const AccountId& bidder)
    {
        return bid_input(price, bidder);
    }

  private:
    static Config config(HostContext& host)
    {
        Bytes cfg = host.string_get(config_key());
        if (cfg.size() != 72)
            host.abort_program("auction not configured");
        Config out;
        out.close_block = get_u64be(cfg.data());
        std::copy(cfg.begin() + 8, cfg.begin() + 40, out.beneficiary.begin());
        std::copy(cfg.begin() + 40, cfg.end(), out.token.begin());
        return out;
    }

    static uint64_t second_highest(const OrderedSet& bids)
    {
        if (bids.elements.size() < 2)
            return 0;
        return bids.elements[bids.elements.size() - 2].tag;
    }
};

}  // namespace commute::contracts
