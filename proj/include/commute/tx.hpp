// Copyright 2026 The Commute Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>

#include "commute/address.hpp"
#include "commute/crypto.hpp"

namespace commute {

struct TxMetadata {
    PublicKey sender_pubkey{};
    Signature signature{};
    uint64_t expiration = 0;
    uint64_t fee = 0;
    uint64_t nonce = 0;

    bool operator==(const TxMetadata&) const = default;
};

/// One function call on a contract. The canonical encoding is the signed
/// and hashed form; identical encodings have identical hashes.
struct TransactionRecord {
    ContractId contract{};
    uint8_t method = 0;
    Bytes input;
    TxMetadata meta;

    bool operator==(const TransactionRecord&) const = default;

    /// Everything the sender signs: the canonical encoding minus signature.
    Bytes signable() const
    {
        Bytes out;
        out.insert(out.end(), contract.begin(), contract.end());
        out.push_back(method);
        put_u32be(out, uint32_t(input.size()));
        out.insert(out.end(), input.begin(), input.end());
        out.insert(out.end(), meta.sender_pubkey.begin(), meta.sender_pubkey.end());
        put_u64be(out, meta.expiration);
        put_u64be(out, meta.fee);
        put_u64be(out, meta.nonce);
        return out;
    }

    Bytes encode() const
    {
        Bytes out = signable();
        out.insert(out.end(), meta.signature.begin(), meta.signature.end());
        return out;
    }

    Hash32 hash() const { return hash32(encode()); }

    void sign(const SecretKey& sk) { meta.signature = commute::sign(signable(), sk); }

    static TransactionRecord decode(BytesView data)
    {
        ByteReader r(data);
        TransactionRecord tx;
        tx.contract = r.hash32();
        tx.method = r.u8();
        uint32_t len = r.u32be();
        auto in = r.bytes(len);
        tx.input.assign(in.begin(), in.end());
        tx.meta.sender_pubkey = r.hash32();
        tx.meta.expiration = r.u64be();
        tx.meta.fee = r.u64be();
        tx.meta.nonce = r.u64be();
        auto sig = r.bytes(tx.meta.signature.size());
        std::copy(sig.begin(), sig.end(), tx.meta.signature.begin());
        if (!r.done())
            throw std::invalid_argument("trailing bytes in transaction encoding");
        return tx;
    }
};

/// An unordered multiset of transactions applied atomically between two
/// snapshots, plus the resulting commitments.
struct Block {
    uint64_t number = 0;
    std::vector<TransactionRecord> transactions;
    Hash32 state_root{};
    Hash32 modification_root{};
    Hash32 tx_root{};

    /// Canonical encoding: block number, transaction count, transactions
    /// sorted by hash (making the multiset encoding canonical), roots.
    Bytes encode() const
    {
        return encode_parts(number, transactions, state_root, modification_root, tx_root);
    }

    static Bytes encode_parts(uint64_t number, std::span<const TransactionRecord> transactions,
                              const Hash32& state_root, const Hash32& modification_root,
                              const Hash32& tx_root)
    {
        std::vector<std::pair<Hash32, Bytes>> encoded;
        encoded.reserve(transactions.size());
        for (const auto& tx : transactions) {
            Bytes e = tx.encode();
            encoded.emplace_back(hash32(e), std::move(e));
        }
        std::sort(encoded.begin(), encoded.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        Bytes out;
        put_u64be(out, number);
        put_u32be(out, uint32_t(encoded.size()));
        for (const auto& [h, e] : encoded) {
            put_u32be(out, uint32_t(e.size()));
            out.insert(out.end(), e.begin(), e.end());
        }
        out.insert(out.end(), state_root.begin(), state_root.end());
        out.insert(out.end(), modification_root.begin(), modification_root.end());
        out.insert(out.end(), tx_root.begin(), tx_root.end());
        return out;
    }

    static Block decode(BytesView data)
    {
        ByteReader r(data);
        Block b;
        b.number = r.u64be();
        uint32_t count = r.u32be();
        b.transactions.reserve(count);
        for (uint32_t i = 0; i < count; ++i) {
            uint32_t len = r.u32be();
            b.transactions.push_back(TransactionRecord::decode(r.bytes(len)));
        }
        b.state_root = r.hash32();
        b.modification_root = r.hash32();
        b.tx_root = r.hash32();
        if (!r.done())
            throw std::invalid_argument("trailing bytes in block encoding");
        return b;
    }
};

}  // namespace commute
