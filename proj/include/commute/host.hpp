// Copyright 2026 The Commute Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <memory>

#include "commute/delta.hpp"
#include "commute/trie.hpp"
#include "commute/tx.hpp"

namespace commute {

/// Thrown by contracts to abort the transaction. An aborted transaction
/// produces no deltas and is dropped before any reservation.
struct ProgramAbort : std::exception {
    std::string reason;
    explicit ProgramAbort(std::string r) : reason(std::move(r)) {}
    const char* what() const noexcept override { return reason.c_str(); }
};

class HostContext;

/// A registered deterministic program. Programs read the snapshot and buffer
/// typed deltas through the host; they never touch state directly.
struct Program {
    virtual ~Program() = default;
    virtual void run(HostContext& host, uint8_t method, BytesView input) = 0;
};

using Registry = std::map<ContractId, std::shared_ptr<Program>>;

/// Immutable view of the key-value store at the start of a block.
struct SnapshotView {
    const Trie* trie = nullptr;
    uint64_t block_number = 0;

    Value read(const Address& addr) const
    {
        const Bytes* leaf = trie->get(addr.bytes());
        return leaf ? deserialize_value(*leaf) : Value::absent();
    }
};

class HostContext {
  public:
    HostContext(const SnapshotView& snapshot, const Registry& registry,
                const TransactionRecord& tx, const Hash32& tx_hash)
        : snapshot_(snapshot), registry_(registry), tx_(tx), tx_hash_(tx_hash),
          self_(tx.contract)
    {
    }

    // Identity and environment.
    uint64_t get_block_number() const { return snapshot_.block_number; }
    const ContractId& get_self_address() const { return self_; }
    const ContractId& get_caller_address() const { return caller_; }
    const TransactionRecord& tx() const { return tx_; }
    const Hash32& tx_hash() const { return tx_hash_; }

    // Cryptographic primitives.
    Hash32 hash(BytesView data) const { return hash32(data); }
    bool check_signature(const PublicKey& pk, BytesView msg, const Signature& sig) const
    {
        return verify(msg, sig, pk);
    }

    [[noreturn]] void abort_program(std::string reason) const
    {
        throw ProgramAbort(std::move(reason));
    }

    // Storage accessors. Keys are local to the calling contract; all reads
    // observe the snapshot, all writes buffer deltas.

    Bytes string_get(const LocalKey& key)
    {
        const Bytes* leaf = read_leaf(key);
        if (!leaf)
            return {};
        if ((*leaf)[0] != uint8_t(ValueKind::Bytestring))
            abort_program("string_get on non-string value");
        return Bytes(leaf->begin() + 5, leaf->end());
    }

    void string_set(const LocalKey& key, Bytes payload)
    {
        buffer(key, StringSet{std::move(payload)});
    }

    int64_t int64_get(const LocalKey& key)
    {
        const Bytes* leaf = read_leaf(key);
        if (!leaf)
            return 0;
        if ((*leaf)[0] != uint8_t(ValueKind::NonnegInt64))
            abort_program("int64_get on non-integer value");
        return int64_t(get_u64be(leaf->data() + 1));
    }

    void int64_set_add(const LocalKey& key, int64_t base, int64_t delta)
    {
        buffer(key, Int64SetAdd{base, delta});
    }

    void int64_add(const LocalKey& key, int64_t delta)
    {
        // Normalized at emission: set the base to the snapshot value.
        buffer(key, Int64SetAdd{int64_get(key), delta});
    }

    OrderedSet set_get(const LocalKey& key)
    {
        Value v = read_local(key);
        if (v.is_absent())
            return default_value(ValueKind::OrderedSet).as_set();
        if (v.kind() != ValueKind::OrderedSet)
            abort_program("set read on non-set value");
        return v.as_set();
    }

    SetElement set_get_index(const LocalKey& key, uint32_t index)
    {
        OrderedSet s = set_get(key);
        const SetElement* e = commute::set_get_index(s, index);
        if (!e)
            abort_program("set index out of range");
        return *e;
    }

    SetElement set_lookup(const LocalKey& key, uint64_t threshold)
    {
        OrderedSet s = set_get(key);
        const SetElement* e = commute::set_lookup(s, threshold);
        if (!e)
            abort_program("no element at or above threshold");
        return *e;
    }

    uint32_t set_size(const LocalKey& key) { return uint32_t(set_get(key).elements.size()); }
    uint16_t set_limit(const LocalKey& key) { return set_get(key).limit; }

    void set_insert(const LocalKey& key, uint64_t tag, const Hash32& h)
    {
        buffer(key, SetInsert{tag, h});
    }

    void set_clear(const LocalKey& key, uint64_t threshold)
    {
        buffer(key, SetClear{threshold});
    }

    void set_limit_increase(const LocalKey& key, uint16_t amount)
    {
        buffer(key, SetLimitIncrease{amount});
    }

    void delete_value(const LocalKey& key) { buffer(key, Delete{}); }

    /// Synchronous cross-contract call; the callee sees this contract as
    /// its caller and appends to the same delta buffer.
    void call(const ContractId& contract, uint8_t method, BytesView input)
    {
        auto it = registry_.find(contract);
        if (it == registry_.end())
            abort_program("call to unregistered contract");
        ContractId saved_self = self_;
        ContractId saved_caller = caller_;
        caller_ = self_;
        self_ = contract;
        it->second->run(*this, method, Bytes(input.begin(), input.end()));
        self_ = saved_self;
        caller_ = saved_caller;
    }

    const DeltaList& deltas() const { return deltas_; }
    DeltaList&& take_deltas() { return std::move(deltas_); }

  private:
    Value read_local(const LocalKey& key) const
    {
        return snapshot_.read(Address{self_, key});
    }

    const Bytes* read_leaf(const LocalKey& key) const
    {
        return snapshot_.trie->get(Address{self_, key}.bytes());
    }

    void buffer(const LocalKey& key, Delta d)
    {
        deltas_.push_back(AddressedDelta{Address{self_, key}, std::move(d)});
    }

    const SnapshotView& snapshot_;
    const Registry& registry_;
    const TransactionRecord& tx_;
    Hash32 tx_hash_;
    ContractId self_;
    ContractId caller_{};
    DeltaList deltas_;
};

}  // namespace commute
