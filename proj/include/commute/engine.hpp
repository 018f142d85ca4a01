// Copyright 2026 The Commute Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <mutex>
#include <set>

#include "commute/host.hpp"
#include "commute/resmap.hpp"
#include "commute/wal.hpp"

namespace commute {

struct EngineConfig {
    unsigned threads = 1;
};

struct TxResult {
    bool aborted = false;
    std::string abort_reason;
    DeltaList deltas;
};

struct ProposeStats {
    uint64_t drawn = 0;
    uint64_t admitted = 0;
    uint64_t dropped_abort = 0;
    uint64_t dropped_conflict = 0;
};

struct ProposeResult {
    Block block;
    ProposeStats stats;
};

struct BlockError {
    std::string reason;
    std::optional<Address> address;
};

struct ExecuteResult {
    bool ok = false;
    BlockError error;
    Hash32 state_root{};
    Hash32 modification_root{};
    Hash32 tx_root{};
};

struct FilterResult {
    Block block;
    std::vector<Hash32> removed;  // hashes of pruned transactions
    ExecuteResult applied;
};

/// Draws transactions for block proposal; safe for concurrent workers.
class TxStream {
  public:
    explicit TxStream(std::span<const TransactionRecord> txs) : txs_(txs) {}

    const TransactionRecord* next()
    {
        size_t i = next_.fetch_add(1);
        return i < txs_.size() ? &txs_[i] : nullptr;
    }

  private:
    std::span<const TransactionRecord> txs_;
    std::atomic<size_t> next_{0};
};

inline void run_workers(unsigned threads, const std::function<void(unsigned)>& fn)
{
    if (threads <= 1) {
        fn(0);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads - 1);
    for (unsigned t = 1; t < threads; ++t)
        pool.emplace_back(fn, t);
    fn(0);
    for (auto& th : pool)
        th.join();
}

/// Deterministic parallel block engine: executes unordered blocks of
/// transactions against a per-block snapshot, admits them through the
/// reserve/commit protocol, and commits results into Merkle-Patricia tries.
class Engine {
  public:
    explicit Engine(Registry registry, EngineConfig cfg = {})
        : registry_(std::move(registry)), threads_(std::max(1u, cfg.threads))
    {
    }

    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    uint64_t block_number() const { return block_number_; }
    unsigned threads() const { return threads_; }
    void set_threads(unsigned t) { threads_ = std::max(1u, t); }
    const Registry& registry() const { return registry_; }

    Hash32 state_root() { return state_.root_hash(threads_); }
    const Trie& state() const { return state_; }

    Value read(const Address& addr) const
    {
        const Bytes* leaf = state_.get(addr.bytes());
        return leaf ? deserialize_value(*leaf) : Value::absent();
    }

    /// View used while executing the next block: contracts observe the
    /// number of the block they run in, over the prior block's state.
    SnapshotView snapshot() const { return SnapshotView{&state_, block_number_ + 1}; }

    /// Installs initial state directly (no transactions involved). May be
    /// called repeatedly before the first block; hashes recompute lazily.
    void load_genesis(std::span<const std::pair<Address, Value>> entries)
    {
        for (const auto& [addr, value] : entries)
            state_.put(addr.bytes(), serialize_value(value));
    }

    /// Starts logging to `dir`, first dumping the current state so replay
    /// reconstructs from the logs alone. Call after genesis is loaded.
    void enable_persistence(const std::filesystem::path& dir)
    {
        wal_.emplace(dir);
        state_.root_hash(threads_);
        std::vector<TrieNode*> all;
        collect_postorder(state_.root(), all);
        Block genesis;
        genesis.number = block_number_;
        genesis.state_root = state_.root_hash();
        genesis.modification_root = Trie::empty_root_hash();
        genesis.tx_root = Trie::empty_root_hash();
        wal_->persist_block(block_number_, genesis.encode(), all, state_.root());
    }

    const std::optional<Wal>& wal() const { return wal_; }

    /// Executes one transaction against the current snapshot. Deltas are
    /// buffered, none reserved; aborted transactions produce none.
    TxResult run_transaction(const TransactionRecord& tx) const
    {
        SnapshotView snap = snapshot();
        return run_against(snap, tx, tx.hash());
    }

    /// Assembles a block: draw, run, reserve, then commit-all or
    /// rollback-all per transaction. Individual failures only drop
    /// transactions. Advances the snapshot.
    ProposeResult propose_block(TxStream& stream, uint64_t target_size)
    {
        SnapshotView snap = snapshot();
        std::atomic<uint64_t> drawn{0}, admitted{0}, aborted{0}, conflicted{0};
        std::vector<std::vector<TransactionRecord>> admitted_lists(threads_);

        run_workers(threads_, [&](unsigned w) {
            std::vector<Ticket> tickets;
            while (admitted.load() < target_size) {
                const TransactionRecord* tx = stream.next();
                if (!tx)
                    break;
                drawn.fetch_add(1);
                TxResult run = run_against(snap, *tx, tx->hash());
                if (run.aborted) {
                    aborted.fetch_add(1);
                    continue;
                }
                if (!reserve_all(run.deltas, tickets)) {
                    conflicted.fetch_add(1);
                    continue;
                }
                for (auto& t : tickets)
                    commit(t);
                admitted.fetch_add(1);
                admitted_lists[w].push_back(*tx);
            }
        });

        Block block;
        block.number = block_number_ + 1;
        for (auto& list : admitted_lists)
            block.transactions.insert(block.transactions.end(),
                                      std::make_move_iterator(list.begin()),
                                      std::make_move_iterator(list.end()));

        auto fin = finalize_block(block, /*execute_mode=*/false);
        if (!fin.ok)
            throw std::logic_error("proposal finalize violated a constraint: " +
                                   fin.error.reason);
        block.state_root = fin.state_root;
        block.modification_root = fin.modification_root;
        block.tx_root = fin.tx_root;

        ProposeResult out;
        out.block = std::move(block);
        out.stats = ProposeStats{drawn.load(), admitted.load(), aborted.load(),
                                 conflicted.load()};
        return out;
    }

    /// Deterministically applies a given block through the same
    /// reserve/commit machinery. Any failure invalidates the whole block
    /// and leaves the snapshot unchanged.
    ExecuteResult execute_block(const Block& block)
    {
        ExecuteResult out;
        if (block.number != block_number_ + 1) {
            out.error = {"block number mismatch", std::nullopt};
            return out;
        }
        SnapshotView snap = snapshot();
        std::atomic<bool> failed{false};
        std::mutex err_mutex;
        BlockError first_error;
        auto fail = [&](const std::string& reason, std::optional<Address> addr) {
            std::lock_guard<std::mutex> g(err_mutex);
            if (!failed.load()) {
                first_error = {reason, addr};
                failed.store(true);
            }
        };

        std::atomic<size_t> next{0};
        run_workers(threads_, [&](unsigned) {
            std::vector<Ticket> tickets;
            while (!failed.load()) {
                size_t i = next.fetch_add(1);
                if (i >= block.transactions.size())
                    break;
                const TransactionRecord& tx = block.transactions[i];
                TxResult run = run_against(snap, tx, tx.hash());
                if (run.aborted) {
                    fail("transaction aborted: " + run.abort_reason, std::nullopt);
                    break;
                }
                Violation v = Violation::None;
                std::optional<Address> where;
                if (!reserve_all(run.deltas, tickets, &v, &where)) {
                    fail(std::string("reservation failed: ") + violation_name(v), where);
                    break;
                }
                for (auto& t : tickets)
                    commit(t);
            }
        });

        if (failed.load()) {
            resmap_.reset();
            out.error = first_error;
            return out;
        }

        auto fin = finalize_block(block, /*execute_mode=*/true);
        if (!fin.ok) {
            out.error = fin.error;
            return out;
        }
        out.ok = true;
        out.state_root = fin.state_root;
        out.modification_root = fin.modification_root;
        out.tx_root = fin.tx_root;
        return out;
    }

    /// Executes all transactions, removes the union of per-key conflict
    /// sets (plus aborting transactions), and applies the remainder.
    /// Output is independent of thread count and iteration order.
    FilterResult filter_block(const Block& block)
    {
        size_t n = block.transactions.size();
        std::vector<TxResult> runs(n);
        std::vector<Hash32> hashes(n);
        SnapshotView snap = snapshot();
        std::atomic<size_t> next{0};
        run_workers(threads_, [&](unsigned) {
            for (;;) {
                size_t i = next.fetch_add(1);
                if (i >= n)
                    break;
                hashes[i] = block.transactions[i].hash();
                runs[i] = run_against(snap, block.transactions[i], hashes[i]);
            }
        });

        std::map<Address, std::vector<std::pair<size_t, const Delta*>>> groups;
        for (size_t i = 0; i < n; ++i)
            for (const auto& ad : runs[i].deltas)
                groups[ad.address].push_back({i, &ad.delta});

        std::set<size_t> removed;
        for (auto& [addr, items] : groups)
            conflict_set(read(addr), items, removed);

        FilterResult out;
        out.block.number = block.number;
        for (size_t i = 0; i < n; ++i) {
            if (runs[i].aborted || removed.count(i)) {
                out.removed.push_back(hashes[i]);
                continue;
            }
            out.block.transactions.push_back(block.transactions[i]);
        }
        out.applied = execute_block(out.block);
        if (!out.applied.ok)
            throw std::logic_error("filtered block failed to apply: " +
                                   out.applied.error.reason);
        out.block.state_root = out.applied.state_root;
        out.block.modification_root = out.applied.modification_root;
        out.block.tx_root = out.applied.tx_root;
        return out;
    }

    /// Keys modified by the last block, ascending; empty before any block.
    std::vector<Address> last_modified_keys() const
    {
        std::vector<Address> keys;
        last_mod_trie_.for_each(
            [&](BytesView k, const Bytes&) { keys.push_back(Address::from_bytes(k)); });
        return keys;
    }

    const Trie& last_modification_trie() const { return last_mod_trie_; }

    uint64_t reservation_checksum() const { return resmap_.checksum(); }

    /// Deep copy of the ledger state (registry shared, logs not copied).
    std::unique_ptr<Engine> fork() const
    {
        auto e = std::make_unique<Engine>(registry_, EngineConfig{threads_});
        e->state_ = state_.clone();
        e->block_number_ = block_number_;
        return e;
    }

  private:
    struct FinalizeOutcome {
        bool ok = false;
        BlockError error;
        Hash32 state_root{};
        Hash32 modification_root{};
        Hash32 tx_root{};
    };

    TxResult run_against(const SnapshotView& snap, const TransactionRecord& tx,
                         const Hash32& tx_hash) const
    {
        TxResult out;
        auto it = registry_.find(tx.contract);
        if (it == registry_.end()) {
            out.aborted = true;
            out.abort_reason = "unregistered contract";
            return out;
        }
        HostContext host(snap, registry_, tx, tx_hash);
        try {
            it->second->run(host, tx.method, tx.input);
        } catch (const ProgramAbort& abort) {
            out.aborted = true;
            out.abort_reason = abort.reason;
            return out;
        }
        out.deltas = host.take_deltas();
        return out;
    }

    MapNode* touch(const Address& addr)
    {
        return resmap_.find_or_create(addr, [&] { return read(addr); });
    }

    // Reserves every delta of one transaction; on failure rolls back the
    // reserved prefix and reports the offending delta.
    bool reserve_all(const DeltaList& deltas, std::vector<Ticket>& tickets,
                     Violation* violation = nullptr, std::optional<Address>* where = nullptr)
    {
        tickets.clear();
        for (const auto& ad : deltas) {
            MapNode* node = touch(ad.address);
            auto r = reserve(node->state, node->snap, ad.delta, resmap_.arena());
            if (!r.ok()) {
                for (auto it = tickets.rbegin(); it != tickets.rend(); ++it)
                    rollback(*it);
                tickets.clear();
                if (violation)
                    *violation = r.violation;
                if (where)
                    *where = ad.address;
                return false;
            }
            tickets.push_back(r.ticket);
        }
        return true;
    }

    FinalizeOutcome finalize_block(const Block& block, bool execute_mode)
    {
        FinalizeOutcome out;
        auto nodes = resmap_.collect();
        std::vector<MapNode*> touched;
        touched.reserve(nodes.size());
        for (MapNode* n : nodes)
            if (n->state.committed_total.load() > 0)
                touched.push_back(n);

        // Merge every touched key in parallel; each key is owned by
        // exactly one worker.
        std::vector<MergeResult> merged(touched.size());
        std::atomic<size_t> next{0};
        std::atomic<bool> violated{false};
        run_workers(threads_, [&](unsigned) {
            for (;;) {
                size_t i = next.fetch_add(1);
                if (i >= touched.size())
                    break;
                merged[i] = finalize_reservations(touched[i]->state, touched[i]->snap,
                                                  resmap_.arena(), /*execute_mode=*/true);
                if (!merged[i].ok())
                    violated.store(true);
            }
        });

        if (violated.load()) {
            for (size_t i = 0; i < touched.size(); ++i) {
                if (!merged[i].ok()) {
                    out.error = {std::string("constraint violated at finalize: ") +
                                     violation_name(merged[i].violation),
                                 touched[i]->addr};
                    break;
                }
            }
            resmap_.reset();
            if (!execute_mode)
                out.error.reason += " (proposal mode)";
            return out;
        }

        // Apply merged values and build the per-block tries. Structural
        // trie mutation is single-writer; hashing is parallel.
        Trie mod(64);
        for (size_t i = 0; i < touched.size(); ++i) {
            auto key = touched[i]->addr.bytes();
            if (merged[i].value.is_absent())
                state_.erase(key);
            else
                state_.put(key, serialize_value(merged[i].value));
            mod.put(key, {});
        }
        Trie txt(32);
        for (const auto& tx : block.transactions)
            txt.put(tx.hash(), {});

        std::vector<TrieNode*> dirty;
        out.state_root = state_.root_hash(threads_, wal_ ? &dirty : nullptr);
        out.modification_root = mod.root_hash(threads_);
        out.tx_root = txt.root_hash(threads_);
        out.ok = true;

        ++block_number_;
        last_mod_trie_ = std::move(mod);

        if (wal_) {
            Bytes enc = Block::encode_parts(block.number, block.transactions, out.state_root,
                                            out.modification_root, out.tx_root);
            wal_->persist_block(block.number, enc, dirty, state_.root());
        }
        resmap_.reset();
        return out;
    }

    // Deterministic conflict sets, mirroring the merge rules with
    // transaction attribution. Removal never creates new violations: every
    // constraint is subset-closed for the retained deltas.
    static void conflict_set(const Value& snapshot,
                             const std::vector<std::pair<size_t, const Delta*>>& items,
                             std::set<size_t>& removed)
    {
        std::optional<ValueKind> kind;
        bool type_conflict = false;
        for (const auto& [tx, d] : items) {
            auto k = delta_kind(*d);
            if (!k)
                continue;
            if (!kind)
                kind = k;
            else if (*kind != *k)
                type_conflict = true;
        }
        if (kind && !snapshot.is_absent() && snapshot.kind() != kind)
            type_conflict = true;
        if (type_conflict) {
            for (const auto& [tx, d] : items)
                removed.insert(tx);
            return;
        }
        if (!kind)
            return;  // deletions only

        switch (*kind) {
        case ValueKind::Bytestring: {
            const Bytes* payload = nullptr;
            bool disagree = false;
            for (const auto& [tx, d] : items)
                if (const auto* s = std::get_if<StringSet>(d)) {
                    if (!payload)
                        payload = &s->payload;
                    else if (*payload != s->payload)
                        disagree = true;
                }
            if (disagree)
                for (const auto& [tx, d] : items)
                    if (std::holds_alternative<StringSet>(*d))
                        removed.insert(tx);
            break;
        }
        case ValueKind::NonnegInt64: {
            bool base_mismatch = false;
            std::optional<int64_t> base;
            U64Acc adds, subs;
            for (const auto& [tx, d] : items)
                if (const auto* a = std::get_if<Int64SetAdd>(d)) {
                    if (!base)
                        base = a->base;
                    else if (*base != a->base)
                        base_mismatch = true;
                    if (a->delta >= 0)
                        adds.add(uint64_t(a->delta));
                    else
                        subs.add(magnitude(a->delta));
                }
            if (base_mismatch) {
                for (const auto& [tx, d] : items)
                    if (std::holds_alternative<Int64SetAdd>(*d))
                        removed.insert(tx);
                break;
            }
            bool neg_violation =
                *base >= 0 ? subs.exceeds(uint64_t(*base)) : (subs.total > 0 || subs.wrapped);
            if (neg_violation)
                for (const auto& [tx, d] : items)
                    if (const auto* a = std::get_if<Int64SetAdd>(d); a && a->delta < 0)
                        removed.insert(tx);
            if (adds.exceeds(add_bound(*base)))
                for (const auto& [tx, d] : items)
                    if (const auto* a = std::get_if<Int64SetAdd>(d); a && a->delta > 0)
                        removed.insert(tx);
            break;
        }
        case ValueKind::OrderedSet: {
            static const OrderedSet empty_set{{}, kDefaultSetLimit};
            const OrderedSet& base =
                snapshot.is_absent() ? empty_set : snapshot.as_set();
            std::map<Hash32, std::vector<size_t>> inserters;
            size_t insert_count = 0;
            for (const auto& [tx, d] : items)
                if (const auto* ins = std::get_if<SetInsert>(d)) {
                    inserters[ins->hash].push_back(tx);
                    ++insert_count;
                }
            for (const auto& [h, txs] : inserters)
                if (txs.size() > 1 || base.contains_hash(h))
                    removed.insert(txs.begin(), txs.end());
            if (base.elements.size() + insert_count > base.limit)
                for (const auto& [h, txs] : inserters)
                    removed.insert(txs.begin(), txs.end());
            break;
        }
        }
    }

    static void collect_postorder(TrieNode* node, std::vector<TrieNode*>& out)
    {
        if (!node)
            return;
        if (node->kind == TrieNode::Kind::Ext)
            collect_postorder(node->child.get(), out);
        else if (node->kind == TrieNode::Kind::Branch)
            for (auto& kid : *node->kids)
                collect_postorder(kid.get(), out);
        out.push_back(node);
    }

    Registry registry_;
    unsigned threads_;
    Trie state_{64};
    uint64_t block_number_ = 0;
    ReservationMap resmap_;
    std::optional<Wal> wal_;
    Trie last_mod_trie_{64};
};

}  // namespace commute
