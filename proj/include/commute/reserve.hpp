// Copyright 2026 The Commute Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <bit>
#include <cassert>
#include <unordered_set>

#include "commute/merge.hpp"

namespace commute {

// Per-key reservation machinery. A block proposer tentatively reserves each
// delta of a transaction, then either commits them all or rolls them all
// back; the committed set always satisfies the merge constraints, under any
// interleaving. Everything on the reserve/rollback/commit path is a
// single-word atomic read-modify-write; nothing blocks.
//
// Retired parameter records and hash entries are reclaimed only at
// end-of-block (ReservationDomain::reset), which also rules out ABA reuse
// within a block.

/// Must-agree data shared by all concurrent writers of one key. Immutable
/// once published; the counters are bookkeeping, not parameters.
struct ParamRecord {
    ValueKind kind;
    int64_t base = 0;  // Int64SetAdd
    Bytes payload;     // StringSet
    std::atomic<uint32_t> expect{1};     // holders that reserved against this record
    std::atomic<uint32_t> committed{0};  // of which committed
    ParamRecord* reclaim_next = nullptr;

    ParamRecord(ValueKind k, int64_t b, Bytes p) : kind(k), base(b), payload(std::move(p)) {}
};

struct HashEntry {
    uint64_t tag = 0;
    Hash32 hash{};
};

/// Chunked bump allocator for in-block hash entries. Handles are 32-bit and
/// stay valid until reset(); reclamation is wholesale at block end.
class EntryArena {
  public:
    static constexpr size_t kChunkBits = 12;
    static constexpr size_t kChunkSize = size_t(1) << kChunkBits;
    static constexpr size_t kMaxChunks = 1 << 10;

    EntryArena() : chunks_(new std::atomic<HashEntry*>[kMaxChunks]) {
        for (size_t i = 0; i < kMaxChunks; ++i)
            chunks_[i].store(nullptr);
    }

    ~EntryArena() { release(); }

    uint32_t alloc(uint64_t tag, const Hash32& hash)
    {
        uint32_t idx = next_.fetch_add(1);
        size_t chunk = idx >> kChunkBits;
        assert(chunk < kMaxChunks);
        HashEntry* base = chunks_[chunk].load();
        if (!base) {
            HashEntry* fresh = new HashEntry[kChunkSize];
            if (chunks_[chunk].compare_exchange_strong(base, fresh))
                base = fresh;
            else
                delete[] fresh;
        }
        base[idx & (kChunkSize - 1)] = HashEntry{tag, hash};
        return idx + 1;  // 0 stays the empty-slot sentinel
    }

    const HashEntry& get(uint32_t handle) const
    {
        uint32_t idx = handle - 1;
        return chunks_[idx >> kChunkBits].load()[idx & (kChunkSize - 1)];
    }

    void reset()
    {
        release();
        for (size_t i = 0; i < kMaxChunks; ++i)
            chunks_[i].store(nullptr);
        next_.store(0);
    }

  private:
    void release()
    {
        for (size_t i = 0; i < kMaxChunks; ++i)
            delete[] chunks_[i].load();
    }

    std::unique_ptr<std::atomic<HashEntry*>[]> chunks_;
    std::atomic<uint32_t> next_{0};
};

struct Hash32Hasher {
    size_t operator()(const Hash32& h) const
    {
        uint64_t v;
        std::memcpy(&v, h.data(), 8);
        return size_t(v);
    }
};

using HashIndex = std::unordered_set<Hash32, Hash32Hasher>;

/// Fixed-capacity open-addressed table of hash-entry handles, with lazily
/// materialized segments. Capacity (a reservation count) is enforced by a
/// counter; the physical table is oversized so a valid reservation set never
/// sees a spurious full-table condition.
class InsertTable {
  public:
    static constexpr uint32_t kEmpty = 0;
    static constexpr uint32_t kTombstone = 0xFFFFFFFFu;
    static constexpr size_t kSegBits = 8;
    static constexpr size_t kSegSize = size_t(1) << kSegBits;

    struct Segment {
        std::atomic<uint32_t> slots[kSegSize];
        Segment()
        {
            for (auto& s : slots)
                s.store(kEmpty);
        }
    };

    explicit InsertTable(uint32_t capacity) : capacity_(capacity)
    {
        size_t want = std::max<size_t>(16, size_t(capacity) + size_t(capacity) / 2 + 1);
        slot_count_ = std::bit_ceil(want);
        seg_count_ = (slot_count_ + kSegSize - 1) / kSegSize;
        segs_.reset(new std::atomic<Segment*>[seg_count_]);
        for (size_t i = 0; i < seg_count_; ++i)
            segs_[i].store(nullptr);
    }

    ~InsertTable()
    {
        for (size_t i = 0; i < seg_count_; ++i)
            delete segs_[i].load();
    }

    uint32_t capacity() const { return capacity_; }
    uint32_t live() const { return live_.load(); }

    /// Claims a slot for `hash`. Returns the slot index, or fails with
    /// SetFull / DuplicateHash. At most one of any set of concurrent
    /// same-hash claims can succeed.
    struct ClaimResult {
        Violation violation = Violation::None;
        uint32_t slot = 0;
    };

    ClaimResult claim(const EntryArena& arena, const Hash32& hash, uint32_t handle)
    {
        uint32_t prev_live = live_.fetch_add(1);
        if (prev_live + 1 > capacity_) {
            live_.fetch_sub(1);
            return {Violation::SetFull, 0};
        }

        uint64_t h64 = get_u64be(hash.data());
        uint64_t step = (get_u64be(hash.data() + 8) << 1) | 1;
        uint64_t mask = slot_count_ - 1;

        for (;;) {
            // Scan the probe chain: duplicate-check live entries, remember
            // the first reusable tombstone, stop at the first empty slot.
            int64_t tomb_pos = -1;
            int64_t empty_pos = -1;
            for (size_t i = 0; i < slot_count_; ++i) {
                size_t pos = (h64 + i * step) & mask;
                uint32_t v = load_slot(pos);
                if (v == kEmpty) {
                    empty_pos = int64_t(pos);
                    break;
                }
                if (v == kTombstone) {
                    if (tomb_pos < 0)
                        tomb_pos = int64_t(pos);
                    continue;
                }
                if (arena.get(v).hash == hash) {
                    live_.fetch_sub(1);
                    return {Violation::DuplicateHash, 0};
                }
            }
            int64_t target = tomb_pos >= 0 ? tomb_pos : empty_pos;
            if (target < 0) {
                live_.fetch_sub(1);  // tombstone-saturated; treat as full
                return {Violation::SetFull, 0};
            }
            uint32_t expected = tomb_pos >= 0 ? kTombstone : kEmpty;
            if (!slot_ref(size_t(target)).compare_exchange_strong(expected, handle))
                continue;  // lost the slot, rescan

            // Verify no concurrent claim of the same hash won elsewhere.
            // Claims happen before verification scans, so of two racing
            // same-hash claimers at least one sees the other.
            for (size_t i = 0; i < slot_count_; ++i) {
                size_t pos = (h64 + i * step) & mask;
                if (int64_t(pos) == target)
                    continue;
                uint32_t v = load_slot(pos);
                if (v == kEmpty)
                    break;
                if (v == kTombstone)
                    continue;
                if (arena.get(v).hash == hash) {
                    slot_ref(size_t(target)).store(kTombstone);
                    live_.fetch_sub(1);
                    return {Violation::DuplicateHash, 0};
                }
            }
            return {Violation::None, uint32_t(target)};
        }
    }

    void release(uint32_t slot)
    {
        slot_ref(slot).store(kTombstone);
        live_.fetch_sub(1);
    }

    /// All live handles; callers run this only at quiescence.
    void collect(std::vector<uint32_t>& out) const
    {
        for (size_t s = 0; s < seg_count_; ++s) {
            Segment* seg = segs_[s].load();
            if (!seg)
                continue;
            for (size_t i = 0; i < kSegSize; ++i) {
                uint32_t v = seg->slots[i].load();
                if (v != kEmpty && v != kTombstone)
                    out.push_back(v);
            }
        }
    }

  private:
    uint32_t load_slot(size_t pos)
    {
        Segment* seg = segs_[pos >> kSegBits].load();
        if (!seg)
            return kEmpty;
        return seg->slots[pos & (kSegSize - 1)].load();
    }

    std::atomic<uint32_t>& slot_ref(size_t pos)
    {
        size_t s = pos >> kSegBits;
        Segment* seg = segs_[s].load();
        if (!seg) {
            Segment* fresh = new Segment();
            if (segs_[s].compare_exchange_strong(seg, fresh))
                seg = fresh;
            else
                delete fresh;
        }
        return seg->slots[pos & (kSegSize - 1)];
    }

    uint32_t capacity_;
    size_t slot_count_;
    size_t seg_count_;
    std::unique_ptr<std::atomic<Segment*>[]> segs_;
    std::atomic<uint32_t> live_{0};
};

/// Start-of-block facts about one key, fixed for the whole block.
struct SnapshotInfo {
    Value value;
    uint32_t set_size = 0;
    uint16_t set_limit = kDefaultSetLimit;
    uint32_t insert_capacity = kDefaultSetLimit;
    std::atomic<HashIndex*> hash_index{nullptr};

    explicit SnapshotInfo(Value v) : value(std::move(v))
    {
        if (value.kind() == ValueKind::OrderedSet) {
            const auto& s = value.as_set();
            set_size = uint32_t(s.elements.size());
            set_limit = s.limit;
            insert_capacity = set_limit - set_size;
        }
    }

    ~SnapshotInfo() { delete hash_index.load(); }

    std::optional<ValueKind> kind() const { return value.kind(); }

    const HashIndex& snapshot_hashes()
    {
        HashIndex* idx = hash_index.load();
        if (!idx) {
            auto* fresh = new HashIndex();
            if (value.kind() == ValueKind::OrderedSet)
                for (const auto& e : value.as_set().elements)
                    fresh->insert(e.hash);
            if (hash_index.compare_exchange_strong(idx, fresh))
                idx = fresh;
            else
                delete fresh;
        }
        return *idx;
    }
};

struct ReservationState {
    std::atomic<ParamRecord*> params{nullptr};
    std::atomic<ParamRecord*> reclaim{nullptr};
    std::atomic<uint64_t> total_add{0};
    std::atomic<uint64_t> total_sub{0};
    std::atomic<uint64_t> max_clear{0};
    std::atomic<uint64_t> limit_delta{0};
    std::atomic<bool> delete_flag{false};
    std::atomic<uint32_t> committed_total{0};
    std::atomic<InsertTable*> table{nullptr};

    ~ReservationState()
    {
        delete table.load();
        ParamRecord* rec = reclaim.load();
        while (rec) {
            ParamRecord* next = rec->reclaim_next;
            delete rec;
            rec = next;
        }
    }

    InsertTable& insert_table(uint32_t capacity)
    {
        InsertTable* t = table.load();
        if (!t) {
            auto* fresh = new InsertTable(capacity);
            if (table.compare_exchange_strong(t, fresh))
                t = fresh;
            else
                delete fresh;
        }
        return *t;
    }
};

/// Undo/commit token for one reserved delta. Consumed exactly once.
struct Ticket {
    ReservationState* state = nullptr;
    ParamRecord* rec = nullptr;
    Delta delta;
    uint32_t slot = 0;  // SetInsert
};

struct ReserveResult {
    Violation violation = Violation::None;
    Ticket ticket;

    bool ok() const { return violation == Violation::None; }
};

namespace rcdetail {

struct JoinResult {
    Violation violation = Violation::None;
    ParamRecord* rec = nullptr;
};

inline void unjoin(ReservationState& state, ParamRecord* rec)
{
    if (rec->expect.fetch_sub(1) == 1 && rec->committed.load() == 0) {
        ParamRecord* expected = rec;
        state.params.compare_exchange_strong(expected, nullptr);
        // The record stays on the reclaim list until block end.
    }
}

/// Publish-or-compare of the must-agree parameters: one CAS on the params
/// pointer publishes; joiners compare by value and bump the holder count.
inline JoinResult join_params(ReservationState& state, SnapshotInfo& snap, ValueKind kind,
                              int64_t base, const Bytes* payload)
{
    for (;;) {
        ParamRecord* rec = state.params.load();
        if (!rec) {
            if (snap.kind() && *snap.kind() != kind)
                return {Violation::TypeConflict, nullptr};
            auto* mine = new ParamRecord(kind, base, payload ? *payload : Bytes{});
            ParamRecord* head = state.reclaim.load();
            do {
                mine->reclaim_next = head;
            } while (!state.reclaim.compare_exchange_weak(head, mine));
            ParamRecord* expected = nullptr;
            if (state.params.compare_exchange_strong(expected, mine))
                return {Violation::None, mine};
            rec = expected;  // lost the publish; fall through and join
        }
        if (rec->kind != kind)
            return {Violation::TypeConflict, nullptr};
        if (kind == ValueKind::NonnegInt64 && rec->base != base)
            return {Violation::BaseMismatch, nullptr};
        if (kind == ValueKind::Bytestring && rec->payload != *payload)
            return {Violation::BaseMismatch, nullptr};
        if (rec->expect.fetch_add(1) == 0) {
            // Record was mid-retirement; back off and retry.
            rec->expect.fetch_sub(1);
            continue;
        }
        if (state.params.load() != rec) {
            rec->expect.fetch_sub(1);
            continue;
        }
        return {Violation::None, rec};
    }
}

inline void fetch_max(std::atomic<uint64_t>& target, uint64_t v)
{
    uint64_t cur = target.load();
    while (cur < v && !target.compare_exchange_weak(cur, v)) {
    }
}

}  // namespace rcdetail

/// Tentatively admits one delta. On success the reservation is recorded so
/// that the committed set stays mergeable under every interleaving; on
/// failure nothing changed. `arena` backs hash-entry handles and must
/// outlive the block.
inline ReserveResult reserve(ReservationState& state, SnapshotInfo& snap, const Delta& delta,
                             EntryArena& arena)
{
    using rcdetail::join_params;
    using rcdetail::unjoin;

    ReserveResult res;
    res.ticket.state = &state;
    res.ticket.delta = delta;

    if (std::holds_alternative<Delete>(delta))
        return res;

    if (const auto* op = std::get_if<Int64SetAdd>(&delta)) {
        auto join = join_params(state, snap, ValueKind::NonnegInt64, op->base, nullptr);
        if (join.violation != Violation::None)
            return {join.violation, {}};
        if (op->delta >= 0) {
            uint64_t v = uint64_t(op->delta);
            uint64_t prev = state.total_add.fetch_add(v);
            if (prev + v < prev || prev + v > add_bound(op->base)) {
                state.total_add.fetch_sub(v);
                unjoin(state, join.rec);
                return {Violation::Overflow, {}};
            }
        } else {
            if (op->base < 0) {
                unjoin(state, join.rec);
                return {Violation::Nonnegativity, {}};
            }
            uint64_t v = magnitude(op->delta);
            uint64_t prev = state.total_sub.fetch_add(v);
            if (prev + v < prev || prev + v > uint64_t(op->base)) {
                state.total_sub.fetch_sub(v);
                unjoin(state, join.rec);
                return {Violation::Nonnegativity, {}};
            }
        }
        res.ticket.rec = join.rec;
        return res;
    }

    if (const auto* op = std::get_if<StringSet>(&delta)) {
        auto join = join_params(state, snap, ValueKind::Bytestring, 0, &op->payload);
        if (join.violation != Violation::None)
            return {join.violation, {}};
        res.ticket.rec = join.rec;
        return res;
    }

    // Remaining kinds all write the set type; agree on the kind first.
    auto join = join_params(state, snap, ValueKind::OrderedSet, 0, nullptr);
    if (join.violation != Violation::None)
        return {join.violation, {}};
    res.ticket.rec = join.rec;

    if (const auto* op = std::get_if<SetInsert>(&delta)) {
        if (snap.snapshot_hashes().count(op->hash)) {
            unjoin(state, join.rec);
            return {Violation::DuplicateHash, {}};
        }
        if (snap.insert_capacity == 0) {
            unjoin(state, join.rec);
            return {Violation::SetFull, {}};
        }
        InsertTable& table = state.insert_table(snap.insert_capacity);
        uint32_t handle = arena.alloc(op->tag, op->hash);
        auto claim = table.claim(arena, op->hash, handle);
        if (claim.violation != Violation::None) {
            unjoin(state, join.rec);
            return {claim.violation, {}};
        }
        res.ticket.slot = claim.slot;
        return res;
    }

    if (std::get_if<SetLimitIncrease>(&delta)) {
        state.limit_delta.fetch_add(std::get<SetLimitIncrease>(delta).amount);
        return res;
    }

    // SetClear reserves as a no-op; the threshold lands at commit.
    return res;
}

/// Restores state exactly as if the reserve never happened. Never fails.
inline void rollback(Ticket& t)
{
    ReservationState& state = *t.state;
    if (const auto* op = std::get_if<Int64SetAdd>(&t.delta)) {
        if (op->delta >= 0)
            state.total_add.fetch_sub(uint64_t(op->delta));
        else
            state.total_sub.fetch_sub(magnitude(op->delta));
    } else if (std::get_if<SetInsert>(&t.delta)) {
        state.table.load()->release(t.slot);
    } else if (const auto* op = std::get_if<SetLimitIncrease>(&t.delta)) {
        state.limit_delta.fetch_sub(op->amount);
    }
    if (t.rec)
        rcdetail::unjoin(state, t.rec);
    t.state = nullptr;
}

/// Makes the delta permanent for this block.
inline void commit(Ticket& t)
{
    ReservationState& state = *t.state;
    if (const auto* op = std::get_if<SetClear>(&t.delta))
        rcdetail::fetch_max(state.max_clear, op->threshold);
    else if (std::get_if<Delete>(&t.delta))
        state.delete_flag.store(true);
    if (t.rec)
        t.rec->committed.fetch_add(1);
    state.committed_total.fetch_add(1);
    t.state = nullptr;
}

/// Merges the committed deltas of one key against its snapshot. Requires
/// quiescence (no reserves in flight). In execute mode every constraint is
/// re-asserted and violations are reported; in propose mode the protocol
/// guarantees validity, so violations are assertion failures.
inline MergeResult finalize_reservations(ReservationState& state, SnapshotInfo& snap,
                                         const EntryArena& arena, bool execute_mode)
{
    if (state.committed_total.load() == 0)
        return MergeResult{Violation::None, snap.value};

    ParamRecord* rec = state.params.load();
    bool typed = rec && rec->committed.load() > 0;
    bool deleted = state.delete_flag.load();

    auto fail = [&](Violation v) {
        assert(execute_mode);
        (void)execute_mode;
        return MergeResult::fail(v);
    };

    MergeResult out{Violation::None, Value::absent()};
    if (typed) {
        if (execute_mode && snap.kind() && *snap.kind() != rec->kind)
            return fail(Violation::TypeConflict);
        switch (rec->kind) {
        case ValueKind::Bytestring:
            out.value = Bytestring{rec->payload};
            break;
        case ValueKind::NonnegInt64: {
            int64_t base = rec->base;
            uint64_t add = state.total_add.load();
            uint64_t sub = state.total_sub.load();
            if (execute_mode) {
                if (add > add_bound(base))
                    return fail(Violation::Overflow);
                if (base >= 0 ? sub > uint64_t(base) : sub > 0)
                    return fail(Violation::Nonnegativity);
            }
            out.value = NonnegInt64{int64_t(__int128(base) + add - sub)};
            break;
        }
        case ValueKind::OrderedSet: {
            static const OrderedSet empty_set{{}, kDefaultSetLimit};
            const OrderedSet& base =
                snap.value.is_absent() ? empty_set : snap.value.as_set();
            std::vector<uint32_t> handles;
            if (InsertTable* table = state.table.load())
                table->collect(handles);
            OrderedSet merged;
            merged.elements.reserve(base.elements.size() + handles.size());
            merged.elements = base.elements;
            for (uint32_t h : handles) {
                const HashEntry& e = arena.get(h);
                merged.elements.push_back(SetElement{e.tag, e.hash});
            }
            if (execute_mode) {
                if (base.elements.size() + handles.size() > base.limit)
                    return fail(Violation::SetFull);
                const HashIndex& snap_hashes = snap.snapshot_hashes();
                std::unordered_set<Hash32, Hash32Hasher> seen;
                for (uint32_t h : handles) {
                    const Hash32& hv = arena.get(h).hash;
                    if (snap_hashes.count(hv) || !seen.insert(hv).second)
                        return fail(Violation::DuplicateHash);
                }
            }
            std::sort(merged.elements.begin(), merged.elements.end());
            uint64_t clear_to = state.max_clear.load();
            std::erase_if(merged.elements,
                          [&](const SetElement& e) { return e.tag < clear_to; });
            merged.limit = uint16_t(
                std::min<uint64_t>(kMaxSetLimit, base.limit + state.limit_delta.load()));
            out.value = std::move(merged);
            break;
        }
        }
    }
    if (deleted)
        out.value = Value::absent();
    else if (!typed)
        out.value = snap.value;  // only rolled-back reservations remain
    return out;
}

}  // namespace commute
