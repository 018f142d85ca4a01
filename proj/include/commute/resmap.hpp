// Copyright 2026 The Commute Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

#include "commute/address.hpp"
#include "commute/reserve.hpp"

namespace commute {

/// One key's per-block entry: the decoded start-of-block value plus the
/// live reservation state. Published once and then immutable apart from
/// the reservation atomics.
struct MapNode {
    Address addr;
    SnapshotInfo snap;
    ReservationState state;
    MapNode* next = nullptr;

    MapNode(const Address& a, Value snapshot_value) : addr(a), snap(std::move(snapshot_value)) {}
};

/// Lock-free side map of reservation states, keyed by address and created
/// lazily on first reserve. Lives for one block; reset() drops everything.
///
/// Insertion is a CAS push onto a bucket chain. Two racing creators of one
/// address can both land in the chain; the deepest (first-pushed) node is
/// canonical and lookups always return it, so the duplicate is inert.
class ReservationMap {
  public:
    static constexpr size_t kBucketBits = 17;
    static constexpr size_t kBuckets = size_t(1) << kBucketBits;

    ReservationMap() : buckets_(new std::atomic<MapNode*>[kBuckets])
    {
        for (size_t i = 0; i < kBuckets; ++i)
            buckets_[i].store(nullptr);
    }

    ~ReservationMap() { drop_nodes(); }

    EntryArena& arena() { return arena_; }

    MapNode* find(const Address& addr) const
    {
        MapNode* found = nullptr;
        for (MapNode* n = head(addr).load(); n; n = n->next)
            if (n->addr == addr)
                found = n;  // deepest match wins
        return found;
    }

    /// Returns the canonical node for `addr`, creating it (with the decoded
    /// snapshot value from `loader`) on first touch.
    MapNode* find_or_create(const Address& addr, const std::function<Value()>& loader)
    {
        std::atomic<MapNode*>& bucket = head(addr);
        if (MapNode* existing = find_in(bucket.load(), addr))
            return existing;
        auto* mine = new MapNode(addr, loader());
        MapNode* cur = bucket.load();
        do {
            mine->next = cur;
        } while (!bucket.compare_exchange_weak(cur, mine));
        // A concurrent creator may sit deeper in the chain; defer to it.
        return find_in(bucket.load(), addr);
    }

    /// Canonical nodes, one per touched address. Callers run at quiescence.
    std::vector<MapNode*> collect() const
    {
        std::vector<MapNode*> out;
        for (size_t i = 0; i < kBuckets; ++i) {
            for (MapNode* n = buckets_[i].load(); n; n = n->next) {
                bool shadowed = false;  // an equal-address node deeper in the chain wins
                for (MapNode* m = n->next; m; m = m->next)
                    if (m->addr == n->addr) {
                        shadowed = true;
                        break;
                    }
                if (!shadowed)
                    out.push_back(n);
            }
        }
        return out;
    }

    /// Order-insensitive digest of all reservation state; used to assert
    /// that aborted transactions leave no trace.
    uint64_t checksum() const
    {
        uint64_t acc = 0;
        for (size_t i = 0; i < kBuckets; ++i) {
            for (MapNode* n = buckets_[i].load(); n; n = n->next) {
                uint64_t x = AddressHash{}(n->addr);
                x = mix(x, n->state.total_add.load());
                x = mix(x, n->state.total_sub.load());
                x = mix(x, n->state.max_clear.load());
                x = mix(x, n->state.limit_delta.load());
                x = mix(x, n->state.delete_flag.load());
                x = mix(x, n->state.committed_total.load());
                if (InsertTable* t = n->state.table.load())
                    x = mix(x, t->live());
                if (ParamRecord* rec = n->state.params.load()) {
                    x = mix(x, uint64_t(rec->kind));
                    x = mix(x, uint64_t(rec->base));
                    x = mix(x, rec->expect.load());
                    x = mix(x, rec->committed.load());
                }
                acc ^= x;
            }
        }
        return acc;
    }

    size_t node_count() const
    {
        size_t n = 0;
        for (size_t i = 0; i < kBuckets; ++i)
            for (MapNode* node = buckets_[i].load(); node; node = node->next)
                ++n;
        return n;
    }

    /// End-of-block reclamation: retires every node, parameter record and
    /// hash entry in one sweep.
    void reset()
    {
        drop_nodes();
        for (size_t i = 0; i < kBuckets; ++i)
            buckets_[i].store(nullptr);
        arena_.reset();
    }

  private:
    static uint64_t mix(uint64_t acc, uint64_t v)
    {
        acc ^= v + 0x9e3779b97f4a7c15ULL + (acc << 6) + (acc >> 2);
        return acc;
    }

    static MapNode* find_in(MapNode* chain, const Address& addr)
    {
        MapNode* found = nullptr;
        for (MapNode* n = chain; n; n = n->next)
            if (n->addr == addr)
                found = n;
        return found;
    }

    std::atomic<MapNode*>& head(const Address& addr) const
    {
        return buckets_[AddressHash{}(addr) & (kBuckets - 1)];
    }

    void drop_nodes()
    {
        for (size_t i = 0; i < kBuckets; ++i) {
            MapNode* n = buckets_[i].load();
            while (n) {
                MapNode* next = n->next;
                delete n;
                n = next;
            }
        }
    }

    std::unique_ptr<std::atomic<MapNode*>[]> buckets_;
    EntryArena arena_;
};

}  // namespace commute
