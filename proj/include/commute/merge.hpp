// Copyright 2026 The Commute Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cassert>
#include <span>
#include <string>

#include "commute/delta.hpp"

namespace commute {

enum class Violation : uint8_t {
    None = 0,
    TypeConflict,    // deltas imply two kinds, or disagree with the snapshot kind
    BaseMismatch,    // int bases or string payloads disagree
    Nonnegativity,   // subtractions exceed a nonnegative base, or subtract from a negative one
    DuplicateHash,   // hash inserted twice, or already present in the snapshot set
    SetFull,         // snapshot size + inserts exceeds the snapshot limit
    Overflow,        // an accumulator or the merged integer leaves the 64-bit range
};

inline const char* violation_name(Violation v)
{
    switch (v) {
    case Violation::None: return "none";
    case Violation::TypeConflict: return "type-conflict";
    case Violation::BaseMismatch: return "base-mismatch";
    case Violation::Nonnegativity: return "nonnegativity";
    case Violation::DuplicateHash: return "duplicate-hash";
    case Violation::SetFull: return "set-full";
    case Violation::Overflow: return "overflow";
    }
    return "?";
}

struct MergeResult {
    Violation violation = Violation::None;
    Value value;

    bool ok() const { return violation == Violation::None; }

    static MergeResult fail(Violation v) { return MergeResult{v, Value::absent()}; }
};

/// Largest total addition that keeps base + total within int64.
inline uint64_t add_bound(int64_t base)
{
    return uint64_t(__int128(INT64_MAX) - base);
}

// Saturating unsigned accumulators. The totals are order-free, so whether
// they exceed a bound does not depend on iteration order.
struct U64Acc {
    uint64_t total = 0;
    bool wrapped = false;

    void add(uint64_t v)
    {
        uint64_t next = total + v;
        if (next < total)
            wrapped = true;
        total = next;
    }

    bool exceeds(uint64_t bound) const { return wrapped || total > bound; }
};

inline uint64_t magnitude(int64_t v)
{
    return v < 0 ? ~uint64_t(v) + 1 : uint64_t(v);
}

namespace detail {

inline MergeResult merge_int(std::span<const Delta> deltas)
{
    bool have_base = false;
    int64_t base = 0;
    U64Acc adds, subs;
    for (const auto& d : deltas) {
        const auto* op = std::get_if<Int64SetAdd>(&d);
        if (!op)
            continue;
        if (!have_base) {
            base = op->base;
            have_base = true;
        } else if (op->base != base) {
            return MergeResult::fail(Violation::BaseMismatch);
        }
        if (op->delta >= 0)
            adds.add(uint64_t(op->delta));
        else
            subs.add(magnitude(op->delta));
    }
    if (adds.exceeds(add_bound(base)))
        return MergeResult::fail(Violation::Overflow);
    if (base >= 0) {
        if (subs.exceeds(uint64_t(base)))
            return MergeResult::fail(Violation::Nonnegativity);
    } else if (subs.total > 0 || subs.wrapped) {
        return MergeResult::fail(Violation::Nonnegativity);
    }
    __int128 final_val = __int128(base) + adds.total - subs.total;
    assert(final_val >= INT64_MIN && final_val <= INT64_MAX);
    return MergeResult{Violation::None, NonnegInt64{int64_t(final_val)}};
}

inline MergeResult merge_string(std::span<const Delta> deltas)
{
    const Bytes* payload = nullptr;
    for (const auto& d : deltas) {
        const auto* op = std::get_if<StringSet>(&d);
        if (!op)
            continue;
        if (!payload)
            payload = &op->payload;
        else if (*payload != op->payload)
            return MergeResult::fail(Violation::BaseMismatch);
    }
    return MergeResult{Violation::None, Bytestring{*payload}};
}

inline MergeResult merge_set(const Value& snapshot, std::span<const Delta> deltas)
{
    static const OrderedSet empty_set{{}, kDefaultSetLimit};
    const OrderedSet& base = snapshot.is_absent() ? empty_set : snapshot.as_set();

    std::vector<SetElement> inserts;
    uint64_t clear_threshold = 0;
    uint64_t limit_gain = 0;
    for (const auto& d : deltas) {
        if (const auto* ins = std::get_if<SetInsert>(&d)) {
            inserts.push_back(SetElement{ins->tag, ins->hash});
        } else if (const auto* cl = std::get_if<SetClear>(&d)) {
            clear_threshold = std::max(clear_threshold, cl->threshold);
        } else if (const auto* li = std::get_if<SetLimitIncrease>(&d)) {
            limit_gain += li->amount;
        }
    }

    std::sort(inserts.begin(), inserts.end(),
              [](const SetElement& a, const SetElement& b) { return a.hash < b.hash; });
    for (size_t i = 1; i < inserts.size(); ++i)
        if (inserts[i].hash == inserts[i - 1].hash)
            return MergeResult::fail(Violation::DuplicateHash);
    for (const auto& e : inserts)
        if (base.contains_hash(e.hash))
            return MergeResult::fail(Violation::DuplicateHash);

    // Capacity is judged against the snapshot: in-block clears free nothing,
    // and limit increases land at the next block boundary.
    if (base.elements.size() + inserts.size() > base.limit)
        return MergeResult::fail(Violation::SetFull);

    OrderedSet merged;
    merged.elements.reserve(base.elements.size() + inserts.size());
    merged.elements = base.elements;
    merged.elements.insert(merged.elements.end(), inserts.begin(), inserts.end());
    std::sort(merged.elements.begin(), merged.elements.end());
    std::erase_if(merged.elements,
                  [&](const SetElement& e) { return e.tag < clear_threshold; });
    merged.limit = uint16_t(std::min<uint64_t>(kMaxSetLimit, base.limit + limit_gain));
    return MergeResult{Violation::None, std::move(merged)};
}

}  // namespace detail

/// Deterministic, permutation-invariant resolution of all of one key's
/// deltas in a block. `deltas` is a multiset; iteration order is arbitrary.
inline MergeResult merge_key(const Value& snapshot, std::span<const Delta> deltas)
{
    std::optional<ValueKind> kind;
    bool any_delete = false;
    bool any_typed = false;
    for (const auto& d : deltas) {
        auto k = delta_kind(d);
        if (!k) {
            any_delete = true;
            continue;
        }
        any_typed = true;
        if (!kind)
            kind = k;
        else if (*kind != *k)
            return MergeResult::fail(Violation::TypeConflict);
    }

    if (!any_typed) {
        if (any_delete)
            return MergeResult{Violation::None, Value::absent()};
        return MergeResult{Violation::None, snapshot};
    }

    if (!snapshot.is_absent() && snapshot.kind() != kind)
        return MergeResult::fail(Violation::TypeConflict);

    MergeResult merged;
    switch (*kind) {
    case ValueKind::Bytestring:
        merged = detail::merge_string(deltas);
        break;
    case ValueKind::NonnegInt64:
        merged = detail::merge_int(deltas);
        break;
    case ValueKind::OrderedSet:
        merged = detail::merge_set(snapshot, deltas);
        break;
    }
    if (!merged.ok())
        return merged;
    if (any_delete)
        return MergeResult{Violation::None, Value::absent()};
    return merged;
}

}  // namespace commute
