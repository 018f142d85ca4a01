// Copyright 2026 The Commute Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <variant>

#include "commute/address.hpp"
#include "commute/value.hpp"

namespace commute {

// One typed modification to one key. A transaction's output is a list of
// (Address, Delta) pairs; concurrent deltas to a key merge commutatively.

struct StringSet {
    Bytes payload;
    bool operator==(const StringSet&) const = default;
};

/// Set the integer to `base`, then add `delta`. Concurrent writers must
/// agree on `base`; their deltas sum.
struct Int64SetAdd {
    int64_t base = 0;
    int64_t delta = 0;
    bool operator==(const Int64SetAdd&) const = default;
};

struct SetInsert {
    uint64_t tag = 0;
    Hash32 hash{};
    bool operator==(const SetInsert&) const = default;
};

/// Removes every element with tag < threshold, after all in-block inserts.
struct SetClear {
    uint64_t threshold = 0;
    bool operator==(const SetClear&) const = default;
};

/// Takes effect at the next block boundary; saturates at 65535.
struct SetLimitIncrease {
    uint16_t amount = 0;
    bool operator==(const SetLimitIncrease&) const = default;
};

/// Applied after all other concurrent writes; deletions never conflict.
struct Delete {
    bool operator==(const Delete&) const = default;
};

using Delta = std::variant<StringSet, Int64SetAdd, SetInsert, SetClear, SetLimitIncrease, Delete>;

/// Value kind a delta writes, or nullopt for the kind-neutral Delete.
inline std::optional<ValueKind> delta_kind(const Delta& d)
{
    if (std::holds_alternative<StringSet>(d))
        return ValueKind::Bytestring;
    if (std::holds_alternative<Int64SetAdd>(d))
        return ValueKind::NonnegInt64;
    if (std::holds_alternative<Delete>(d))
        return std::nullopt;
    return ValueKind::OrderedSet;
}

struct AddressedDelta {
    Address address;
    Delta delta;
};

using DeltaList = std::vector<AddressedDelta>;

}  // namespace commute
