// Copyright 2026 The Commute Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <variant>
#include <vector>

#include "commute/bytes.hpp"

namespace commute {

enum class ValueKind : uint8_t {
    Bytestring = 1,
    NonnegInt64 = 2,
    OrderedSet = 3,
};

inline constexpr uint16_t kDefaultSetLimit = 64;
inline constexpr uint16_t kMaxSetLimit = 65535;

struct SetElement {
    uint64_t tag = 0;
    Hash32 hash{};

    auto operator<=>(const SetElement&) const = default;
};

/// Bounded collection of (tag, hash) pairs, sorted by tag then hash.
/// Hashes are pairwise distinct and |elements| never exceeds limit.
struct OrderedSet {
    std::vector<SetElement> elements;
    uint16_t limit = kDefaultSetLimit;

    bool operator==(const OrderedSet&) const = default;

    bool contains_hash(const Hash32& h) const
    {
        for (const auto& e : elements)
            if (e.hash == h)
                return true;
        return false;
    }
};

struct Bytestring {
    Bytes payload;

    bool operator==(const Bytestring&) const = default;
};

struct NonnegInt64 {
    int64_t value = 0;

    bool operator==(const NonnegInt64&) const = default;
};

/// State of one key: a typed object, or Absent for keys never written.
class Value {
  public:
    Value() = default;
    Value(Bytestring s) : rep_(std::move(s)) {}
    Value(NonnegInt64 n) : rep_(n) {}
    Value(OrderedSet s) : rep_(std::move(s)) {}

    static Value absent() { return Value(); }

    bool is_absent() const { return std::holds_alternative<std::monostate>(rep_); }

    std::optional<ValueKind> kind() const
    {
        if (std::holds_alternative<Bytestring>(rep_))
            return ValueKind::Bytestring;
        if (std::holds_alternative<NonnegInt64>(rep_))
            return ValueKind::NonnegInt64;
        if (std::holds_alternative<OrderedSet>(rep_))
            return ValueKind::OrderedSet;
        return std::nullopt;
    }

    const Bytestring& as_string() const { return std::get<Bytestring>(rep_); }
    const NonnegInt64& as_int() const { return std::get<NonnegInt64>(rep_); }
    const OrderedSet& as_set() const { return std::get<OrderedSet>(rep_); }
    OrderedSet& as_set() { return std::get<OrderedSet>(rep_); }

    bool operator==(const Value&) const = default;

  private:
    std::variant<std::monostate, Bytestring, NonnegInt64, OrderedSet> rep_;
};

inline Value default_value(ValueKind kind)
{
    switch (kind) {
    case ValueKind::Bytestring:
        return Bytestring{};
    case ValueKind::NonnegInt64:
        return NonnegInt64{0};
    case ValueKind::OrderedSet:
        return OrderedSet{{}, kDefaultSetLimit};
    }
    throw std::invalid_argument("bad value kind");
}

/// Canonical injective encoding: one kind byte, then fixed-layout fields.
/// This is the bit-exact contract shared by the trie leaves and the logs.
inline Bytes serialize_value(const Value& v)
{
    Bytes out;
    switch (*v.kind()) {
    case ValueKind::Bytestring: {
        const auto& s = v.as_string();
        out.push_back(uint8_t(ValueKind::Bytestring));
        put_u32be(out, uint32_t(s.payload.size()));
        out.insert(out.end(), s.payload.begin(), s.payload.end());
        break;
    }
    case ValueKind::NonnegInt64: {
        out.push_back(uint8_t(ValueKind::NonnegInt64));
        put_i64be(out, v.as_int().value);
        break;
    }
    case ValueKind::OrderedSet: {
        const auto& s = v.as_set();
        out.push_back(uint8_t(ValueKind::OrderedSet));
        put_u16be(out, s.limit);
        put_u32be(out, uint32_t(s.elements.size()));
        for (const auto& e : s.elements) {
            put_u64be(out, e.tag);
            out.insert(out.end(), e.hash.begin(), e.hash.end());
        }
        break;
    }
    }
    return out;
}

inline Value deserialize_value(BytesView data)
{
    ByteReader r(data);
    switch (ValueKind(r.u8())) {
    case ValueKind::Bytestring: {
        uint32_t n = r.u32be();
        auto b = r.bytes(n);
        return Bytestring{Bytes(b.begin(), b.end())};
    }
    case ValueKind::NonnegInt64:
        return NonnegInt64{r.i64be()};
    case ValueKind::OrderedSet: {
        OrderedSet s;
        s.limit = r.u16be();
        uint32_t n = r.u32be();
        s.elements.reserve(n);
        for (uint32_t i = 0; i < n; ++i) {
            SetElement e;
            e.tag = r.u64be();
            e.hash = r.hash32();
            s.elements.push_back(e);
        }
        return s;
    }
    }
    throw std::invalid_argument("bad value encoding");
}

/// nth element in sorted order, or nullptr when out of range.
inline const SetElement* set_get_index(const OrderedSet& s, uint32_t index)
{
    if (index >= s.elements.size())
        return nullptr;
    return &s.elements[index];
}

/// First element whose tag is at least the threshold, or nullptr.
inline const SetElement* set_lookup(const OrderedSet& s, uint64_t threshold)
{
    auto it = std::lower_bound(s.elements.begin(), s.elements.end(), threshold,
                               [](const SetElement& e, uint64_t t) { return e.tag < t; });
    if (it == s.elements.end())
        return nullptr;
    return &*it;
}

}  // namespace commute
