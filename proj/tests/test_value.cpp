// Copyright 2026 The Commute Authors.
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <set>

#include "commute/value.hpp"
#include "support.hpp"

using namespace commute;
using commute::test::Rng;

TEST(DefaultValue, PerKind)
{
    EXPECT_EQ(default_value(ValueKind::NonnegInt64).as_int().value, 0);
    EXPECT_TRUE(default_value(ValueKind::Bytestring).as_string().payload.empty());
    const auto& s = default_value(ValueKind::OrderedSet).as_set();
    EXPECT_TRUE(s.elements.empty());
    EXPECT_EQ(s.limit, 64);
}

TEST(Serialize, IntZero)
{
    Bytes b = serialize_value(NonnegInt64{0});
    ASSERT_EQ(b.size(), 9u);
    EXPECT_EQ(b[0], uint8_t(ValueKind::NonnegInt64));
    for (size_t i = 1; i < 9; ++i)
        EXPECT_EQ(b[i], 0);
}

TEST(Serialize, EmptyString)
{
    Bytes b = serialize_value(Bytestring{});
    ASSERT_EQ(b.size(), 5u);
    EXPECT_EQ(b[0], uint8_t(ValueKind::Bytestring));
    EXPECT_EQ(get_u32be(&b[1]), 0u);
}

TEST(Serialize, SetTieBreaksByHash)
{
    Hash32 ha{}, hb{};
    ha[0] = 1;
    hb[0] = 2;
    OrderedSet s;
    s.elements = {{2, ha}, {2, hb}};
    Bytes b = serialize_value(s);
    // header: kind, limit, count; then (tag, hash) pairs in sorted order
    size_t first = 1 + 2 + 4 + 8;
    EXPECT_EQ(b[first], 1);
    EXPECT_EQ(b[first + 40], 2);
}

TEST(Serialize, RoundTrip)
{
    Rng rng(42);
    for (int i = 0; i < 2000; ++i) {
        auto kind = ValueKind(1 + rng.below(3));
        Value v = test::random_value(rng, kind);
        EXPECT_EQ(deserialize_value(serialize_value(v)), v);
    }
}

TEST(Serialize, InjectiveOverRandomPairs)
{
    Rng rng(7);
    int checked = 0;
    for (int i = 0; i < 100000; ++i) {
        auto kind_a = ValueKind(1 + rng.below(3));
        auto kind_b = ValueKind(1 + rng.below(3));
        Value a = test::random_value(rng, kind_a);
        Value b = test::random_value(rng, kind_b);
        if (a == b)
            continue;
        ++checked;
        ASSERT_NE(hash32(serialize_value(a)), hash32(serialize_value(b)));
    }
    EXPECT_GT(checked, 90000);
}

TEST(SetRead, ByIndex)
{
    Hash32 ha = test::h("a"), hb = test::h("b");
    OrderedSet s;
    s.elements = {{2, ha}, {5, hb}};
    std::sort(s.elements.begin(), s.elements.end());
    ASSERT_NE(set_get_index(s, 1), nullptr);
    EXPECT_EQ(set_get_index(s, 1)->tag, 5u);
    EXPECT_EQ(set_get_index(s, 2), nullptr);
}

TEST(SetRead, ByThreshold)
{
    Hash32 ha = test::h("a"), hb = test::h("b");
    OrderedSet s;
    s.elements = {{2, ha}, {5, hb}};
    std::sort(s.elements.begin(), s.elements.end());
    ASSERT_NE(set_lookup(s, 3), nullptr);
    EXPECT_EQ(set_lookup(s, 3)->tag, 5u);

    OrderedSet one;
    one.elements = {{2, ha}};
    EXPECT_EQ(set_lookup(one, 3), nullptr);
}

TEST(Address, OrderingIsLexicographic)
{
    Address a, b;
    a.contract.fill(0);
    b.contract.fill(0);
    a.local.fill(0);
    b.local.fill(0);
    b.local[31] = 1;
    EXPECT_LT(a, b);
    b.local[31] = 0;
    b.contract[0] = 1;
    a.local.fill(0xff);
    EXPECT_LT(a, b);  // contract bytes dominate
}
