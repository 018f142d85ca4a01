// Copyright 2026 The Commute Authors.
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>

#include "commute/merge.hpp"
#include "support.hpp"

using namespace commute;
using commute::test::Rng;

namespace {

MergeResult merge(const Value& snap, std::vector<Delta> deltas)
{
    return merge_key(snap, deltas);
}

}  // namespace

TEST(Merge, IntSumWithCommonBase)
{
    auto r = merge(NonnegInt64{100},
                   {Int64SetAdd{100, -30}, Int64SetAdd{100, -30}, Int64SetAdd{100, 10}});
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(r.value.as_int().value, 50);
}

TEST(Merge, IntSubtractionsExceedBase)
{
    auto r = merge(NonnegInt64{10}, {Int64SetAdd{10, -6}, Int64SetAdd{10, -6}});
    EXPECT_EQ(r.violation, Violation::Nonnegativity);
}

TEST(Merge, ExplicitNegativeBaseAccepted)
{
    auto r = merge(Value::absent(), {Int64SetAdd{-5, 3}});
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(r.value.as_int().value, -2);
}

TEST(Merge, NegativeBaseRejectsSubtraction)
{
    auto r = merge(Value::absent(), {Int64SetAdd{-5, 3}, Int64SetAdd{-5, -1}});
    EXPECT_EQ(r.violation, Violation::Nonnegativity);
}

TEST(Merge, InsertLandsThenClearRemovesIt)
{
    Hash32 h1 = test::h("h1"), h2 = test::h("h2");
    OrderedSet snap;
    snap.elements = {{5, h1}};
    auto r = merge(snap, {SetInsert{3, h2}, SetClear{4}});
    ASSERT_TRUE(r.ok());
    const auto& s = r.value.as_set();
    ASSERT_EQ(s.elements.size(), 1u);
    EXPECT_EQ(s.elements[0].tag, 5u);
    EXPECT_EQ(s.elements[0].hash, h1);
}

TEST(Merge, DeleteAppliedLast)
{
    auto r = merge(Bytestring{to_bytes("a")},
                   {StringSet{to_bytes("b")}, StringSet{to_bytes("b")}, Delete{}});
    ASSERT_TRUE(r.ok());
    EXPECT_TRUE(r.value.is_absent());
}

TEST(Merge, DeleteDoesNotMaskStringDisagreement)
{
    auto r = merge(Value::absent(),
                   {StringSet{to_bytes("a")}, StringSet{to_bytes("b")}, Delete{}});
    EXPECT_EQ(r.violation, Violation::BaseMismatch);
}

TEST(Merge, DeleteWithTwoKindsIsTypeConflict)
{
    auto r = merge(Value::absent(), {StringSet{to_bytes("a")}, Int64SetAdd{0, 1}, Delete{}});
    EXPECT_EQ(r.violation, Violation::TypeConflict);
}

TEST(Merge, ClearOnNonSetSnapshot)
{
    auto r = merge(Bytestring{to_bytes("cfg")}, {SetClear{3}});
    EXPECT_EQ(r.violation, Violation::TypeConflict);
}

TEST(Merge, SnapshotKindMismatch)
{
    auto r = merge(NonnegInt64{5}, {StringSet{to_bytes("x")}});
    EXPECT_EQ(r.violation, Violation::TypeConflict);
}

TEST(Merge, BaseOverridesSnapshotValue)
{
    // int64_set_add semantics: the agreed base replaces the stored value.
    auto r = merge(NonnegInt64{50}, {Int64SetAdd{100, -70}});
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(r.value.as_int().value, 30);
}

TEST(Merge, BaseMismatch)
{
    auto r = merge(NonnegInt64{50}, {Int64SetAdd{50, 1}, Int64SetAdd{51, 1}});
    EXPECT_EQ(r.violation, Violation::BaseMismatch);
}

TEST(Merge, DuplicateHashInBlock)
{
    Hash32 h = test::h("dup");
    auto r = merge(Value::absent(), {SetInsert{1, h}, SetInsert{2, h}});
    EXPECT_EQ(r.violation, Violation::DuplicateHash);
}

TEST(Merge, DuplicateHashAgainstSnapshot)
{
    Hash32 h = test::h("present");
    OrderedSet snap;
    snap.elements = {{7, h}};
    auto r = merge(snap, {SetInsert{9, h}});
    EXPECT_EQ(r.violation, Violation::DuplicateHash);
}

TEST(Merge, SetCapacityUsesSnapshotLimit)
{
    Rng rng(3);
    OrderedSet snap;
    snap.limit = 4;
    for (uint64_t i = 0; i < 4; ++i)
        snap.elements.push_back({i, rng.hash()});
    std::sort(snap.elements.begin(), snap.elements.end());

    // A limit increase in the same block does not open capacity, nor does a clear.
    auto r = merge(snap, {SetLimitIncrease{10}, SetClear{100}, SetInsert{5, rng.hash()}});
    EXPECT_EQ(r.violation, Violation::SetFull);

    auto r2 = merge(snap, {SetLimitIncrease{10}, SetClear{100}});
    ASSERT_TRUE(r2.ok());
    EXPECT_TRUE(r2.value.as_set().elements.empty());
    EXPECT_EQ(r2.value.as_set().limit, 14);
}

TEST(Merge, LimitIncreaseSaturates)
{
    OrderedSet snap;
    snap.limit = 65000;
    auto r = merge(snap, {SetLimitIncrease{60000}, SetLimitIncrease{60000}});
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(r.value.as_set().limit, kMaxSetLimit);
}

TEST(Merge, AddOverflow)
{
    auto r = merge(Value::absent(), {Int64SetAdd{INT64_MAX - 1, 1}, Int64SetAdd{INT64_MAX - 1, 1}});
    EXPECT_EQ(r.violation, Violation::Overflow);
}

TEST(Merge, EmptyDeltasLeaveSnapshot)
{
    auto r = merge(NonnegInt64{17}, {});
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(r.value.as_int().value, 17);
}

TEST(Merge, DeleteOfAbsentKey)
{
    auto r = merge(Value::absent(), {Delete{}, Delete{}});
    ASSERT_TRUE(r.ok());
    EXPECT_TRUE(r.value.is_absent());
}

TEST(MergeProperty, PermutationInvariance)
{
    Rng rng(1001);
    for (int iter = 0; iter < 600; ++iter) {
        auto kind = ValueKind(1 + rng.below(3));
        Value snap = rng.chance(0.3) ? Value::absent() : test::random_value(rng, kind);
        auto deltas = test::random_deltas(rng, kind, snap);
        auto baseline = merge_key(snap, deltas);
        for (int p = 0; p < 20; ++p) {
            std::shuffle(deltas.begin(), deltas.end(), rng.engine());
            auto r = merge_key(snap, deltas);
            ASSERT_EQ(r.violation, baseline.violation);
            ASSERT_EQ(r.value, baseline.value);
        }
    }
}

TEST(MergeProperty, SubsetMonotonicityOfReservations)
{
    // If sum(|negative deltas|) <= base, every subset satisfies it too.
    Rng rng(1002);
    for (int iter = 0; iter < 300; ++iter) {
        int64_t base = rng.i64_in(0, 500);
        std::vector<Delta> deltas;
        size_t n = 1 + rng.below(8);
        for (size_t i = 0; i < n; ++i)
            deltas.push_back(Int64SetAdd{base, rng.i64_in(-100, 100)});
        uint64_t total_sub = 0;
        for (const auto& d : deltas) {
            int64_t v = std::get<Int64SetAdd>(d).delta;
            if (v < 0)
                total_sub += uint64_t(-v);
        }
        if (total_sub > uint64_t(base))
            continue;
        uint32_t mask = uint32_t(rng.u64()) & ((1u << n) - 1);
        std::vector<Delta> subset;
        for (size_t i = 0; i < n; ++i)
            if (mask & (1u << i))
                subset.push_back(deltas[i]);
        auto r = merge_key(NonnegInt64{base}, subset);
        ASSERT_TRUE(r.ok());
        ASSERT_GE(r.value.is_absent() ? 0 : r.value.as_int().value, 0);
    }
}

TEST(MergeProperty, SetResolutionMatchesOracle)
{
    Rng rng(1003);
    for (int iter = 0; iter < 2000; ++iter) {
        Value snap = rng.chance(0.3) ? Value::absent()
                                     : Value(test::random_set(rng, 5, uint16_t(4 + rng.below(8))));
        auto deltas = test::random_deltas(rng, ValueKind::OrderedSet, snap, 8);
        auto got = merge_key(snap, deltas);
        auto want = test::oracle_merge(snap, deltas);
        ASSERT_EQ(got.ok(), want.ok());
        if (got.ok())
            ASSERT_EQ(got.value, want.value);
    }
}

TEST(MergeProperty, AgreesWithOracleAllKinds)
{
    Rng rng(1004);
    for (int iter = 0; iter < 3000; ++iter) {
        auto kind = ValueKind(1 + rng.below(3));
        Value snap = rng.chance(0.3) ? Value::absent() : test::random_value(rng, kind);
        auto deltas = test::random_deltas(rng, kind, snap);
        auto got = merge_key(snap, deltas);
        auto want = test::oracle_merge(snap, deltas);
        ASSERT_EQ(got.ok(), want.ok()) << violation_name(got.violation) << " vs "
                                       << violation_name(want.violation);
        if (got.ok())
            ASSERT_EQ(got.value, want.value);
        else
            ASSERT_EQ(got.violation, want.violation);
    }
}
