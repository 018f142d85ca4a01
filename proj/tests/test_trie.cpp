// Copyright 2026 The Commute Authors.
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <map>
#include <set>

#include "commute/trie.hpp"
#include "support.hpp"

using namespace commute;
using commute::test::Rng;

namespace {

Bytes key64(Rng& rng)
{
    Bytes k(64);
    for (auto& c : k)
        c = uint8_t(rng.u64());
    return k;
}

Bytes key_from(std::string_view s)
{
    Bytes k(64, 0);
    std::copy(s.begin(), s.end(), k.begin());
    return k;
}

Hash32 rebuild_root(const std::map<Bytes, Bytes>& content)
{
    Trie t(64);
    for (const auto& [k, v] : content)
        t.put(k, v);
    return t.root_hash();
}

}  // namespace

TEST(Trie, PutThenGet)
{
    Trie t(64);
    Bytes k = key_from("alpha");
    t.put(k, to_bytes("payload"));
    ASSERT_NE(t.get(k), nullptr);
    EXPECT_EQ(*t.get(k), to_bytes("payload"));
    EXPECT_EQ(t.get(key_from("beta")), nullptr);
}

TEST(Trie, DeleteAbsentIsNoop)
{
    Trie t(64);
    t.put(key_from("a"), to_bytes("1"));
    Hash32 before = t.root_hash();
    t.erase(key_from("zzz"));
    EXPECT_EQ(t.root_hash(), before);
    EXPECT_EQ(t.size(), 1u);
}

TEST(Trie, PutOrderIrrelevant)
{
    Trie a(64), b(64);
    a.put(key_from("k1"), to_bytes("v1"));
    a.put(key_from("k2"), to_bytes("v2"));
    b.put(key_from("k2"), to_bytes("v2"));
    b.put(key_from("k1"), to_bytes("v1"));
    EXPECT_EQ(a.root_hash(), b.root_hash());
}

TEST(Trie, EmptyRootSentinel)
{
    Trie t(64);
    uint8_t enc = 0x03;
    EXPECT_EQ(t.root_hash(), hash32(BytesView(&enc, 1)));
    EXPECT_EQ(t.root_hash(), Trie::empty_root_hash());
}

TEST(Trie, IncrementalEqualsRebuild)
{
    Rng rng(11);
    Trie t(64);
    std::map<Bytes, Bytes> content;
    std::vector<Bytes> keys;
    for (int round = 0; round < 40; ++round) {
        for (int i = 0; i < 25; ++i) {
            if (!keys.empty() && rng.chance(0.25)) {
                const Bytes& k = keys[rng.below(keys.size())];
                t.erase(k);
                content.erase(k);
            } else {
                Bytes k = (!keys.empty() && rng.chance(0.3)) ? keys[rng.below(keys.size())]
                                                             : key64(rng);
                Bytes v = rng.bytes(20);
                t.put(k, v);
                content[k] = v;
                keys.push_back(k);
            }
        }
        ASSERT_EQ(t.root_hash(), rebuild_root(content));
        ASSERT_EQ(t.size(), content.size());
    }
}

TEST(Trie, RootsDifferOnOneLeaf)
{
    Trie a(64), b(64);
    a.put(key_from("k"), to_bytes("x"));
    b.put(key_from("k"), to_bytes("y"));
    EXPECT_NE(a.root_hash(), b.root_hash());
}

TEST(Trie, UnchangedPutKeepsHashClean)
{
    Trie t(64);
    t.put(key_from("k"), to_bytes("v"));
    Hash32 r = t.root_hash();
    std::vector<TrieNode*> dirty;
    t.put(key_from("k"), to_bytes("v"));
    EXPECT_EQ(t.root_hash(1, &dirty), r);
    EXPECT_TRUE(dirty.empty());
}

TEST(Trie, HistoryIndependence)
{
    Rng rng(12);
    for (int iter = 0; iter < 30; ++iter) {
        std::map<Bytes, Bytes> content;
        size_t n = 1 + rng.below(40);
        for (size_t i = 0; i < n; ++i)
            content[key64(rng)] = rng.bytes(12);

        std::vector<std::pair<Bytes, Bytes>> items(content.begin(), content.end());
        Hash32 want = rebuild_root(content);
        for (int perm = 0; perm < 5; ++perm) {
            std::shuffle(items.begin(), items.end(), rng.engine());
            Trie t(64);
            // Insert noise keys, then remove the ones not in the mapping.
            std::vector<Bytes> noise;
            for (int i = 0; i < 5; ++i) {
                noise.push_back(key64(rng));
                t.put(noise.back(), to_bytes("noise"));
            }
            for (const auto& [k, v] : items)
                t.put(k, v);
            for (const auto& k : noise)
                if (!content.count(k))
                    t.erase(k);
            ASSERT_EQ(t.root_hash(), want);
        }
    }
}

TEST(Trie, ForEachSortedAndComplete)
{
    Rng rng(13);
    Trie t(64);
    std::map<Bytes, Bytes> content;
    for (int i = 0; i < 200; ++i) {
        Bytes k = key64(rng);
        content[k] = rng.bytes(8);
        t.put(k, content[k]);
    }
    std::vector<Bytes> visited;
    t.for_each([&](BytesView k, const Bytes& v) {
        Bytes key(k.begin(), k.end());
        ASSERT_EQ(content.at(key), v);
        visited.push_back(key);
    });
    ASSERT_EQ(visited.size(), content.size());
    EXPECT_TRUE(std::is_sorted(visited.begin(), visited.end()));
}

TEST(Trie, TouchedTwiceIteratesOnce)
{
    Trie t(64);
    t.put(key_from("k1"), {});
    t.put(key_from("k2"), {});
    t.put(key_from("k1"), {});
    size_t count = 0;
    t.for_each([&](BytesView, const Bytes&) { ++count; });
    EXPECT_EQ(count, 2u);
    EXPECT_EQ(t.size(), 2u);

    Trie empty(64);
    size_t none = 0;
    empty.for_each([&](BytesView, const Bytes&) { ++none; });
    EXPECT_EQ(none, 0u);
}

TEST(Trie, ParallelHashMatchesSerial)
{
    Rng rng(14);
    Trie serial(64), parallel(64);
    for (int i = 0; i < 500; ++i) {
        Bytes k = key64(rng);
        Bytes v = rng.bytes(16);
        serial.put(k, v);
        parallel.put(k, v);
    }
    EXPECT_EQ(serial.root_hash(1), parallel.root_hash(8));
}

TEST(Trie, CloneIsIndependent)
{
    Trie t(64);
    t.put(key_from("k"), to_bytes("v"));
    Trie c = t.clone();
    Hash32 r = t.root_hash();
    c.put(key_from("k2"), to_bytes("v2"));
    EXPECT_EQ(t.root_hash(), r);
    EXPECT_NE(c.root_hash(), r);
}

TEST(Trie, ShortKeysWork)
{
    Rng rng(15);
    Trie t(32);
    std::map<Bytes, Bytes> content;
    for (int i = 0; i < 100; ++i) {
        Bytes k(32);
        for (auto& c : k)
            c = uint8_t(rng.u64());
        content[k] = rng.bytes(6);
        t.put(k, content[k]);
    }
    for (const auto& [k, v] : content)
        ASSERT_EQ(*t.get(k), v);
}
