// Copyright 2026 The Commute Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <thread>

#include "commute/bytes.hpp"
#include "commute/crypto.hpp"

namespace commute {

// Merkle-Patricia trie over fixed-length keys (4-bit branching, path
// compression). Keys of one trie share a length; leaves hold opaque payloads.
// The root hash depends only on the key->payload mapping.

using Nibbles = std::vector<uint8_t>;

inline Nibbles to_nibbles(BytesView bytes)
{
    Nibbles out;
    out.reserve(bytes.size() * 2);
    for (uint8_t b : bytes) {
        out.push_back(b >> 4);
        out.push_back(b & 0xf);
    }
    return out;
}

/// Stack-allocated nibble expansion for keys up to 64 bytes; the walk paths
/// run once per storage access, so they stay off the heap.
struct NibbleBuf {
    std::array<uint8_t, 128> buf;
    size_t n = 0;

    explicit NibbleBuf(BytesView bytes)
    {
        for (uint8_t b : bytes) {
            buf[n++] = b >> 4;
            buf[n++] = b & 0xf;
        }
    }

    std::span<const uint8_t> span() const { return {buf.data(), n}; }
};

inline Bytes nibbles_to_bytes(std::span<const uint8_t> nibs)
{
    Bytes out((nibs.size() + 1) / 2, 0);
    for (size_t i = 0; i < nibs.size(); ++i) {
        if (i % 2 == 0)
            out[i / 2] = uint8_t(nibs[i] << 4);
        else
            out[i / 2] |= nibs[i];
    }
    return out;
}

struct TrieNode {
    enum class Kind : uint8_t { Leaf = 0, Ext = 1, Branch = 2 };
    using Ptr = std::unique_ptr<TrieNode>;
    using Kids = std::array<Ptr, 16>;

    Kind kind;
    bool hash_valid = false;
    Hash32 hash{};
    uint64_t persist_id = 0;  // id of the last log record for this node
    Nibbles path;             // leaf / ext
    Bytes payload;            // leaf
    Ptr child;                // ext
    std::unique_ptr<Kids> kids;  // branch

    static Ptr leaf(Nibbles p, Bytes data)
    {
        auto n = std::make_unique<TrieNode>();
        n->kind = Kind::Leaf;
        n->path = std::move(p);
        n->payload = std::move(data);
        return n;
    }

    static Ptr ext(Nibbles p, Ptr c)
    {
        auto n = std::make_unique<TrieNode>();
        n->kind = Kind::Ext;
        n->path = std::move(p);
        n->child = std::move(c);
        return n;
    }

    static Ptr branch()
    {
        auto n = std::make_unique<TrieNode>();
        n->kind = Kind::Branch;
        n->kids = std::make_unique<Kids>();
        return n;
    }

    int kid_count() const
    {
        int c = 0;
        for (const auto& k : *kids)
            c += k != nullptr;
        return c;
    }

    Bytes encode() const
    {
        Bytes out;
        out.push_back(uint8_t(kind));
        switch (kind) {
        case Kind::Leaf: {
            put_u16be(out, uint16_t(path.size()));
            Bytes packed = nibbles_to_bytes(path);
            out.insert(out.end(), packed.begin(), packed.end());
            put_u32be(out, uint32_t(payload.size()));
            out.insert(out.end(), payload.begin(), payload.end());
            break;
        }
        case Kind::Ext: {
            put_u16be(out, uint16_t(path.size()));
            Bytes packed = nibbles_to_bytes(path);
            out.insert(out.end(), packed.begin(), packed.end());
            out.insert(out.end(), child->hash.begin(), child->hash.end());
            break;
        }
        case Kind::Branch: {
            uint16_t bitmap = 0;
            for (int i = 0; i < 16; ++i)
                if ((*kids)[i])
                    bitmap |= uint16_t(1) << i;
            put_u16be(out, bitmap);
            for (int i = 0; i < 16; ++i)
                if ((*kids)[i])
                    out.insert(out.end(), (*kids)[i]->hash.begin(), (*kids)[i]->hash.end());
            break;
        }
        }
        return out;
    }

    Ptr clone() const
    {
        auto n = std::make_unique<TrieNode>();
        n->kind = kind;
        n->hash_valid = hash_valid;
        n->hash = hash;
        n->persist_id = persist_id;
        n->path = path;
        n->payload = payload;
        if (child)
            n->child = child->clone();
        if (kids) {
            n->kids = std::make_unique<Kids>();
            for (int i = 0; i < 16; ++i)
                if ((*kids)[i])
                    (*n->kids)[i] = (*kids)[i]->clone();
        }
        return n;
    }
};

class Trie {
  public:
    explicit Trie(size_t key_bytes) : key_bytes_(key_bytes) {}

    Trie(Trie&&) = default;
    Trie& operator=(Trie&&) = default;

    size_t key_bytes() const { return key_bytes_; }
    size_t size() const { return size_; }

    static Hash32 empty_root_hash()
    {
        static const Hash32 h = hash32(BytesView((const uint8_t*)"\x03", 1));
        return h;
    }

    void put(BytesView key, Bytes payload)
    {
        NibbleBuf nibs(key);
        put_rec(root_, nibs.span(), std::move(payload));
    }

    void erase(BytesView key)
    {
        NibbleBuf nibs(key);
        erase_rec(root_, nibs.span());
    }

    const Bytes* get(BytesView key) const
    {
        NibbleBuf nibs(key);
        std::span<const uint8_t> rest = nibs.span();
        const TrieNode* node = root_.get();
        while (node) {
            switch (node->kind) {
            case TrieNode::Kind::Leaf:
                if (rest.size() == node->path.size() &&
                    std::equal(rest.begin(), rest.end(), node->path.begin()))
                    return &node->payload;
                return nullptr;
            case TrieNode::Kind::Ext:
                if (rest.size() < node->path.size() ||
                    !std::equal(node->path.begin(), node->path.end(), rest.begin()))
                    return nullptr;
                rest = rest.subspan(node->path.size());
                node = node->child.get();
                break;
            case TrieNode::Kind::Branch:
                if (rest.empty())
                    return nullptr;
                node = (*node->kids)[rest[0]].get();
                rest = rest.subspan(1);
                break;
            }
        }
        return nullptr;
    }

    /// Recomputes dirty subtree hashes and returns the root hash.
    /// `dirty_out`, when given, receives every recomputed node in post-order
    /// (children before parents), suitable for log emission.
    Hash32 root_hash(unsigned threads = 1, std::vector<TrieNode*>* dirty_out = nullptr)
    {
        if (!root_)
            return empty_root_hash();
        if (threads > 1 && root_->kind == TrieNode::Kind::Branch && !root_->hash_valid) {
            // Hash dirty top-level subtrees in parallel; each task owns a
            // disjoint subtree, so this is safe and the result is pure.
            std::vector<TrieNode*> tasks;
            for (auto& kid : *root_->kids)
                if (kid && !kid->hash_valid)
                    tasks.push_back(kid.get());
            std::vector<std::vector<TrieNode*>> logs(tasks.size());
            std::atomic<size_t> next{0};
            auto work = [&] {
                for (;;) {
                    size_t i = next.fetch_add(1);
                    if (i >= tasks.size())
                        return;
                    hash_rec(tasks[i], dirty_out ? &logs[i] : nullptr);
                }
            };
            std::vector<std::thread> pool;
            for (unsigned t = 1; t < threads; ++t)
                pool.emplace_back(work);
            work();
            for (auto& t : pool)
                t.join();
            if (dirty_out)
                for (auto& log : logs)
                    dirty_out->insert(dirty_out->end(), log.begin(), log.end());
            // Children done; the remaining work is the root itself.
        }
        hash_rec(root_.get(), dirty_out);
        return root_->hash;
    }

    /// Visits (key, payload) pairs in ascending key order.
    void for_each(const std::function<void(BytesView key, const Bytes& payload)>& fn) const
    {
        Nibbles acc;
        for_each_rec(root_.get(), acc, fn);
    }

    Trie clone() const
    {
        Trie t(key_bytes_);
        t.size_ = size_;
        if (root_)
            t.root_ = root_->clone();
        return t;
    }

    TrieNode* root() { return root_.get(); }
    const TrieNode* root() const { return root_.get(); }

    /// Used by log replay to materialize a reconstructed trie.
    static Trie from_root(size_t key_bytes, TrieNode::Ptr root, size_t leaf_count)
    {
        Trie t(key_bytes);
        t.root_ = std::move(root);
        t.size_ = leaf_count;
        return t;
    }

  private:
    static size_t common_prefix(std::span<const uint8_t> a, std::span<const uint8_t> b)
    {
        size_t n = std::min(a.size(), b.size());
        size_t i = 0;
        while (i < n && a[i] == b[i])
            ++i;
        return i;
    }

    // Returns true when the subtree changed.
    bool put_rec(TrieNode::Ptr& slot, std::span<const uint8_t> rest, Bytes payload)
    {
        if (!slot) {
            slot = TrieNode::leaf(Nibbles(rest.begin(), rest.end()), std::move(payload));
            ++size_;
            return true;
        }
        TrieNode& node = *slot;
        switch (node.kind) {
        case TrieNode::Kind::Leaf: {
            size_t cp = common_prefix(node.path, rest);
            if (cp == node.path.size() && cp == rest.size()) {
                if (node.payload == payload)
                    return false;
                node.payload = std::move(payload);
                node.hash_valid = false;
                return true;
            }
            split(slot, cp);
            bool changed = put_rec(slot, rest, std::move(payload));
            if (changed)
                slot->hash_valid = false;
            return changed;
        }
        case TrieNode::Kind::Ext: {
            size_t cp = common_prefix(node.path, rest);
            if (cp == node.path.size()) {
                bool changed = put_rec(node.child, rest.subspan(cp), std::move(payload));
                if (changed)
                    node.hash_valid = false;
                return changed;
            }
            split(slot, cp);
            bool changed = put_rec(slot, rest, std::move(payload));
            if (changed)
                slot->hash_valid = false;
            return changed;
        }
        case TrieNode::Kind::Branch: {
            bool changed = put_rec((*node.kids)[rest[0]], rest.subspan(1), std::move(payload));
            if (changed)
                node.hash_valid = false;
            return changed;
        }
        }
        return false;
    }

    // Rebuilds `slot` as a branch (under a shared-prefix ext when cp > 0)
    // whose children partition the old node's content past the divergence.
    void split(TrieNode::Ptr& slot, size_t cp)
    {
        TrieNode::Ptr old = std::move(slot);
        Nibbles prefix(old->path.begin(), old->path.begin() + cp);
        uint8_t pivot = old->path[cp];
        Nibbles tail(old->path.begin() + cp + 1, old->path.end());

        auto br = TrieNode::branch();
        if (old->kind == TrieNode::Kind::Leaf) {
            old->path = std::move(tail);
            old->hash_valid = false;
            (*br->kids)[pivot] = std::move(old);
        } else {
            if (tail.empty()) {
                (*br->kids)[pivot] = std::move(old->child);
            } else {
                old->path = std::move(tail);
                old->hash_valid = false;
                (*br->kids)[pivot] = std::move(old);
            }
        }
        if (prefix.empty())
            slot = std::move(br);
        else
            slot = TrieNode::ext(std::move(prefix), std::move(br));
    }

    bool erase_rec(TrieNode::Ptr& slot, std::span<const uint8_t> rest)
    {
        if (!slot)
            return false;
        TrieNode& node = *slot;
        switch (node.kind) {
        case TrieNode::Kind::Leaf:
            if (rest.size() == node.path.size() &&
                std::equal(rest.begin(), rest.end(), node.path.begin())) {
                slot.reset();
                --size_;
                return true;
            }
            return false;
        case TrieNode::Kind::Ext: {
            if (rest.size() < node.path.size() ||
                !std::equal(node.path.begin(), node.path.end(), rest.begin()))
                return false;
            if (!erase_rec(node.child, rest.subspan(node.path.size())))
                return false;
            node.hash_valid = false;
            normalize_ext(slot);
            return true;
        }
        case TrieNode::Kind::Branch: {
            if (!erase_rec((*node.kids)[rest[0]], rest.subspan(1)))
                return false;
            node.hash_valid = false;
            normalize_branch(slot);
            return true;
        }
        }
        return false;
    }

    // A branch left with one child collapses into ext/leaf form.
    void normalize_branch(TrieNode::Ptr& slot)
    {
        if (slot->kid_count() >= 2)
            return;
        for (int i = 0; i < 16; ++i) {
            auto& kid = (*slot->kids)[i];
            if (!kid)
                continue;
            TrieNode::Ptr lone = std::move(kid);
            Nibbles joined{uint8_t(i)};
            if (lone->kind == TrieNode::Kind::Branch) {
                slot = TrieNode::ext(std::move(joined), std::move(lone));
            } else {
                joined.insert(joined.end(), lone->path.begin(), lone->path.end());
                lone->path = std::move(joined);
                lone->hash_valid = false;
                slot = std::move(lone);
            }
            return;
        }
        slot.reset();  // branch emptied entirely
    }

    // Ext whose child collapsed into ext/leaf form absorbs the child path.
    void normalize_ext(TrieNode::Ptr& slot)
    {
        TrieNode& node = *slot;
        if (!node.child) {
            slot.reset();
            return;
        }
        if (node.child->kind == TrieNode::Kind::Branch)
            return;
        TrieNode::Ptr inner = std::move(node.child);
        Nibbles joined = node.path;
        joined.insert(joined.end(), inner->path.begin(), inner->path.end());
        inner->path = std::move(joined);
        inner->hash_valid = false;
        slot = std::move(inner);
    }

    static void hash_rec(TrieNode* node, std::vector<TrieNode*>* dirty_out)
    {
        if (node->hash_valid)
            return;
        switch (node->kind) {
        case TrieNode::Kind::Leaf:
            break;
        case TrieNode::Kind::Ext:
            hash_rec(node->child.get(), dirty_out);
            break;
        case TrieNode::Kind::Branch:
            for (auto& kid : *node->kids)
                if (kid)
                    hash_rec(kid.get(), dirty_out);
            break;
        }
        node->hash = hash32(node->encode());
        node->hash_valid = true;
        if (dirty_out)
            dirty_out->push_back(node);
    }

    static void for_each_rec(const TrieNode* node, Nibbles& acc,
                             const std::function<void(BytesView, const Bytes&)>& fn)
    {
        if (!node)
            return;
        switch (node->kind) {
        case TrieNode::Kind::Leaf: {
            Nibbles full = acc;
            full.insert(full.end(), node->path.begin(), node->path.end());
            Bytes key = nibbles_to_bytes(full);
            fn(BytesView(key), node->payload);
            break;
        }
        case TrieNode::Kind::Ext: {
            size_t n = acc.size();
            acc.insert(acc.end(), node->path.begin(), node->path.end());
            for_each_rec(node->child.get(), acc, fn);
            acc.resize(n);
            break;
        }
        case TrieNode::Kind::Branch:
            for (int i = 0; i < 16; ++i)
                if ((*node->kids)[i]) {
                    acc.push_back(uint8_t(i));
                    for_each_rec((*node->kids)[i].get(), acc, fn);
                    acc.pop_back();
                }
            break;
        }
    }

    size_t key_bytes_;
    size_t size_ = 0;
    TrieNode::Ptr root_;
};

}  // namespace commute
