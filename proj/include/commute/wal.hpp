// Copyright 2026 The Commute Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <zlib.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>

#include "commute/trie.hpp"

namespace commute {

// Append-only persistence for the state trie: a block log (canonical block
// encodings) and a node log (every changed trie node, at most once per
// block). Node records are written children-first; each block's section ends
// with a root marker naming the block's root node id. Records are
// length-prefixed and carry a CRC32, so replay fails deterministically at
// the first corrupt or truncated record.

inline constexpr uint8_t kNodeRecLeaf = 0;
inline constexpr uint8_t kNodeRecExt = 1;
inline constexpr uint8_t kNodeRecBranch = 2;
inline constexpr uint8_t kNodeRecRootMarker = 3;

namespace waldetail {

inline uint32_t crc(BytesView data)
{
    return uint32_t(::crc32(0, data.data(), uInt(data.size())));
}

inline void write_record(std::ofstream& out, BytesView payload)
{
    Bytes header;
    put_u32be(header, uint32_t(payload.size()));
    put_u32be(header, crc(payload));
    out.write(reinterpret_cast<const char*>(header.data()), std::streamsize(header.size()));
    out.write(reinterpret_cast<const char*>(payload.data()), std::streamsize(payload.size()));
}

struct RecordStream {
    Bytes data;
    size_t pos = 0;

    std::optional<Bytes> next(std::string& err)
    {
        if (pos == data.size())
            return std::nullopt;
        if (data.size() - pos < 8) {
            err = "truncated record header at offset " + std::to_string(pos);
            return std::nullopt;
        }
        uint32_t len = get_u32be(&data[pos]);
        uint32_t want = get_u32be(&data[pos + 4]);
        if (data.size() - pos - 8 < len) {
            err = "truncated record body at offset " + std::to_string(pos);
            return std::nullopt;
        }
        Bytes payload(data.begin() + long(pos) + 8, data.begin() + long(pos) + 8 + len);
        if (crc(payload) != want) {
            err = "checksum mismatch at offset " + std::to_string(pos);
            return std::nullopt;
        }
        pos += 8 + len;
        return payload;
    }
};

inline Bytes read_file(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace waldetail

struct ReplayedNode {
    uint8_t kind;
    Nibbles path;
    Bytes payload;
    uint64_t child = 0;
    std::vector<std::pair<uint8_t, uint64_t>> kids;
};

struct ReplayResult {
    bool ok = false;
    std::string error;
    uint64_t blocks = 0;
    uint64_t node_records = 0;
    Hash32 root{};
    std::optional<Trie> trie;
};

class Wal {
  public:
    explicit Wal(const std::filesystem::path& dir) : dir_(dir)
    {
        std::filesystem::create_directories(dir);
        blocks_.open(dir / "blocks.log", std::ios::binary | std::ios::trunc);
        nodes_.open(dir / "nodes.log", std::ios::binary | std::ios::trunc);
        if (!blocks_ || !nodes_)
            throw std::runtime_error("cannot open log files in " + dir.string());
    }

    /// Logs one block: its canonical encoding, records for every node in
    /// `dirty` (children-first order required), and the root marker.
    /// Assigns each dirty node a fresh unique identifier.
    void persist_block(uint64_t block_number, BytesView block_encoding,
                       std::span<TrieNode* const> dirty, const TrieNode* root)
    {
        waldetail::write_record(blocks_, block_encoding);
        for (TrieNode* node : dirty) {
            node->persist_id = ++next_id_;
            Bytes payload;
            payload.push_back(uint8_t(node->kind));
            put_u64be(payload, node->persist_id);
            put_u64be(payload, block_number);
            switch (node->kind) {
            case TrieNode::Kind::Leaf: {
                put_u16be(payload, uint16_t(node->path.size()));
                Bytes packed = nibbles_to_bytes(node->path);
                payload.insert(payload.end(), packed.begin(), packed.end());
                put_u32be(payload, uint32_t(node->payload.size()));
                payload.insert(payload.end(), node->payload.begin(), node->payload.end());
                break;
            }
            case TrieNode::Kind::Ext: {
                put_u16be(payload, uint16_t(node->path.size()));
                Bytes packed = nibbles_to_bytes(node->path);
                payload.insert(payload.end(), packed.begin(), packed.end());
                put_u64be(payload, node->child->persist_id);
                break;
            }
            case TrieNode::Kind::Branch: {
                uint16_t bitmap = 0;
                for (int i = 0; i < 16; ++i)
                    if ((*node->kids)[i])
                        bitmap |= uint16_t(1) << i;
                put_u16be(payload, bitmap);
                for (int i = 0; i < 16; ++i)
                    if ((*node->kids)[i])
                        put_u64be(payload, (*node->kids)[i]->persist_id);
                break;
            }
            }
            waldetail::write_record(nodes_, payload);
        }
        Bytes marker;
        marker.push_back(kNodeRecRootMarker);
        put_u64be(marker, root ? root->persist_id : 0);
        put_u64be(marker, block_number);
        waldetail::write_record(nodes_, marker);
        blocks_.flush();
        nodes_.flush();
    }

    uint64_t records_written() const { return next_id_; }
    const std::filesystem::path& dir() const { return dir_; }

    /// Reads both logs and reconstructs the final state trie.
    static ReplayResult replay(const std::filesystem::path& dir, size_t key_bytes = 64)
    {
        ReplayResult res;

        waldetail::RecordStream blocks{waldetail::read_file(dir / "blocks.log")};
        std::string err;
        while (auto rec = blocks.next(err))
            ++res.blocks;
        if (!err.empty()) {
            res.error = "blocks.log: " + err;
            return res;
        }

        waldetail::RecordStream nodes{waldetail::read_file(dir / "nodes.log")};
        std::map<uint64_t, ReplayedNode> by_id;
        uint64_t root_id = 0;
        bool have_marker = false;
        while (auto rec = nodes.next(err)) {
            ByteReader r(*rec);
            uint8_t kind = r.u8();
            uint64_t id = r.u64be();
            r.u64be();  // block number
            if (kind == kNodeRecRootMarker) {
                root_id = id;
                have_marker = true;
                continue;
            }
            ReplayedNode n;
            n.kind = kind;
            ++res.node_records;
            if (kind == kNodeRecLeaf || kind == kNodeRecExt) {
                uint16_t nibs = r.u16be();
                auto packed = r.bytes((nibs + 1) / 2);
                for (uint16_t i = 0; i < nibs; ++i)
                    n.path.push_back(i % 2 == 0 ? packed[i / 2] >> 4 : packed[i / 2] & 0xf);
                if (kind == kNodeRecLeaf) {
                    uint32_t len = r.u32be();
                    auto b = r.bytes(len);
                    n.payload.assign(b.begin(), b.end());
                } else {
                    n.child = r.u64be();
                }
            } else if (kind == kNodeRecBranch) {
                uint16_t bitmap = r.u16be();
                for (int i = 0; i < 16; ++i)
                    if (bitmap & (uint16_t(1) << i))
                        n.kids.emplace_back(uint8_t(i), r.u64be());
            } else {
                res.error = "nodes.log: unknown record kind";
                return res;
            }
            by_id[id] = std::move(n);
        }
        if (!err.empty()) {
            res.error = "nodes.log: " + err;
            return res;
        }
        if (!have_marker && res.blocks > 0) {
            res.error = "nodes.log: missing root marker";
            return res;
        }

        size_t leaves = 0;
        TrieNode::Ptr root;
        if (root_id != 0) {
            try {
                root = build(by_id, root_id, leaves);
            } catch (const std::exception& e) {
                res.error = e.what();
                return res;
            }
        }
        Trie t = Trie::from_root(key_bytes, std::move(root), leaves);
        res.root = t.root_hash();
        res.trie = std::move(t);
        res.ok = true;
        return res;
    }

  private:
    static TrieNode::Ptr build(const std::map<uint64_t, ReplayedNode>& by_id, uint64_t id,
                               size_t& leaves)
    {
        auto it = by_id.find(id);
        if (it == by_id.end())
            throw std::runtime_error("dangling node id " + std::to_string(id));
        const ReplayedNode& rec = it->second;
        switch (rec.kind) {
        case kNodeRecLeaf:
            ++leaves;
            return TrieNode::leaf(rec.path, rec.payload);
        case kNodeRecExt:
            return TrieNode::ext(rec.path, build(by_id, rec.child, leaves));
        default: {
            auto br = TrieNode::branch();
            for (auto [nib, kid_id] : rec.kids)
                (*br->kids)[nib] = build(by_id, kid_id, leaves);
            return br;
        }
        }
    }

    std::filesystem::path dir_;
    std::ofstream blocks_;
    std::ofstream nodes_;
    uint64_t next_id_ = 0;
};

}  // namespace commute
