// Copyright 2026 The Commute Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

namespace commute {

using Bytes = std::vector<uint8_t>;
using BytesView = std::span<const uint8_t>;
using Hash32 = std::array<uint8_t, 32>;

inline Bytes to_bytes(std::string_view s)
{
    return Bytes(s.begin(), s.end());
}

inline void put_u16be(Bytes& out, uint16_t v)
{
    out.push_back(uint8_t(v >> 8));
    out.push_back(uint8_t(v));
}

inline void put_u32be(Bytes& out, uint32_t v)
{
    for (int i = 3; i >= 0; --i)
        out.push_back(uint8_t(v >> (8 * i)));
}

inline void put_u64be(Bytes& out, uint64_t v)
{
    for (int i = 7; i >= 0; --i)
        out.push_back(uint8_t(v >> (8 * i)));
}

inline void put_i64be(Bytes& out, int64_t v)
{
    put_u64be(out, uint64_t(v));
}

inline uint16_t get_u16be(const uint8_t* p)
{
    return uint16_t(p[0]) << 8 | p[1];
}

inline uint32_t get_u32be(const uint8_t* p)
{
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v = v << 8 | p[i];
    return v;
}

inline uint64_t get_u64be(const uint8_t* p)
{
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v = v << 8 | p[i];
    return v;
}

inline std::string hex(BytesView b)
{
    static const char* digits = "0123456789abcdef";
    std::string s;
    s.reserve(b.size() * 2);
    for (uint8_t c : b) {
        s.push_back(digits[c >> 4]);
        s.push_back(digits[c & 0xf]);
    }
    return s;
}

inline std::string hex(const Hash32& h)
{
    return hex(BytesView(h.data(), h.size()));
}

// Sequential reader over a byte buffer; throws on underrun.
class ByteReader {
  public:
    explicit ByteReader(BytesView data) : data_(data) {}

    size_t remaining() const { return data_.size() - pos_; }
    size_t position() const { return pos_; }
    bool done() const { return pos_ == data_.size(); }

    uint8_t u8() { return take(1)[0]; }
    uint16_t u16be() { return get_u16be(take(2)); }
    uint32_t u32be() { return get_u32be(take(4)); }
    uint64_t u64be() { return get_u64be(take(8)); }
    int64_t i64be() { return int64_t(u64be()); }

    BytesView bytes(size_t n)
    {
        const uint8_t* p = take(n);
        return BytesView(p, n);
    }

    Hash32 hash32()
    {
        Hash32 h;
        std::memcpy(h.data(), take(32), 32);
        return h;
    }

  private:
    const uint8_t* take(size_t n)
    {
        if (remaining() < n)
            throw std::out_of_range("byte reader underrun");
        const uint8_t* p = data_.data() + pos_;
        pos_ += n;
        return p;
    }

    BytesView data_;
    size_t pos_ = 0;
};

}  // namespace commute
