// Copyright 2026 The Commute Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Shared test helpers: seeded generators and brute-force oracles kept
// deliberately independent of the library's merge/finalize code paths.

#include <map>
#include <random>
#include <set>

#include "commute/crypto.hpp"
#include "commute/merge.hpp"

namespace commute::test {

class Rng {
  public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t u64() { return eng_(); }
    uint64_t below(uint64_t n) { return n ? eng_() % n : 0; }
    int64_t i64_in(int64_t lo, int64_t hi)
    {
        return lo + int64_t(below(uint64_t(hi - lo + 1)));
    }
    bool chance(double p) { return std::uniform_real_distribution<>(0, 1)(eng_) < p; }

    Hash32 hash()
    {
        Hash32 h{};
        for (int i = 0; i < 4; ++i) {
            uint64_t v = u64();
            std::memcpy(h.data() + 8 * i, &v, 8);
        }
        return h;
    }

    Address address()
    {
        Address a;
        a.contract = hash();
        a.local = hash();
        return a;
    }

    Bytes bytes(size_t max_len)
    {
        Bytes b(below(max_len + 1));
        for (auto& c : b)
            c = uint8_t(u64());
        return b;
    }

    std::mt19937_64& engine() { return eng_; }

  private:
    std::mt19937_64 eng_;
};

inline OrderedSet random_set(Rng& rng, size_t max_elems, uint16_t limit = kDefaultSetLimit)
{
    std::set<SetElement> elems;
    size_t n = rng.below(max_elems + 1);
    while (elems.size() < n) {
        SetElement e;
        e.tag = rng.below(16);
        e.hash = rng.hash();
        elems.insert(e);
    }
    OrderedSet s;
    s.elements.assign(elems.begin(), elems.end());
    s.limit = limit;
    return s;
}

inline Value random_value(Rng& rng, ValueKind kind)
{
    switch (kind) {
    case ValueKind::Bytestring:
        return Bytestring{rng.bytes(24)};
    case ValueKind::NonnegInt64:
        return NonnegInt64{rng.i64_in(0, 1000)};
    case ValueKind::OrderedSet:
        return random_set(rng, 6);
    }
    return Value::absent();
}

// Random delta multisets biased toward agreeing parameters so both valid
// merges and each violation class get exercised.
inline std::vector<Delta> random_deltas(Rng& rng, ValueKind kind, const Value& snapshot,
                                        size_t max_n = 6)
{
    std::vector<Delta> out;
    size_t n = 1 + rng.below(max_n);
    int64_t base = rng.chance(0.8) ? rng.i64_in(0, 100) : rng.i64_in(-50, 100);
    Bytes payload = rng.bytes(8);
    std::vector<Hash32> pool;
    if (!snapshot.is_absent() && snapshot.kind() == ValueKind::OrderedSet)
        for (const auto& e : snapshot.as_set().elements)
            pool.push_back(e.hash);
    for (size_t i = 0; i < n; ++i) {
        switch (kind) {
        case ValueKind::Bytestring:
            out.push_back(StringSet{rng.chance(0.85) ? payload : rng.bytes(8)});
            break;
        case ValueKind::NonnegInt64: {
            int64_t b = rng.chance(0.9) ? base : base + 1;
            out.push_back(Int64SetAdd{b, rng.i64_in(-60, 60)});
            break;
        }
        case ValueKind::OrderedSet:
            switch (rng.below(4)) {
            case 0: {
                Hash32 h = (!pool.empty() && rng.chance(0.2)) ? pool[rng.below(pool.size())]
                                                              : rng.hash();
                if (rng.chance(0.15) && !out.empty())
                    if (const auto* prev = std::get_if<SetInsert>(&out.back()))
                        h = prev->hash;
                out.push_back(SetInsert{rng.below(16), h});
                break;
            }
            case 1:
                out.push_back(SetClear{rng.below(16)});
                break;
            case 2:
                out.push_back(SetLimitIncrease{uint16_t(rng.below(100))});
                break;
            default:
                out.push_back(SetInsert{rng.below(16), rng.hash()});
            }
            break;
        }
    }
    if (rng.chance(0.1))
        out.push_back(Delete{});
    return out;
}

// Brute-force merge oracle. Follows the stated resolution order with plain
// containers and wide arithmetic; no code shared with merge_key.
inline MergeResult oracle_merge(const Value& snapshot, std::span<const Delta> deltas)
{
    std::set<ValueKind> kinds;
    bool deleted = false;
    for (const auto& d : deltas) {
        if (auto k = delta_kind(d))
            kinds.insert(*k);
        else
            deleted = true;
    }
    if (kinds.size() > 1)
        return MergeResult::fail(Violation::TypeConflict);
    if (kinds.empty())
        return MergeResult{Violation::None, deleted ? Value::absent() : snapshot};
    ValueKind kind = *kinds.begin();
    if (!snapshot.is_absent() && *snapshot.kind() != kind)
        return MergeResult::fail(Violation::TypeConflict);

    Value merged;
    if (kind == ValueKind::Bytestring) {
        std::set<Bytes> payloads;
        for (const auto& d : deltas)
            if (const auto* s = std::get_if<StringSet>(&d))
                payloads.insert(s->payload);
        if (payloads.size() > 1)
            return MergeResult::fail(Violation::BaseMismatch);
        merged = Bytestring{*payloads.begin()};
    } else if (kind == ValueKind::NonnegInt64) {
        std::set<int64_t> bases;
        __int128 pos = 0, neg = 0;
        for (const auto& d : deltas)
            if (const auto* a = std::get_if<Int64SetAdd>(&d)) {
                bases.insert(a->base);
                if (a->delta >= 0)
                    pos += a->delta;
                else
                    neg += -__int128(a->delta);
            }
        if (bases.size() > 1)
            return MergeResult::fail(Violation::BaseMismatch);
        int64_t x = *bases.begin();
        const __int128 u64max = __int128(UINT64_MAX);
        if (pos > u64max || pos > __int128(INT64_MAX) - x)
            return MergeResult::fail(Violation::Overflow);
        if (x >= 0) {
            if (neg > x)
                return MergeResult::fail(Violation::Nonnegativity);
        } else if (neg > 0) {
            return MergeResult::fail(Violation::Nonnegativity);
        }
        merged = NonnegInt64{int64_t(__int128(x) + pos - neg)};
    } else {
        OrderedSet base = snapshot.is_absent() ? OrderedSet{{}, kDefaultSetLimit}
                                               : snapshot.as_set();
        std::set<SetElement> content(base.elements.begin(), base.elements.end());
        std::set<Hash32> seen;
        for (const auto& e : base.elements)
            seen.insert(e.hash);
        size_t inserts = 0;
        uint64_t clear_to = 0;
        __int128 gain = 0;
        for (const auto& d : deltas) {
            if (const auto* ins = std::get_if<SetInsert>(&d)) {
                if (!seen.insert(ins->hash).second)
                    return MergeResult::fail(Violation::DuplicateHash);
                content.insert(SetElement{ins->tag, ins->hash});
                ++inserts;
            } else if (const auto* cl = std::get_if<SetClear>(&d)) {
                clear_to = std::max(clear_to, cl->threshold);
            } else if (const auto* li = std::get_if<SetLimitIncrease>(&d)) {
                gain += li->amount;
            }
        }
        if (base.elements.size() + inserts > base.limit)
            return MergeResult::fail(Violation::SetFull);
        OrderedSet result;
        for (const auto& e : content)
            if (e.tag >= clear_to)
                result.elements.push_back(e);
        result.limit = uint16_t(std::min<__int128>(kMaxSetLimit, base.limit + gain));
        merged = std::move(result);
    }
    if (deleted)
        return MergeResult{Violation::None, Value::absent()};
    return MergeResult{Violation::None, merged};
}

inline Hash32 h(std::string_view s)
{
    return hash32(s);
}

}  // namespace commute::test

#include "commute/host.hpp"

namespace commute::test {

// A contract that replays an encoded operation list through the host API,
// so tests can drive arbitrary delta patterns through the engine.
struct RawOp {
    LocalKey key{};
    Delta delta;
};

inline Bytes encode_raw_ops(std::span<const RawOp> ops)
{
    Bytes out;
    for (const auto& op : ops) {
        std::visit(
            [&](const auto& d) {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, StringSet>) {
                    out.push_back(0);
                    out.insert(out.end(), op.key.begin(), op.key.end());
                    put_u32be(out, uint32_t(d.payload.size()));
                    out.insert(out.end(), d.payload.begin(), d.payload.end());
                } else if constexpr (std::is_same_v<T, Int64SetAdd>) {
                    out.push_back(1);
                    out.insert(out.end(), op.key.begin(), op.key.end());
                    put_i64be(out, d.base);
                    put_i64be(out, d.delta);
                } else if constexpr (std::is_same_v<T, SetInsert>) {
                    out.push_back(2);
                    out.insert(out.end(), op.key.begin(), op.key.end());
                    put_u64be(out, d.tag);
                    out.insert(out.end(), d.hash.begin(), d.hash.end());
                } else if constexpr (std::is_same_v<T, SetClear>) {
                    out.push_back(3);
                    out.insert(out.end(), op.key.begin(), op.key.end());
                    put_u64be(out, d.threshold);
                } else if constexpr (std::is_same_v<T, SetLimitIncrease>) {
                    out.push_back(4);
                    out.insert(out.end(), op.key.begin(), op.key.end());
                    put_u16be(out, d.amount);
                } else {
                    out.push_back(5);
                    out.insert(out.end(), op.key.begin(), op.key.end());
                }
            },
            op.delta);
    }
    return out;
}

struct DeltaProgram : Program {
    static constexpr uint8_t kMethodEmit = 0;
    static constexpr uint8_t kMethodAbort = 1;

    void run(HostContext& host, uint8_t method, BytesView input) override
    {
        if (method == kMethodAbort)
            host.abort_program("requested abort");
        ByteReader r(input);
        while (!r.done()) {
            uint8_t op = r.u8();
            LocalKey key = r.hash32();
            switch (op) {
            case 0: {
                uint32_t len = r.u32be();
                auto b = r.bytes(len);
                host.string_set(key, Bytes(b.begin(), b.end()));
                break;
            }
            case 1: {
                int64_t base = r.i64be();
                int64_t delta = r.i64be();
                host.int64_set_add(key, base, delta);
                break;
            }
            case 2: {
                uint64_t tag = r.u64be();
                host.set_insert(key, tag, r.hash32());
                break;
            }
            case 3:
                host.set_clear(key, r.u64be());
                break;
            case 4:
                host.set_limit_increase(key, r.u16be());
                break;
            default:
                host.delete_value(key);
            }
        }
    }
};

inline ContractId delta_contract_id()
{
    return hash32("test:delta-program");
}

inline Registry delta_registry()
{
    Registry reg;
    reg[delta_contract_id()] = std::make_shared<DeltaProgram>();
    return reg;
}

/// Unsigned transaction against the raw-delta contract; the nonce keeps
/// hashes distinct.
inline TransactionRecord raw_tx(std::span<const RawOp> ops, uint64_t nonce, bool abort = false)
{
    TransactionRecord tx;
    tx.contract = delta_contract_id();
    tx.method = abort ? DeltaProgram::kMethodAbort : DeltaProgram::kMethodEmit;
    tx.input = encode_raw_ops(ops);
    tx.meta.nonce = nonce;
    return tx;
}

inline LocalKey lk(std::string_view name)
{
    return hash32(name);
}

}  // namespace commute::test
