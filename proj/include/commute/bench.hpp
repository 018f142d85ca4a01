// Copyright 2026 The Commute Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

#include "commute/contracts/token.hpp"
#include "commute/contracts/wallet.hpp"
#include "commute/engine.hpp"

namespace commute::bench {

using contracts::Token;
using contracts::Wallet;
using AccountId = Wallet::AccountId;

struct WorkloadConfig {
    uint64_t accounts = 2;
    uint64_t batch_size = 1000;
    unsigned threads = 1;
    uint64_t blocks = 20;  // measured rounds
    uint64_t warmup = 5;
    uint64_t seed = 1;
    bool persist = false;
    std::string persist_dir = "commute-wal";
    bool verify = false;
    std::string workload = "payments";  // payments | overdraft
};

inline constexpr int64_t kPaymentsBalance = 1'000'000'000;
inline constexpr int64_t kOverdraftBalance = 5;
inline constexpr int64_t kPaymentAmount = 1;

// Replay shards are pre-expanded to the maximum set limit for small account
// counts, where single accounts send many transactions per block.
inline constexpr uint64_t kExpandReplayLimitThreshold = 10'000;

// One Ed25519 keypair per account up to this count; beyond it all accounts
// share one keypair (ids stay distinct and every transaction still carries
// and verifies a real signature).
inline constexpr uint64_t kPerAccountKeyLimit = 100'000;

inline AccountId account_id(uint64_t index)
{
    Bytes b;
    put_u64be(b, index);
    return hash32({to_bytes("bench:acct"), BytesView(b)});
}

/// Deterministic payment workload: uniform random (sender, receiver) pairs,
/// fixed amount, signed; reproducible byte-for-byte from the seed.
class PaymentGenerator {
  public:
    explicit PaymentGenerator(const WorkloadConfig& cfg)
        : cfg_(cfg), rng_(cfg.seed), shared_keys_(cfg.accounts > kPerAccountKeyLimit)
    {
        accounts_.reserve(cfg.accounts);
        for (uint64_t i = 0; i < cfg.accounts; ++i)
            accounts_.push_back(account_id(i));
        if (shared_keys_) {
            keys_.push_back(keypair_from_seed(hash32("bench:shared-key")));
        } else {
            keys_.reserve(cfg.accounts);
            for (uint64_t i = 0; i < cfg.accounts; ++i) {
                Bytes b;
                put_u64be(b, i);
                keys_.push_back(keypair_from_seed(hash32({to_bytes("bench:key"), BytesView(b)})));
            }
        }
    }

    const std::vector<AccountId>& accounts() const { return accounts_; }
    const KeyPair& key_for(uint64_t account) const
    {
        return shared_keys_ ? keys_[0] : keys_[account];
    }

    /// Uniform random distinct (sender, receiver) indices.
    std::pair<uint64_t, uint64_t> draw_pair()
    {
        uint64_t s = rng_() % cfg_.accounts;
        uint64_t r = rng_() % (cfg_.accounts - 1);
        if (r >= s)
            ++r;
        return {s, r};
    }

    /// Signed transactions for one block. `block_number` is the block the
    /// transactions will execute in; they expire with it.
    std::vector<TransactionRecord> block_txs(uint64_t block_number, uint64_t count)
    {
        std::vector<TransactionRecord> txs;
        txs.reserve(count);
        for (uint64_t i = 0; i < count; ++i) {
            auto [s, r] = draw_pair();
            TransactionRecord tx;
            tx.contract = Wallet::id();
            tx.method = Wallet::kPay;
            tx.input = Wallet::pay_input(accounts_[s], accounts_[r], kPaymentAmount);
            tx.meta.sender_pubkey = key_for(s).pk;
            tx.meta.expiration = block_number;
            tx.meta.nonce = rng_();
            tx.sign(key_for(s).sk);
            txs.push_back(std::move(tx));
        }
        return txs;
    }

    size_t tx_bytes()
    {
        auto sample = block_txs(1, 1);
        return sample[0].encode().size();
    }

  private:
    WorkloadConfig cfg_;
    std::mt19937_64 rng_;
    bool shared_keys_;
    std::vector<AccountId> accounts_;
    std::vector<KeyPair> keys_;
};

inline Registry standard_registry()
{
    Registry reg;
    reg[Token::id()] = std::make_shared<Token>();
    reg[Wallet::id()] = std::make_shared<Wallet>();
    return reg;
}

/// Funds every account, registers its key, grants the wallet an ample
/// allowance, and (for small account counts) pre-expands the replay shards.
inline void load_genesis(Engine& engine, const WorkloadConfig& cfg, PaymentGenerator& gen)
{
    int64_t balance = cfg.workload == "overdraft" ? kOverdraftBalance : kPaymentsBalance;
    bool expand = cfg.accounts <= kExpandReplayLimitThreshold;
    ContractId token_id = Token::id();

    std::vector<std::pair<Address, Value>> chunk;
    chunk.reserve(6);
    chunk.push_back({Address{Wallet::id(), Wallet::token_config_key()},
                     Bytestring{Bytes(token_id.begin(), token_id.end())}});
    engine.load_genesis(chunk);

    for (uint64_t i = 0; i < cfg.accounts; ++i) {
        chunk.clear();
        const AccountId& acct = gen.accounts()[i];
        const PublicKey& pk = gen.key_for(i).pk;
        chunk.push_back({Address{Wallet::id(), Wallet::pubkey_key(acct)},
                         Bytestring{Bytes(pk.begin(), pk.end())}});
        chunk.push_back({Address{Token::id(), Token::balance_key(acct)}, NonnegInt64{balance}});
        chunk.push_back({Address{Token::id(), Token::allowance_key(acct, Wallet::id())},
                         NonnegInt64{kPaymentsBalance}});
        if (expand) {
            chunk.push_back({Address{Wallet::id(), Wallet::replay_shard_key(acct, 0)},
                             OrderedSet{{}, kMaxSetLimit}});
            chunk.push_back({Address{Wallet::id(), Wallet::replay_shard_key(acct, 1)},
                             OrderedSet{{}, kMaxSetLimit}});
        }
        engine.load_genesis(chunk);
    }
}

struct RoundResult {
    uint64_t block_number = 0;
    uint64_t drawn = 0;
    uint64_t admitted = 0;
    uint64_t dropped_abort = 0;
    uint64_t dropped_conflict = 0;
    double seconds = 0;
    double tx_per_sec = 0;
    bool verified = true;
};

struct BenchReport {
    WorkloadConfig config;
    std::vector<RoundResult> rounds;  // measured rounds only
    double mean_tps = 0;
    double std_tps = 0;
    uint64_t total_drawn = 0;
    uint64_t total_admitted = 0;
    size_t tx_bytes = 0;
    bool all_verified = true;
    double genesis_seconds = 0;
    // Documented workload shape (addresses read / written per payment).
    static constexpr int kReadsPerTx = 5;
    static constexpr int kWritesPerTx = 5;
};

/// Proposes `warmup + blocks` blocks, measuring admitted transactions per
/// second end to end (execution, reservation, finalize, roots, and log
/// writes when enabled). Workload generation and key setup are excluded
/// from the clock. With `verify`, a second engine re-executes every block
/// and the roots must match.
inline BenchReport run_benchmark(const WorkloadConfig& cfg)
{
    using Clock = std::chrono::steady_clock;
    BenchReport report;
    report.config = cfg;

    PaymentGenerator gen(cfg);
    Engine engine(standard_registry(), EngineConfig{cfg.threads});

    auto genesis_start = Clock::now();
    load_genesis(engine, cfg, gen);
    engine.state_root();
    report.genesis_seconds = std::chrono::duration<double>(Clock::now() - genesis_start).count();

    std::unique_ptr<Engine> validator;
    if (cfg.verify)
        validator = engine.fork();
    if (cfg.persist)
        engine.enable_persistence(cfg.persist_dir);

    report.tx_bytes = gen.tx_bytes();

    uint64_t total_rounds = cfg.warmup + cfg.blocks;
    for (uint64_t round = 0; round < total_rounds; ++round) {
        auto txs = gen.block_txs(engine.block_number() + 1, cfg.batch_size);

        auto start = Clock::now();
        TxStream stream(txs);
        auto res = engine.propose_block(stream, cfg.batch_size);
        double seconds = std::chrono::duration<double>(Clock::now() - start).count();

        RoundResult rr;
        rr.block_number = res.block.number;
        rr.drawn = res.stats.drawn;
        rr.admitted = res.stats.admitted;
        rr.dropped_abort = res.stats.dropped_abort;
        rr.dropped_conflict = res.stats.dropped_conflict;
        rr.seconds = seconds;
        rr.tx_per_sec = seconds > 0 ? double(res.stats.admitted) / seconds : 0;

        if (cfg.verify) {
            auto exec = validator->execute_block(res.block);
            rr.verified = exec.ok && exec.state_root == res.block.state_root &&
                          exec.modification_root == res.block.modification_root &&
                          exec.tx_root == res.block.tx_root;
            report.all_verified = report.all_verified && rr.verified;
        }
        if (round >= cfg.warmup) {
            report.rounds.push_back(rr);
            report.total_drawn += rr.drawn;
            report.total_admitted += rr.admitted;
        }
    }

    double sum = 0;
    for (const auto& r : report.rounds)
        sum += r.tx_per_sec;
    size_t n = report.rounds.size();
    report.mean_tps = n ? sum / double(n) : 0;
    double var = 0;
    for (const auto& r : report.rounds)
        var += (r.tx_per_sec - report.mean_tps) * (r.tx_per_sec - report.mean_tps);
    report.std_tps = n > 1 ? std::sqrt(var / double(n - 1)) : 0;
    return report;
}

// ------------------------------------------------------------------
// CSV output and the matching parser.

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline const std::vector<std::string>& csv_columns()
{
    static const std::vector<std::string> cols = {
        "workload",  "accounts", "batch_size",  "threads",       "blocks",
        "warmup",    "seed",     "persist",     "verify",        "tx_per_sec_mean",
        "tx_per_sec_std", "speedup_vs_1t", "admitted", "drawn", "tx_bytes",
        "verified_ok"};
    return cols;
}

inline std::string format_double(double v)
{
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(3) << v;
    return ss.str();
}

/// One row per report, keyed by (workload, accounts, batch, threads).
/// Speedup is reported against the 1-thread run of the same key when the
/// report set contains one.
inline CsvTable to_csv(std::span<const BenchReport> reports)
{
    CsvTable t;
    t.header = csv_columns();
    auto baseline = [&](const BenchReport& r) -> double {
        for (const auto& other : reports)
            if (other.config.threads == 1 && other.config.workload == r.config.workload &&
                other.config.accounts == r.config.accounts &&
                other.config.batch_size == r.config.batch_size &&
                other.config.persist == r.config.persist)
                return other.mean_tps;
        return 0;
    };
    for (const auto& r : reports) {
        double base = baseline(r);
        std::vector<std::string> row = {
            r.config.workload,
            std::to_string(r.config.accounts),
            std::to_string(r.config.batch_size),
            std::to_string(r.config.threads),
            std::to_string(r.config.blocks),
            std::to_string(r.config.warmup),
            std::to_string(r.config.seed),
            r.config.persist ? "1" : "0",
            r.config.verify ? "1" : "0",
            format_double(r.mean_tps),
            format_double(r.std_tps),
            base > 0 ? format_double(r.mean_tps / base) : std::string(""),
            std::to_string(r.total_admitted),
            std::to_string(r.total_drawn),
            std::to_string(r.tx_bytes),
            r.all_verified ? "1" : "0",
        };
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline std::string format_csv(const CsvTable& t)
{
    std::ostringstream out;
    for (size_t i = 0; i < t.header.size(); ++i)
        out << t.header[i] << (i + 1 < t.header.size() ? "," : "\n");
    for (const auto& row : t.rows)
        for (size_t i = 0; i < row.size(); ++i)
            out << row[i] << (i + 1 < row.size() ? "," : "\n");
    return out.str();
}

inline CsvTable parse_csv(const std::string& text)
{
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::vector<std::string> fields;
        std::string field;
        std::istringstream ls(line);
        while (std::getline(ls, field, ','))
            fields.push_back(field);
        if (line.back() == ',')
            fields.push_back("");
        if (first) {
            t.header = std::move(fields);
            first = false;
        } else {
            t.rows.push_back(std::move(fields));
        }
    }
    return t;
}

/// Expected number of transaction pairs sharing an account when each of
/// `batch` transactions picks a uniform distinct (sender, receiver) pair
/// among `accounts`: accounts * C(batch,2) * (2/accounts)^2.
inline double expected_pair_collisions(uint64_t accounts, uint64_t batch)
{
    double p = 2.0 / double(accounts);
    double pairs = 0.5 * double(batch) * double(batch - 1);
    return double(accounts) * pairs * p * p;
}

inline std::string format_table(std::span<const BenchReport> reports)
{
    std::ostringstream out;
    out << std::left << std::setw(10) << "workload" << std::right << std::setw(10) << "accounts"
        << std::setw(10) << "batch" << std::setw(9) << "threads" << std::setw(13) << "tx/s mean"
        << std::setw(12) << "tx/s std" << std::setw(10) << "admitted" << std::setw(10)
        << "drawn" << std::setw(9) << "tx[B]" << std::setw(9) << "verify" << "\n";
    for (const auto& r : reports) {
        out << std::left << std::setw(10) << r.config.workload << std::right << std::setw(10)
            << r.config.accounts << std::setw(10) << r.config.batch_size << std::setw(9)
            << r.config.threads << std::setw(13) << format_double(r.mean_tps) << std::setw(12)
            << format_double(r.std_tps) << std::setw(10) << r.total_admitted << std::setw(10)
            << r.total_drawn << std::setw(9) << r.tx_bytes << std::setw(9)
            << (r.config.verify ? (r.all_verified ? "ok" : "FAIL") : "-") << "\n";
    }
    return out.str();
}

}  // namespace commute::bench
