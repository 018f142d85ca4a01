// Copyright 2026 The Commute Authors.
// SPDX-License-Identifier: Apache-2.0

// Payments-workload throughput harness. Proposes blocks of signed payment
// transactions through the engine and reports admitted transactions per
// second; optionally re-executes every block to verify the roots and logs
// state to disk.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "commute/bench.hpp"

using namespace commute;

int main(int argc, char** argv)
{
    CLI::App app{"commute: deterministic parallel ledger benchmark"};

    bench::WorkloadConfig cfg;
    std::string threads_arg = "1";
    std::string out_path;
    app.add_option("--accounts", cfg.accounts, "number of accounts")->capture_default_str();
    app.add_option("--batch-size", cfg.batch_size, "transactions per block")
        ->capture_default_str();
    app.add_option("--threads", threads_arg, "worker threads, single value or comma list")
        ->capture_default_str();
    app.add_option("--blocks", cfg.blocks, "measured rounds")->capture_default_str();
    app.add_option("--warmup", cfg.warmup, "warmup rounds")->capture_default_str();
    app.add_option("--seed", cfg.seed, "workload seed")->capture_default_str();
    app.add_flag("--persist", cfg.persist, "log blocks and changed trie nodes to disk");
    app.add_option("--persist-dir", cfg.persist_dir, "log directory")->capture_default_str();
    app.add_flag("--verify", cfg.verify, "re-execute every block and compare roots");
    app.add_option("--out", out_path, "write results as CSV");
    app.add_option("--workload", cfg.workload, "payments | overdraft")
        ->check(CLI::IsMember({"payments", "overdraft"}))
        ->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    std::vector<unsigned> thread_counts;
    {
        std::istringstream ss(threads_arg);
        std::string part;
        while (std::getline(ss, part, ','))
            thread_counts.push_back(unsigned(std::stoul(part)));
    }
    if (thread_counts.empty())
        thread_counts.push_back(1);

    std::vector<bench::BenchReport> reports;
    for (unsigned threads : thread_counts) {
        bench::WorkloadConfig run_cfg = cfg;
        run_cfg.threads = threads;
        auto report = bench::run_benchmark(run_cfg);
        std::cout << "accounts=" << run_cfg.accounts << " batch=" << run_cfg.batch_size
                  << " threads=" << threads << ": " << bench::format_double(report.mean_tps)
                  << " tx/s (std " << bench::format_double(report.std_tps) << "), admitted "
                  << report.total_admitted << "/" << report.total_drawn << ", genesis "
                  << bench::format_double(report.genesis_seconds) << "s";
        if (run_cfg.verify)
            std::cout << ", roots " << (report.all_verified ? "verified" : "MISMATCH");
        std::cout << "\n";
        reports.push_back(std::move(report));
    }

    std::cout << "\n" << bench::format_table(reports);
    std::cout << "payment shape: reads " << bench::BenchReport::kReadsPerTx
              << " addresses, writes " << bench::BenchReport::kWritesPerTx
              << "; canonical size " << reports.front().tx_bytes << " bytes per transaction\n";

    if (!out_path.empty()) {
        std::ofstream out(out_path);
        out << bench::format_csv(bench::to_csv(reports));
        std::cout << "wrote " << out_path << "\n";
    }

    for (const auto& r : reports)
        if (!r.all_verified)
            return 1;
    return 0;
}
