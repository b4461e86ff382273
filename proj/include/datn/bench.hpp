#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "datn/trace.hpp"

namespace datn {

struct KindStats {
    std::string engine;
    std::string op_kind;
    std::size_t count = 0;
    double mean_ns = 0.0;
    double p50_ns = 0.0;
    double p99_ns = 0.0;
};

struct BenchResult {
    std::size_t n = 0, d = 0;
    double a = 0.5;
    std::vector<KindStats> kinds;
    double dyn_amortized_update_ns = 0.0;
    double dyn_query_ns = 0.0;
    double naive_amortized_update_ns = 0.0;
    double naive_query_ns = 0.0;
    double update_speedup() const {
        return dyn_amortized_update_ns > 0.0
                   ? naive_amortized_update_ns / dyn_amortized_update_ns
                   : 0.0;
    }
};

// Replays one generated trace on both engines with per-op timing. The naive
// engine applies each update and recomputes the full attention from scratch.
BenchResult run_bench(std::size_t n, std::size_t d, double a, std::size_t ops,
                      std::uint64_t seed);

// CSV rows under the header
// n,d,a,engine,op_kind,mean_ns,p50_ns,p99_ns,amortized_update_ns,query_ns
std::string bench_csv(const BenchResult& r);

extern const char* kBenchCsvHeader;

}  // namespace datn
