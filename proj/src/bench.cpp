#include "datn/bench.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>

#include "datn/dynattn.hpp"
#include "datn/numfmt.hpp"
#include "datn/static_attn.hpp"

namespace datn {

const char* kBenchCsvHeader =
    "n,d,a,engine,op_kind,mean_ns,p50_ns,p99_ns,amortized_update_ns,query_ns";

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ns(Clock::time_point t0, Clock::time_point t1) {
    return std::chrono::duration<double, std::nano>(t1 - t0).count();
}

KindStats summarize(const std::string& engine, const std::string& kind,
                    std::vector<double>& samples) {
    KindStats s;
    s.engine = engine;
    s.op_kind = kind;
    s.count = samples.size();
    if (samples.empty()) return s;
    double total = 0.0;
    for (double v : samples) total += v;
    s.mean_ns = total / samples.size();
    std::sort(samples.begin(), samples.end());
    s.p50_ns = samples[samples.size() / 2];
    s.p99_ns = samples[std::min(samples.size() - 1,
                                static_cast<std::size_t>(samples.size() * 0.99))];
    return s;
}

const char* kind_name(OpKind k) {
    switch (k) {
        case OpKind::UpdateK: return "update_k";
        case OpKind::UpdateV: return "update_v";
        case OpKind::Query: return "query";
        case OpKind::Recompute: return "recompute";
    }
    return "?";
}

}  // namespace

BenchResult run_bench(std::size_t n, std::size_t d, double a, std::size_t ops,
                      std::uint64_t seed) {
    GeneratedInstance inst = generate(n, d, a, ops, OpMix{}, 0.5, seed);

    BenchResult result;
    result.n = n;
    result.d = d;
    result.a = a;

    for (int eng = 0; eng < 2; ++eng) {
        const bool dyn = eng == 0;
        const std::string engine = dyn ? "dynattn" : "naive";
        std::vector<double> uk, uv, q;
        double update_total = 0.0;
        std::size_t update_count = 0;

        if (dyn) {
            DynAttnConfig cfg;
            cfg.a = a;
            cfg.count_ops = false;
            DynamicAttention ds(inst.Q, inst.K, inst.V, cfg);
            for (const TraceOp& op : inst.trace.ops) {
                const auto t0 = Clock::now();
                switch (op.kind) {
                    case OpKind::UpdateK: ds.update_k(op.i, op.j, op.delta); break;
                    case OpKind::UpdateV: ds.update_v(op.i, op.j, op.delta); break;
                    case OpKind::Query: (void)ds.query(op.i, op.j); break;
                    case OpKind::Recompute: ds.recompute(); break;
                }
                const double ns = elapsed_ns(t0, Clock::now());
                switch (op.kind) {
                    case OpKind::UpdateK: uk.push_back(ns); break;
                    case OpKind::UpdateV: uv.push_back(ns); break;
                    case OpKind::Query: q.push_back(ns); break;
                    case OpKind::Recompute: break;
                }
                if (op.kind == OpKind::UpdateK || op.kind == OpKind::UpdateV) {
                    update_total += ns;
                    ++update_count;
                }
            }
        } else {
            Matrix Kc = inst.K, Vc = inst.V;
            Matrix B = attention(inst.Q, Kc, Vc);
            for (const TraceOp& op : inst.trace.ops) {
                const auto t0 = Clock::now();
                switch (op.kind) {
                    case OpKind::UpdateK:
                        Kc(op.i, op.j) += op.delta;
                        B = attention(inst.Q, Kc, Vc);
                        break;
                    case OpKind::UpdateV:
                        Vc(op.i, op.j) += op.delta;
                        B = attention(inst.Q, Kc, Vc);
                        break;
                    case OpKind::Query: (void)B(op.i, op.j); break;
                    case OpKind::Recompute: break;
                }
                const double ns = elapsed_ns(t0, Clock::now());
                switch (op.kind) {
                    case OpKind::UpdateK: uk.push_back(ns); break;
                    case OpKind::UpdateV: uv.push_back(ns); break;
                    case OpKind::Query: q.push_back(ns); break;
                    case OpKind::Recompute: break;
                }
                if (op.kind == OpKind::UpdateK || op.kind == OpKind::UpdateV) {
                    update_total += ns;
                    ++update_count;
                }
            }
        }

        const double amortized = update_count ? update_total / update_count : 0.0;
        double query_mean = 0.0;
        if (!q.empty()) {
            for (double v : q) query_mean += v;
            query_mean /= q.size();
        }
        if (dyn) {
            result.dyn_amortized_update_ns = amortized;
            result.dyn_query_ns = query_mean;
        } else {
            result.naive_amortized_update_ns = amortized;
            result.naive_query_ns = query_mean;
        }
        result.kinds.push_back(summarize(engine, kind_name(OpKind::UpdateK), uk));
        result.kinds.push_back(summarize(engine, kind_name(OpKind::UpdateV), uv));
        result.kinds.push_back(summarize(engine, kind_name(OpKind::Query), q));
    }
    return result;
}

std::string bench_csv(const BenchResult& r) {
    std::ostringstream os;
    for (const KindStats& k : r.kinds) {
        const bool dyn = k.engine == "dynattn";
        os << r.n << "," << r.d << "," << format_double(r.a) << "," << k.engine << ","
           << k.op_kind << "," << format_double(k.mean_ns) << ","
           << format_double(k.p50_ns) << "," << format_double(k.p99_ns) << ","
           << format_double(dyn ? r.dyn_amortized_update_ns
                                : r.naive_amortized_update_ns)
           << ","
           << format_double(dyn ? r.dyn_query_ns : r.naive_query_ns) << "\n";
    }
    return os.str();
}

}  // namespace datn
