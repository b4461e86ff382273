#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "datn/matrix.hpp"

namespace datn {

enum class OpKind { UpdateK, UpdateV, Query, Recompute };

struct TraceOp {
    OpKind kind = OpKind::Query;
    std::size_t i = 0;
    std::size_t j = 0;
    double delta = 0.0;  // UK / UV only
};

// Ordered operation stream plus the header needed to replay it.
struct Trace {
    std::size_t n = 0;
    std::size_t d = 0;
    double a = 0.5;
    std::string q_path, k_path, v_path;
    std::vector<TraceOp> ops;
};

bool operator==(const Trace& x, const Trace& y);

// Text grammar:
//   #DATN-TRACE v1
//   n=<int> d=<int> a=<float>
//   Q=<path> K=<path> V=<path>
//   UK <i> <j> <delta>
//   UV <i> <j> <delta>
//   Q <i> <j>
//   RC
std::string serialize(const Trace& trace);

// Throws with line number and reason on any malformed line.
Trace parse_trace(const std::string& text);

Trace load_trace(const std::string& path);
void save_trace(const Trace& trace, const std::string& path);

struct OpMix {
    double p_uk = 0.4;
    double p_uv = 0.3;
    double p_q = 0.3;
};

struct GeneratedInstance {
    Trace trace;
    Matrix Q, K, V;
};

// Deterministic in all arguments. Q, K entries are uniform in
// [-value_scale, value_scale]; instances (and UK deltas) whose logits would
// exceed |30| are rejected and redrawn, erroring after 100 attempts.
GeneratedInstance generate(std::size_t n, std::size_t d, double a,
                           std::size_t num_ops, const OpMix& mix,
                           double value_scale, std::uint64_t seed);

enum class Engine { dynattn, oracle };

// One answer per Q op, in order. The oracle engine recomputes attention from
// scratch whenever K or V changed since the last query.
std::vector<double> replay(const Trace& trace, const Matrix& Q, const Matrix& K,
                           const Matrix& V, Engine engine);

// Loads the referenced matrices from the trace header, then replays.
std::vector<double> replay_from_files(const Trace& trace, Engine engine);

std::string serialize_answers(const std::vector<double>& answers);

}  // namespace datn
