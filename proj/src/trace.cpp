#include "datn/trace.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "datn/dynattn.hpp"
#include "datn/numfmt.hpp"
#include "datn/rng.hpp"
#include "datn/static_attn.hpp"

namespace datn {

bool operator==(const Trace& x, const Trace& y) {
    if (x.n != y.n || x.d != y.d || x.a != y.a || x.q_path != y.q_path ||
        x.k_path != y.k_path || x.v_path != y.v_path || x.ops.size() != y.ops.size())
        return false;
    for (std::size_t t = 0; t < x.ops.size(); ++t) {
        const TraceOp& p = x.ops[t];
        const TraceOp& q = y.ops[t];
        if (p.kind != q.kind) return false;
        if (p.kind == OpKind::Recompute) continue;  // RC carries no operands
        if (p.i != q.i || p.j != q.j) return false;
        if ((p.kind == OpKind::UpdateK || p.kind == OpKind::UpdateV) &&
            p.delta != q.delta)
            return false;
    }
    return true;
}

std::string serialize(const Trace& trace) {
    std::ostringstream os;
    os << "#DATN-TRACE v1\n";
    os << "n=" << trace.n << " d=" << trace.d << " a=" << format_double(trace.a)
       << "\n";
    os << "Q=" << trace.q_path << " K=" << trace.k_path << " V=" << trace.v_path
       << "\n";
    for (const TraceOp& op : trace.ops) {
        switch (op.kind) {
            case OpKind::UpdateK:
                os << "UK " << op.i << " " << op.j << " " << format_double(op.delta);
                break;
            case OpKind::UpdateV:
                os << "UV " << op.i << " " << op.j << " " << format_double(op.delta);
                break;
            case OpKind::Query:
                os << "Q " << op.i << " " << op.j;
                break;
            case OpKind::Recompute:
                os << "RC";
                break;
        }
        os << "\n";
    }
    return os.str();
}

namespace {

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& why) {
    throw std::invalid_argument("trace parse error at line " +
                                std::to_string(line_no) + ": " + why);
}

std::vector<std::string> split_spaces(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

// "key=value" with a required key.
std::string take_kv(const std::string& tok, const std::string& key,
                    std::size_t line_no) {
    if (tok.size() < key.size() + 1 || tok.compare(0, key.size(), key) != 0 ||
        tok[key.size()] != '=')
        parse_fail(line_no, "expected " + key + "=<value>, got '" + tok + "'");
    return tok.substr(key.size() + 1);
}

}  // namespace

Trace parse_trace(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    std::size_t line_no = 0;
    Trace trace;

    auto next_line = [&](bool required) {
        if (!std::getline(is, line)) {
            if (required) parse_fail(line_no + 1, "unexpected end of input");
            return false;
        }
        ++line_no;
        return true;
    };

    next_line(true);
    if (line != "#DATN-TRACE v1") parse_fail(line_no, "bad header magic");

    next_line(true);
    {
        auto toks = split_spaces(line);
        if (toks.size() != 3) parse_fail(line_no, "expected 'n=<int> d=<int> a=<float>'");
        try {
            const long long n = parse_int(take_kv(toks[0], "n", line_no));
            const long long d = parse_int(take_kv(toks[1], "d", line_no));
            const double a = parse_double(take_kv(toks[2], "a", line_no));
            if (n < 1 || d < 1) parse_fail(line_no, "n and d must be >= 1");
            if (!(a > 0.0 && a <= 1.0)) parse_fail(line_no, "a must be in (0,1]");
            trace.n = static_cast<std::size_t>(n);
            trace.d = static_cast<std::size_t>(d);
            trace.a = a;
        } catch (const std::invalid_argument& e) {
            const std::string what = e.what();
            if (what.rfind("trace parse error", 0) == 0) throw;
            parse_fail(line_no, what);
        }
    }

    next_line(true);
    {
        auto toks = split_spaces(line);
        if (toks.size() != 3) parse_fail(line_no, "expected 'Q=<path> K=<path> V=<path>'");
        trace.q_path = take_kv(toks[0], "Q", line_no);
        trace.k_path = take_kv(toks[1], "K", line_no);
        trace.v_path = take_kv(toks[2], "V", line_no);
    }

    while (next_line(false)) {
        if (line.empty()) parse_fail(line_no, "blank line");
        auto toks = split_spaces(line);
        TraceOp op;
        try {
            if (toks[0] == "UK" || toks[0] == "UV") {
                if (toks.size() != 4)
                    parse_fail(line_no, toks[0] + " needs '<i> <j> <delta>'");
                op.kind = toks[0] == "UK" ? OpKind::UpdateK : OpKind::UpdateV;
                op.i = static_cast<std::size_t>(parse_int(toks[1]));
                op.j = static_cast<std::size_t>(parse_int(toks[2]));
                op.delta = parse_double(toks[3]);
                if (!std::isfinite(op.delta)) parse_fail(line_no, "non-finite delta");
            } else if (toks[0] == "Q") {
                if (toks.size() != 3) parse_fail(line_no, "Q needs '<i> <j>'");
                op.kind = OpKind::Query;
                op.i = static_cast<std::size_t>(parse_int(toks[1]));
                op.j = static_cast<std::size_t>(parse_int(toks[2]));
            } else if (toks[0] == "RC") {
                if (toks.size() != 1) parse_fail(line_no, "RC takes no arguments");
                op.kind = OpKind::Recompute;
            } else {
                parse_fail(line_no, "unknown op '" + toks[0] + "'");
            }
        } catch (const std::invalid_argument& e) {
            const std::string what = e.what();
            if (what.rfind("trace parse error", 0) == 0) throw;
            parse_fail(line_no, what);
        }
        if (op.kind != OpKind::Recompute && (op.i >= trace.n || op.j >= trace.d))
            parse_fail(line_no, "index out of range for n=" + std::to_string(trace.n) +
                                    " d=" + std::to_string(trace.d));
        trace.ops.push_back(op);
    }
    return trace;
}

Trace load_trace(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open trace file: " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_trace(buf.str());
}

void save_trace(const Trace& trace, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    os << serialize(trace);
    if (!os) throw std::runtime_error("write failed: " + path);
}

GeneratedInstance generate(std::size_t n, std::size_t d, double a,
                           std::size_t num_ops, const OpMix& mix,
                           double value_scale, std::uint64_t seed) {
    if (n < 1 || d < 1) throw std::invalid_argument("generate: n, d must be >= 1");
    if (!(a > 0.0 && a <= 1.0)) throw std::invalid_argument("generate: a must be in (0,1]");
    if (std::fabs(mix.p_uk + mix.p_uv + mix.p_q - 1.0) > 1e-9)
        throw std::invalid_argument("generate: op mix must sum to 1");
    if (!(value_scale > 0.0))
        throw std::invalid_argument("generate: value_scale must be > 0");

    constexpr double kLogitBound = 30.0;
    constexpr int kMaxAttempts = 100;
    Rng rng(seed);

    auto draw_matrix = [&](std::size_t r, std::size_t c) {
        Matrix m(r, c);
        for (double& v : m.data) v = rng.next_double(-value_scale, value_scale);
        return m;
    };

    GeneratedInstance out;
    Matrix M(n, n);
    int attempts = 0;
    while (true) {
        if (++attempts > kMaxAttempts)
            throw std::runtime_error("generate: value_scale infeasible, logits exceed " +
                                     std::to_string(kLogitBound) + " after " +
                                     std::to_string(kMaxAttempts) + " attempts");
        out.Q = draw_matrix(n, d);
        out.K = draw_matrix(n, d);
        M = matmul(out.Q, transpose(out.K));
        double worst = 0.0;
        for (double v : M.data) worst = std::max(worst, std::fabs(v));
        if (worst <= kLogitBound) break;
    }
    out.V = draw_matrix(n, d);

    out.trace.n = n;
    out.trace.d = d;
    out.trace.a = a;
    out.trace.q_path = "Q.datn1";
    out.trace.k_path = "K.datn1";
    out.trace.v_path = "V.datn1";

    for (std::size_t t = 0; t < num_ops; ++t) {
        const double u = rng.next_unit();
        TraceOp op;
        op.i = rng.next_index(n);
        if (u < mix.p_uk) {
            op.kind = OpKind::UpdateK;
            op.j = rng.next_index(d);
            // Keep the running logits bounded: redraw deltas that would push
            // any entry of column i of M past the bound.
            int tries = 0;
            while (true) {
                if (++tries > kMaxAttempts)
                    throw std::runtime_error(
                        "generate: value_scale infeasible for UK op " + std::to_string(t));
                op.delta = rng.next_double(-value_scale, value_scale);
                bool ok = true;
                for (std::size_t r = 0; r < n && ok; ++r)
                    ok = std::fabs(M(r, op.i) + op.delta * out.Q(r, op.j)) <= kLogitBound;
                if (ok) break;
            }
            for (std::size_t r = 0; r < n; ++r) M(r, op.i) += op.delta * out.Q(r, op.j);
        } else if (u < mix.p_uk + mix.p_uv) {
            op.kind = OpKind::UpdateV;
            op.j = rng.next_index(d);
            op.delta = rng.next_double(-value_scale, value_scale);
        } else {
            op.kind = OpKind::Query;
            op.j = rng.next_index(d);
        }
        out.trace.ops.push_back(op);
    }
    return out;
}

std::vector<double> replay(const Trace& trace, const Matrix& Q, const Matrix& K,
                           const Matrix& V, Engine engine) {
    if (Q.rows != trace.n || Q.cols != trace.d || !Q.same_shape(K) || !Q.same_shape(V))
        throw std::invalid_argument("replay: matrices do not match trace header");

    std::vector<double> answers;
    if (engine == Engine::dynattn) {
        DynAttnConfig cfg;
        cfg.a = trace.a;
        DynamicAttention ds(Q, K, V, cfg);
        for (std::size_t t = 0; t < trace.ops.size(); ++t) {
            const TraceOp& op = trace.ops[t];
            try {
                switch (op.kind) {
                    case OpKind::UpdateK: ds.update_k(op.i, op.j, op.delta); break;
                    case OpKind::UpdateV: ds.update_v(op.i, op.j, op.delta); break;
                    case OpKind::Query: answers.push_back(ds.query(op.i, op.j)); break;
                    case OpKind::Recompute: ds.recompute(); break;
                }
            } catch (const std::range_error& e) {
                throw std::runtime_error("replay failed at op " + std::to_string(t) +
                                         ": " + e.what());
            }
        }
        return answers;
    }

    // Oracle: apply updates directly, recompute attention from scratch when a
    // query hits a dirty state.
    Matrix Kc = K, Vc = V;
    Matrix B;
    bool dirty = true;
    for (std::size_t t = 0; t < trace.ops.size(); ++t) {
        const TraceOp& op = trace.ops[t];
        try {
            switch (op.kind) {
                case OpKind::UpdateK:
                    Kc(op.i, op.j) += op.delta;
                    dirty = true;
                    break;
                case OpKind::UpdateV:
                    Vc(op.i, op.j) += op.delta;
                    dirty = true;
                    break;
                case OpKind::Query:
                    if (dirty) {
                        B = attention(Q, Kc, Vc);
                        dirty = false;
                    }
                    answers.push_back(B(op.i, op.j));
                    break;
                case OpKind::Recompute:
                    break;  // no-op for the oracle
            }
        } catch (const std::range_error& e) {
            throw std::runtime_error("replay failed at op " + std::to_string(t) + ": " +
                                     e.what());
        }
    }
    return answers;
}

std::vector<double> replay_from_files(const Trace& trace, Engine engine) {
    const Matrix Q = read_datn1(trace.q_path);
    const Matrix K = read_datn1(trace.k_path);
    const Matrix V = read_datn1(trace.v_path);
    return replay(trace, Q, K, V, engine);
}

std::string serialize_answers(const std::vector<double>& answers) {
    std::ostringstream os;
    for (double v : answers) os << format_double(v) << "\n";
    return os.str();
}

}  // namespace datn
