#include "datn/hmv.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "datn/dynattn.hpp"
#include "datn/rng.hpp"

namespace datn {

BoolMatrix::BoolMatrix(std::size_t r, std::size_t c, std::uint8_t fill)
    : rows(r), cols(c), bits(r * c, fill) {
    if (r < 1 || c < 1) throw std::invalid_argument("bool matrix dimensions must be >= 1");
    if (fill > 1) throw std::invalid_argument("bool matrix entries must be 0 or 1");
}

std::size_t BoolMatrix::nnz() const {
    std::size_t c = 0;
    for (auto b : bits) c += b;
    return c;
}

Matrix BoolMatrix::to_real() const {
    Matrix m(rows, cols);
    for (std::size_t k = 0; k < bits.size(); ++k) m.data[k] = bits[k];
    return m;
}

bool operator==(const BoolMatrix& a, const BoolMatrix& b) {
    return a.rows == b.rows && a.cols == b.cols && a.bits == b.bits;
}

static void check_boolean(const BoolMatrix& m, const char* name) {
    for (auto b : m.bits)
        if (b > 1)
            throw std::invalid_argument(std::string(name) + ": entries must be 0 or 1");
}

BoolMatrix bool_matmul(const BoolMatrix& X, const BoolMatrix& Y) {
    if (X.cols != Y.rows)
        throw std::invalid_argument("bool_matmul: dimension mismatch " +
                                    std::to_string(X.cols) + " vs " +
                                    std::to_string(Y.rows));
    BoolMatrix out(X.rows, Y.cols, 0);
    for (std::size_t i = 0; i < X.rows; ++i)
        for (std::size_t k = 0; k < X.cols; ++k) {
            if (!X.at(i, k)) continue;
            for (std::size_t j = 0; j < Y.cols; ++j)
                if (Y.at(k, j)) out.at(i, j) = 1;
        }
    return out;
}

OamvInstance build_oamv(const BoolMatrix& M, const BoolMatrix& V) {
    if (M.rows != M.cols || V.rows != V.cols || M.rows != V.rows)
        throw std::invalid_argument("build_oamv: M and V must be square, same n");
    check_boolean(M, "M");
    check_boolean(V, "V");
    OamvInstance inst;
    inst.Q = M.to_real();
    inst.K = Matrix(M.rows, M.cols, 0.0);
    inst.V = V.to_real();
    return inst;
}

BoolMatrix recover_oamv(const Matrix& raw, const Matrix& v_tilde, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("recover_oamv: eps must be > 0");
    if (raw.cols != v_tilde.cols || raw.rows != v_tilde.rows)
        throw std::invalid_argument("recover_oamv: shape mismatch");
    const std::vector<double> base = col_sums(v_tilde);
    BoolMatrix out(raw.rows, raw.cols, 0);
    for (std::size_t j = 0; j < raw.rows; ++j)
        for (std::size_t i = 0; i < raw.cols; ++i)
            out.at(j, i) = (raw(j, i) - base[i] > eps) ? 1 : 0;
    return out;
}

OdamvInstance build_odamv(const BoolMatrix& M, const BoolMatrix& V, const BoolMatrix& P) {
    if (M.rows != M.cols || V.rows != V.cols || P.rows != P.cols ||
        M.rows != V.rows || M.rows != P.rows)
        throw std::invalid_argument("build_odamv: M, V, P must be square, same n");
    check_boolean(M, "M");
    check_boolean(V, "V");
    const std::size_t n = M.rows;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j && P.at(i, j))
                throw std::invalid_argument("build_odamv: P must be diagonal");
    const std::size_t m = P.nnz();
    if (m < 1) throw std::invalid_argument("build_odamv: P must have nnz >= 1");

    OdamvInstance inst;
    inst.n = n;
    inst.m = m;
    const std::size_t nn = 2 * n;
    // Top block of Q is [M | complement(M)], bottom is zero.
    inst.Q = Matrix(nn, nn, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            inst.Q(i, j) = M.at(i, j);
            inst.Q(i, n + j) = 1.0 - M.at(i, j);
        }
    inst.K = Matrix(nn, nn, 0.0);
    // V block sits in the top-left quadrant.
    inst.V = Matrix(nn, nn, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) inst.V(i, j) = V.at(i, j);

    const double e1 = std::exp(1.0);
    inst.expected_diag.assign(nn, static_cast<double>(m));
    for (std::size_t i = 0; i < n; ++i) inst.expected_diag[i] = m * (e1 + 1.0);
    return inst;
}

BoolMatrix recover_odamv(const Matrix& normalized, const std::vector<double>& diag,
                         const Matrix& v_tilde, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("recover_odamv: eps must be > 0");
    if (normalized.rows != diag.size())
        throw std::invalid_argument("recover_odamv: diag length mismatch");
    const std::size_t n = normalized.rows / 2;
    for (std::size_t j = 0; j < n; ++j)
        if (!(diag[j] > 0.0))
            throw std::invalid_argument("recover_odamv: diag entries must be > 0");
    const std::vector<double> base = col_sums(v_tilde);
    BoolMatrix out(n, n, 0);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i)
            out.at(j, i) = (normalized(j, i) - base[i] / diag[j] > eps) ? 1 : 0;
    return out;
}

static BoolMatrix random_bool_matrix(std::size_t n, Rng& rng) {
    BoolMatrix m(n, n, 0);
    for (auto& b : m.bits) b = rng.next_bool() ? 1 : 0;
    return m;
}

// Sparse P with nnz(P) in [1, cap] at random positions.
static BoolMatrix random_sparse_p(std::size_t n, std::size_t cap, Rng& rng,
                                  bool diagonal) {
    BoolMatrix p(n, n, 0);
    const std::size_t limit = diagonal ? std::min(cap, n) : cap;
    const std::size_t want = 1 + rng.next_index(limit);
    std::size_t placed = 0;
    while (placed < want) {
        const std::size_t r = rng.next_index(n);
        const std::size_t c = diagonal ? r : rng.next_index(n);
        if (!p.at(r, c)) {
            p.at(r, c) = 1;
            ++placed;
        }
    }
    return p;
}

static std::size_t nnz_cap(std::size_t n, double tau) {
    return static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(n), tau)));
}

HmvReport check_reduction(std::size_t n, double tau, std::uint64_t seed,
                          std::size_t cases, HmvMode mode, double eps) {
    if (n < 1 || n > 64)
        throw std::invalid_argument("check_reduction: n must be in [1, 64]");
    if (!(tau > 0.0 && tau <= 1.0))
        throw std::invalid_argument("check_reduction: tau must be in (0, 1]");
    if (cases < 1) throw std::invalid_argument("check_reduction: cases must be >= 1");

    Rng rng(seed);
    const std::size_t cap = nnz_cap(n, tau);
    HmvReport report;

    for (std::size_t c = 0; c < cases; ++c) {
        const BoolMatrix M = random_bool_matrix(n, rng);
        const BoolMatrix V = random_bool_matrix(n, rng);
        const BoolMatrix P = random_sparse_p(n, cap, rng, mode == HmvMode::odamv);
        if (P.nnz() > cap)
            throw std::logic_error("check_reduction: P exceeds nnz cap");
        const BoolMatrix expected = bool_matmul(M, bool_matmul(P, V));

        BoolMatrix recovered;
        if (mode == HmvMode::oamv) {
            OamvInstance inst = build_oamv(M, V);
            DynamicAttention ds(inst.Q, inst.K, inst.V);
            // Phase 2: K^T = P, one update per non-zero.
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t cc = 0; cc < n; ++cc)
                    if (P.at(r, cc)) ds.update_k(cc, r, 1.0);
            // Phase 3: read raw exp(QK^T)V by undoing the normalization.
            Matrix raw(n, n);
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t i = 0; i < n; ++i)
                    raw(j, i) = ds.query(j, i) * ds.row_sum(j);
            recovered = recover_oamv(raw, inst.V, eps);
        } else {
            OdamvInstance inst = build_odamv(M, V, P);
            DynamicAttention ds(inst.Q, inst.K, inst.V);
            // Phase 2: K^T = blockdiag(P, P); P is diagonal so the non-zeros
            // sit at (r, r) and (n + r, n + r).
            for (std::size_t r = 0; r < n; ++r)
                if (P.at(r, r)) {
                    ds.update_k(r, r, 1.0);
                    ds.update_k(n + r, n + r, 1.0);
                }
            const std::size_t nn = 2 * n;
            Matrix normalized(nn, nn);
            std::vector<double> diag(nn);
            for (std::size_t j = 0; j < nn; ++j) {
                diag[j] = ds.row_sum(j);
                for (std::size_t i = 0; i < nn; ++i) normalized(j, i) = ds.query(j, i);
            }
            recovered = recover_odamv(normalized, diag, inst.V, eps);
        }

        HmvCaseResult res;
        res.index = c;
        for (std::size_t k = 0; k < expected.bits.size(); ++k)
            if (recovered.bits[k] != expected.bits[k]) ++res.mismatches;
        res.pass = res.mismatches == 0;
        if (res.pass) {
            ++report.passed;
        } else {
            ++report.failed;
            if (!report.has_counterexample) {
                report.has_counterexample = true;
                report.cx_m = M;
                report.cx_v = V;
                report.cx_p = P;
                report.cx_recovered = recovered;
                report.cx_expected = expected;
            }
        }
        report.cases.push_back(res);
    }
    return report;
}

std::string hmv_case_record(const HmvCaseResult& c, HmvMode mode, std::size_t n,
                            double tau) {
    std::ostringstream os;
    os << "case=" << c.index << " mode=" << (mode == HmvMode::oamv ? "oamv" : "odamv")
       << " n=" << n << " tau=" << tau << " result=" << (c.pass ? "pass" : "fail")
       << " mismatches=" << c.mismatches;
    return os.str();
}

}  // namespace datn
