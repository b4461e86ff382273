#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "datn/matrix.hpp"

namespace datn {

// Matrix over the boolean semi-ring (OR / AND).
struct BoolMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> bits;

    BoolMatrix() = default;
    BoolMatrix(std::size_t r, std::size_t c, std::uint8_t fill = 0);

    std::uint8_t& at(std::size_t i, std::size_t j) { return bits[i * cols + j]; }
    std::uint8_t at(std::size_t i, std::size_t j) const { return bits[i * cols + j]; }

    std::size_t nnz() const;
    Matrix to_real() const;
};

bool operator==(const BoolMatrix& a, const BoolMatrix& b);

// Brute-force boolean-semiring product: (XY)[i,j] = OR_k X[i,k] AND Y[k,j].
BoolMatrix bool_matmul(const BoolMatrix& X, const BoolMatrix& Y);

// --- Reduction of hinted MV onto the attention structure ---

struct OamvInstance {
    Matrix Q;  // = M as reals
    Matrix K;  // = zero; phase 2 sets K^T = P entry by entry
    Matrix V;  // = V as reals
};

// Unnormalized construction: Q = M, K = 0, V = V.
OamvInstance build_oamv(const BoolMatrix& M, const BoolMatrix& V);

// Recover MPV from raw = exp(QK^T) V: entry (j,i) is 1 iff
// raw[j,i] - colsum_i(V) > eps (the all-ones baseline subtracted).
BoolMatrix recover_oamv(const Matrix& raw, const Matrix& v_tilde, double eps);

struct OdamvInstance {
    Matrix Q;  // 2n x 2n, top block [M | complement(M)]
    Matrix K;  // 2n x 2n zero; phase 2 sets K^T = blockdiag(P, P)
    Matrix V;  // 2n x 2n, top-left block V
    std::vector<double> expected_diag;  // m(e+1) for rows [0,n), m for the rest
    std::size_t n = 0;                  // original dimension
    std::size_t m = 0;                  // nnz(P)
};

// Normalized block construction; P must be diagonal boolean with nnz >= 1.
OdamvInstance build_odamv(const BoolMatrix& M, const BoolMatrix& V, const BoolMatrix& P);

// Recover MPV from normalized = D^-1 exp(QK^T) V and the actual diagonal:
// entry (j,i) is 1 iff normalized[j,i] - colsum_i(V~)/diag[j] > eps.
BoolMatrix recover_odamv(const Matrix& normalized, const std::vector<double>& diag,
                         const Matrix& v_tilde, double eps);

enum class HmvMode { oamv, odamv };

struct HmvCaseResult {
    std::size_t index = 0;
    bool pass = false;
    std::size_t mismatches = 0;
};

struct HmvReport {
    std::vector<HmvCaseResult> cases;
    std::size_t passed = 0;
    std::size_t failed = 0;
    // First counterexample, if any.
    bool has_counterexample = false;
    BoolMatrix cx_m, cx_v, cx_p, cx_recovered, cx_expected;

    bool all_pass() const { return failed == 0; }
};

// Runs `cases` random instances through the real dynamic structure (phase 2 as
// update_k calls, phase 3 as queries), recovers MPV and compares against the
// brute-force semiring oracle.
HmvReport check_reduction(std::size_t n, double tau, std::uint64_t seed,
                          std::size_t cases, HmvMode mode, double eps = 1e-9);

std::string hmv_case_record(const HmvCaseResult& c, HmvMode mode, std::size_t n,
                            double tau);

}  // namespace datn
