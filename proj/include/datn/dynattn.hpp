#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "datn/matrix.hpp"

namespace datn {

// Rank-1 pending update to C = A V: contributes a * b^T.
struct CDelta {
    std::vector<double> a;  // length n, the column increment to A
    std::vector<double> b;  // length d, the epoch V row it multiplies
};

// 1-sparse pending update to V: contributes delta * e_row e_col^T.
struct VDelta {
    std::size_t row = 0;
    std::size_t col = 0;
    double delta = 0.0;
};

struct DynAttnConfig {
    // Threshold T = max(1, floor(n^a)) unless `threshold` is set explicitly.
    double a = 0.5;
    std::size_t threshold = 0;  // 0 means derive from `a`
    double rtol = 1e-10;
    bool count_ops = true;
};

struct OpCounters {
    std::uint64_t mults = 0;
    std::uint64_t adds = 0;
    std::uint64_t total() const { return mults + adds; }
};

// Lazily-maintained D^-1 exp(QK^T) V under single-entry updates to K and V.
//
// K, M = QK^T, A = exp(M) and the row sums s are kept current eagerly (O(n)
// per K update). C and B are epoch snapshots; pending work lives in the two
// delta lists. A recompute folds the lists back into the snapshots and fires
// automatically when either counter reaches the threshold.
//
// Single writer: updates and recompute need exclusive access; query is
// read-only and may run concurrently with other queries.
class DynamicAttention {
public:
    DynamicAttention(const Matrix& Q, const Matrix& K, const Matrix& V,
                     const DynAttnConfig& config = {});

    void update_k(std::size_t i, std::size_t j, double delta);
    void update_v(std::size_t i, std::size_t j, double delta);
    double query(std::size_t i, std::size_t j) const;
    void recompute();

    std::size_t n() const { return n_; }
    std::size_t d() const { return d_; }
    std::size_t threshold() const { return threshold_; }
    std::size_t ct_k() const { return list_c_.size(); }
    std::size_t ct_v() const { return list_v_.size(); }
    double rtol() const { return rtol_; }

    // Cumulative arithmetic-op counts. Throws if instrumentation is off.
    OpCounters op_counters() const;

    double row_sum(std::size_t i) const;

    const Matrix& q_matrix() const { return Q_; }
    const Matrix& k_matrix() const { return K_; }
    const Matrix& v_snapshot() const { return V_snap_; }
    const Matrix& a_matrix() const { return A_; }
    const Matrix& c_snapshot() const { return C_snap_; }
    const Matrix& b_snapshot() const { return B_snap_; }
    const std::vector<double>& row_sum_vector() const { return s_; }

    // Writes Q, K, V, B (DATN1), s as an n x 1 DATN1 matrix, and
    // manifest.json {n, d, threshold, ct_K, ct_V, rtol} into `dir`.
    void export_state(const std::string& dir) const;

private:
    void check_indices(std::size_t i, std::size_t j) const;
    void maybe_recompute();

    std::size_t n_ = 0;
    std::size_t d_ = 0;
    std::size_t threshold_ = 1;
    double rtol_ = 1e-10;
    bool count_ops_ = true;

    Matrix Q_;       // immutable after init
    Matrix K_;       // current
    Matrix V_snap_;  // V as of the last recompute epoch
    Matrix M_;       // current, = Q K^T
    Matrix A_;       // current, = exp(M)
    std::vector<double> s_;  // current row sums of A (diagonal of D)
    Matrix C_snap_;  // = A_epoch V_epoch
    Matrix B_snap_;  // = D_epoch^-1 C_epoch

    std::vector<CDelta> list_c_;
    std::vector<VDelta> list_v_;

    mutable OpCounters ops_;
};

}  // namespace datn
