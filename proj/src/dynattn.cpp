#include "datn/dynattn.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace datn {

static std::size_t derive_threshold(std::size_t n, const DynAttnConfig& cfg) {
    if (cfg.threshold != 0) return cfg.threshold;
    if (!(cfg.a > 0.0 && cfg.a <= 1.0))
        throw std::invalid_argument("threshold exponent a must be in (0,1]");
    const double t = std::floor(std::pow(static_cast<double>(n), cfg.a));
    return t < 1.0 ? 1 : static_cast<std::size_t>(t);
}

DynamicAttention::DynamicAttention(const Matrix& Q, const Matrix& K, const Matrix& V,
                                   const DynAttnConfig& config)
    : rtol_(config.rtol), count_ops_(config.count_ops), Q_(Q), K_(K), V_snap_(V) {
    if (!Q.same_shape(K) || !Q.same_shape(V))
        throw std::invalid_argument("init: Q, K, V must share shape n x d");
    n_ = Q.rows;
    d_ = Q.cols;
    threshold_ = derive_threshold(n_, config);
    if (threshold_ < 1) throw std::invalid_argument("threshold must be >= 1");
    if (!(rtol_ > 0.0)) throw std::invalid_argument("rtol must be > 0");

    M_ = matmul(Q_, transpose(K_));
    A_ = exp_elementwise(M_);  // throws on non-finite entries
    s_ = row_sums(A_);
    C_snap_ = matmul(A_, V_snap_);
    B_snap_ = Matrix(n_, d_);
    for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = 0; j < d_; ++j) B_snap_(i, j) = C_snap_(i, j) / s_[i];

    if (count_ops_) {
        ops_.mults += n_ * d_ * n_ * 2 + n_ * n_ + n_ * d_;
        ops_.adds += n_ * d_ * n_ * 2 + n_ * n_;
    }
}

void DynamicAttention::check_indices(std::size_t i, std::size_t j) const {
    if (i >= n_ || j >= d_)
        throw std::out_of_range("index (" + std::to_string(i) + "," + std::to_string(j) +
                                ") out of range for " + std::to_string(n_) + "x" +
                                std::to_string(d_));
}

void DynamicAttention::update_k(std::size_t i, std::size_t j, double delta) {
    check_indices(i, j);
    if (!std::isfinite(delta)) throw std::invalid_argument("update_k: delta not finite");

    // Column i of M shifts by delta * Q_{*,j}; column i of A rescales by the
    // entry-wise exp of that shift. Validate the new column before mutating.
    std::vector<double> dm(n_), new_a(n_), da(n_);
    for (std::size_t r = 0; r < n_; ++r) {
        dm[r] = delta * Q_(r, j);
        const double scaled = A_(r, i) * std::exp(dm[r]);
        if (!std::isfinite(scaled))
            throw std::range_error("update_k: non-finite attention entry at (" +
                                   std::to_string(r) + "," + std::to_string(i) + ")");
        new_a[r] = scaled;
        da[r] = scaled - A_(r, i);
    }

    K_(i, j) += delta;
    for (std::size_t r = 0; r < n_; ++r) {
        M_(r, i) += dm[r];
        A_(r, i) = new_a[r];
        s_[r] += da[r];
    }

    CDelta cd;
    cd.a = std::move(da);
    cd.b.assign(V_snap_.row(i), V_snap_.row(i) + d_);
    list_c_.push_back(std::move(cd));

    if (count_ops_) {
        ops_.mults += 3 * n_;  // delta*Q, exp, rescale
        ops_.adds += 3 * n_ + 1;
    }

    maybe_recompute();
}

void DynamicAttention::update_v(std::size_t i, std::size_t j, double delta) {
    check_indices(i, j);
    if (!std::isfinite(delta)) throw std::invalid_argument("update_v: delta not finite");
    list_v_.push_back(VDelta{i, j, delta});
    maybe_recompute();
}

void DynamicAttention::maybe_recompute() {
    if (list_c_.size() >= threshold_ || list_v_.size() >= threshold_) recompute();
}

double DynamicAttention::query(std::size_t i, std::size_t j) const {
    check_indices(i, j);
    double val = C_snap_(i, j);
    for (const CDelta& cd : list_c_) val += cd.a[i] * cd.b[j];
    for (const VDelta& vd : list_v_)
        if (vd.col == j) val += A_(i, vd.row) * vd.delta;
    if (count_ops_) {
        ops_.mults += list_c_.size() + list_v_.size() + 1;
        ops_.adds += list_c_.size() + list_v_.size();
    }
    return val / s_[i];
}

void DynamicAttention::recompute() {
    // Fold V deltas into the snapshot; duplicates accumulate in list order.
    for (const VDelta& vd : list_v_) V_snap_(vd.row, vd.col) += vd.delta;

    // C <- C + sum_t a_t b_t^T  (the stacked rank-1 K-update contributions)
    for (const CDelta& cd : list_c_) {
        for (std::size_t r = 0; r < n_; ++r) {
            const double a = cd.a[r];
            if (a == 0.0) continue;
            double* crow = C_snap_.row(r);
            for (std::size_t j = 0; j < d_; ++j) crow[j] += a * cd.b[j];
        }
    }

    // C <- C + A_current * DeltaV, so C = A_current * V_snapshot exactly.
    // Each V delta touches one column of C via one column of A.
    for (const VDelta& vd : list_v_)
        for (std::size_t r = 0; r < n_; ++r)
            C_snap_(r, vd.col) += A_(r, vd.row) * vd.delta;

    s_ = row_sums(A_);  // from-scratch refresh bounds drift per epoch

    for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = 0; j < d_; ++j) B_snap_(i, j) = C_snap_(i, j) / s_[i];

    if (count_ops_) {
        ops_.mults += n_ * d_ * list_c_.size() + n_ * list_v_.size() + n_ * d_;
        ops_.adds += n_ * d_ * list_c_.size() + n_ * list_v_.size() + n_ * n_ +
                     list_v_.size();
    }

    list_c_.clear();
    list_v_.clear();
}

OpCounters DynamicAttention::op_counters() const {
    if (!count_ops_) throw std::logic_error("op counters: instrumentation disabled");
    return ops_;
}

double DynamicAttention::row_sum(std::size_t i) const {
    if (i >= n_) throw std::out_of_range("row index out of range");
    return s_[i];
}

void DynamicAttention::export_state(const std::string& dir) const {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    write_datn1(Q_, (fs::path(dir) / "Q.datn1").string());
    write_datn1(K_, (fs::path(dir) / "K.datn1").string());
    write_datn1(V_snap_, (fs::path(dir) / "V.datn1").string());
    write_datn1(B_snap_, (fs::path(dir) / "B.datn1").string());
    Matrix sm(n_, 1);
    for (std::size_t i = 0; i < n_; ++i) sm(i, 0) = s_[i];
    write_datn1(sm, (fs::path(dir) / "s.datn1").string());

    nlohmann::json manifest = {
        {"n", n_},          {"d", d_},         {"threshold", threshold_},
        {"ct_K", ct_k()},   {"ct_V", ct_v()},  {"rtol", rtol_},
    };
    std::ofstream os(fs::path(dir) / "manifest.json");
    if (!os) throw std::runtime_error("cannot write manifest in " + dir);
    os << manifest.dump(2) << "\n";
}

}  // namespace datn
