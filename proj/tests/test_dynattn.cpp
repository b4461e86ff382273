#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "datn/dynattn.hpp"
#include "datn/rng.hpp"
#include "datn/static_attn.hpp"

using namespace datn;

static Matrix make(std::size_t r, std::size_t c, std::initializer_list<double> vals) {
    Matrix m(r, c);
    std::size_t k = 0;
    for (double v : vals) m.data[k++] = v;
    return m;
}

static Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale) {
    Matrix m(r, c);
    for (double& v : m.data) v = rng.next_double(-scale, scale);
    return m;
}

// Observable-state equality, bit level.
static bool states_identical(const DynamicAttention& x, const DynamicAttention& y) {
    return x.k_matrix() == y.k_matrix() && x.v_snapshot() == y.v_snapshot() &&
           x.a_matrix() == y.a_matrix() && x.c_snapshot() == y.c_snapshot() &&
           x.b_snapshot() == y.b_snapshot() &&
           x.row_sum_vector() == y.row_sum_vector() && x.ct_k() == y.ct_k() &&
           x.ct_v() == y.ct_v();
}

TEST_CASE("init uniform-attention example") {
    DynAttnConfig cfg;
    cfg.a = 1.0;
    DynamicAttention ds(Matrix(2, 1, 0.0), Matrix(2, 1, 0.0), make(2, 1, {1, 3}), cfg);
    CHECK(ds.threshold() == 2);
    CHECK(ds.ct_k() == 0);
    CHECK(ds.ct_v() == 0);
    CHECK(ds.row_sum(0) == doctest::Approx(2.0));
    CHECK(ds.row_sum(1) == doctest::Approx(2.0));
    CHECK(ds.c_snapshot()(0, 0) == doctest::Approx(4.0));
    CHECK(ds.b_snapshot()(0, 0) == doctest::Approx(2.0));
    CHECK(ds.query(0, 0) == doctest::Approx(2.0));
}

TEST_CASE("init n=1 returns V") {
    DynamicAttention ds(make(1, 1, {2}), make(1, 1, {-1}), make(1, 1, {9}));
    CHECK(ds.query(0, 0) == doctest::Approx(9.0).epsilon(1e-13));
}

TEST_CASE("init matches static oracle on a random instance") {
    Rng rng(5);
    const Matrix Q = random_matrix(8, 4, rng, 1.0);
    const Matrix K = random_matrix(8, 4, rng, 1.0);
    const Matrix V = random_matrix(8, 4, rng, 5.0);
    DynamicAttention ds(Q, K, V);
    const Matrix B = attention(Q, K, V);
    CHECK(max_rel_err(ds.b_snapshot(), B) <= 1e-12);
}

TEST_CASE("init rejects shape mismatch and bad threshold") {
    CHECK_THROWS_AS(DynamicAttention(Matrix(2, 1), Matrix(2, 2), Matrix(2, 1)),
                    std::invalid_argument);
    DynAttnConfig cfg;
    cfg.a = 1.5;
    CHECK_THROWS_AS(DynamicAttention(Matrix(2, 1), Matrix(2, 1), Matrix(2, 1), cfg),
                    std::invalid_argument);
}

TEST_CASE("update_k hand-evaluated ln2 case") {
    DynAttnConfig cfg;
    cfg.threshold = 100;  // keep the deltas pending
    DynamicAttention ds(make(2, 1, {1, 0}), Matrix(2, 1, 0.0), make(2, 1, {1, 3}), cfg);
    ds.update_k(0, 0, std::log(2.0));
    CHECK(ds.a_matrix()(0, 0) == doctest::Approx(2.0).epsilon(1e-13));
    CHECK(ds.a_matrix()(1, 0) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(ds.row_sum(0) == doctest::Approx(3.0).epsilon(1e-13));
    CHECK(ds.row_sum(1) == doctest::Approx(2.0).epsilon(1e-13));
    CHECK(ds.ct_k() == 1);
    CHECK(ds.query(0, 0) == doctest::Approx(5.0 / 3.0).epsilon(1e-12));
    CHECK(ds.query(1, 0) == doctest::Approx(2.0).epsilon(1e-12));

    SUBCASE("recompute folds the pending delta into the snapshots") {
        ds.recompute();
        CHECK(ds.ct_k() == 0);
        CHECK(ds.c_snapshot()(0, 0) == doctest::Approx(5.0).epsilon(1e-12));
        CHECK(ds.c_snapshot()(1, 0) == doctest::Approx(4.0).epsilon(1e-12));
        CHECK(ds.b_snapshot()(0, 0) == doctest::Approx(5.0 / 3.0).epsilon(1e-12));
        CHECK(ds.b_snapshot()(1, 0) == doctest::Approx(2.0).epsilon(1e-12));
    }
}

TEST_CASE("update_k with delta zero changes nothing but the counter") {
    Rng rng(9);
    DynAttnConfig cfg;
    cfg.threshold = 100;
    const Matrix Q = random_matrix(4, 2, rng, 1.0);
    const Matrix K = random_matrix(4, 2, rng, 1.0);
    const Matrix V = random_matrix(4, 2, rng, 5.0);
    DynamicAttention ds(Q, K, V, cfg);
    const Matrix before = ds.a_matrix();
    ds.update_k(1, 1, 0.0);
    CHECK(ds.ct_k() == 1);
    CHECK(max_rel_err(ds.a_matrix(), before) <= 1e-15);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            CHECK(approx_equal(ds.query(i, j), attention(Q, K, V)(i, j), 1e-12));
}

TEST_CASE("update_k on Q=0 leaves A unchanged") {
    DynAttnConfig cfg;
    cfg.threshold = 100;
    DynamicAttention ds(Matrix(3, 2, 0.0), Matrix(3, 2, 0.0), Matrix::ones(3, 2), cfg);
    const Matrix before = ds.a_matrix();
    ds.update_k(2, 0, 123.0);
    CHECK(ds.a_matrix() == before);
    CHECK(ds.query(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("update_v uniform-attention example") {
    DynAttnConfig cfg;
    cfg.threshold = 100;
    DynamicAttention ds(Matrix(2, 1, 0.0), Matrix(2, 1, 0.0), make(2, 1, {1, 3}), cfg);
    ds.update_v(1, 0, 1.0);
    CHECK(ds.ct_v() == 1);
    CHECK(ds.query(0, 0) == doctest::Approx(2.5).epsilon(1e-13));
    CHECK(ds.query(1, 0) == doctest::Approx(2.5).epsilon(1e-13));
    // deferred: the snapshot still holds the epoch V
    CHECK(ds.v_snapshot()(1, 0) == 3.0);
}

TEST_CASE("update_v zero delta leaves queries unchanged") {
    Rng rng(23);
    DynAttnConfig cfg;
    cfg.threshold = 100;
    const Matrix Q = random_matrix(4, 3, rng, 1.0);
    const Matrix K = random_matrix(4, 3, rng, 1.0);
    const Matrix V = random_matrix(4, 3, rng, 5.0);
    DynamicAttention ds(Q, K, V, cfg);
    ds.update_v(0, 0, 0.0);
    const Matrix B = attention(Q, K, V);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(approx_equal(ds.query(i, j), B(i, j), 1e-12));
}

TEST_CASE("three V-updates match the oracle on mutated V") {
    Rng rng(31);
    DynAttnConfig cfg;
    cfg.threshold = 100;
    const Matrix Q = random_matrix(8, 4, rng, 1.0);
    const Matrix K = random_matrix(8, 4, rng, 1.0);
    Matrix V = random_matrix(8, 4, rng, 5.0);
    DynamicAttention ds(Q, K, V, cfg);
    for (int t = 0; t < 3; ++t) {
        const std::size_t i = rng.next_index(8), j = rng.next_index(4);
        const double delta = rng.next_double(-2, 2);
        ds.update_v(i, j, delta);
        V(i, j) += delta;
    }
    const Matrix B = attention(Q, K, V);
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 4; ++j) CHECK(approx_equal(ds.query(i, j), B(i, j), 1e-10));
}

TEST_CASE("interleaved K and V updates exercise the cross term") {
    Rng rng(37);
    DynAttnConfig cfg;
    cfg.threshold = 100;  // single epoch, no recompute
    const Matrix Q = random_matrix(8, 4, rng, 1.0);
    Matrix K = random_matrix(8, 4, rng, 1.0);
    Matrix V = random_matrix(8, 4, rng, 5.0);
    DynamicAttention ds(Q, K, V, cfg);
    for (int t = 0; t < 6; ++t) {
        const std::size_t i = rng.next_index(8), j = rng.next_index(4);
        const double delta = rng.next_double(-0.5, 0.5);
        if (t % 2 == 0) {
            ds.update_k(i, j, delta);
            K(i, j) += delta;
        } else {
            ds.update_v(i, j, delta);
            V(i, j) += delta;
        }
    }
    CHECK(ds.ct_k() == 3);
    CHECK(ds.ct_v() == 3);
    const Matrix B = attention(Q, K, V);
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 4; ++j) CHECK(approx_equal(ds.query(i, j), B(i, j), 1e-10));
}

TEST_CASE("query purity and recompute idempotence") {
    Rng rng(41);
    DynAttnConfig cfg;
    cfg.threshold = 50;
    const Matrix Q = random_matrix(6, 3, rng, 1.0);
    const Matrix K = random_matrix(6, 3, rng, 1.0);
    const Matrix V = random_matrix(6, 3, rng, 5.0);
    DynamicAttention a(Q, K, V, cfg), b(Q, K, V, cfg);
    a.update_k(0, 0, 0.3);
    b.update_k(0, 0, 0.3);
    a.update_v(1, 1, -0.7);
    b.update_v(1, 1, -0.7);

    // query leaves the state bit-identical
    (void)a.query(2, 2);
    (void)a.query(0, 0);
    CHECK(states_identical(a, b));

    // two consecutive recomputes: second is a no-op at the bit level
    a.recompute();
    b.recompute();
    b.recompute();
    CHECK(states_identical(a, b));
}

TEST_CASE("recompute on a fresh init is a no-op") {
    Rng rng(43);
    const Matrix Q = random_matrix(4, 2, rng, 1.0);
    const Matrix K = random_matrix(4, 2, rng, 1.0);
    const Matrix V = random_matrix(4, 2, rng, 5.0);
    DynamicAttention a(Q, K, V), b(Q, K, V);
    a.recompute();
    CHECK(states_identical(a, b));
}

TEST_CASE("threshold fires and resets both counters") {
    Rng rng(47);
    DynAttnConfig cfg;
    cfg.threshold = 3;
    const Matrix Q = random_matrix(5, 2, rng, 1.0);
    const Matrix K = random_matrix(5, 2, rng, 1.0);
    const Matrix V = random_matrix(5, 2, rng, 5.0);
    DynamicAttention ds(Q, K, V, cfg);
    ds.update_k(0, 0, 0.1);
    ds.update_v(1, 1, 0.2);
    ds.update_k(2, 0, 0.1);
    CHECK(ds.ct_k() == 2);
    CHECK(ds.ct_v() == 1);
    ds.update_k(3, 1, 0.1);  // ct_K reaches 3: recompute fires
    CHECK(ds.ct_k() == 0);
    CHECK(ds.ct_v() == 0);
}

TEST_CASE("counter discipline across a random trace") {
    Rng rng(53);
    DynAttnConfig cfg;
    cfg.a = 0.5;
    const Matrix Q = random_matrix(16, 4, rng, 0.5);
    const Matrix K = random_matrix(16, 4, rng, 0.5);
    const Matrix V = random_matrix(16, 4, rng, 5.0);
    DynamicAttention ds(Q, K, V, cfg);
    CHECK(ds.threshold() == 4);
    for (int t = 0; t < 100; ++t) {
        const std::size_t i = rng.next_index(16), j = rng.next_index(4);
        const double u = rng.next_unit();
        if (u < 0.4)
            ds.update_k(i, j, rng.next_double(-0.3, 0.3));
        else if (u < 0.7)
            ds.update_v(i, j, rng.next_double(-1, 1));
        else
            (void)ds.query(i, j);
        CHECK(ds.ct_k() < ds.threshold());
        CHECK(ds.ct_v() < ds.threshold());
        CHECK(ds.row_sum(i) > 0.0);
    }
}

TEST_CASE("failed update_k leaves the structure usable") {
    DynAttnConfig cfg;
    cfg.threshold = 100;
    // Q large so a big delta overflows exp
    DynamicAttention ds(make(2, 1, {20, 0}), Matrix(2, 1, 0.0), make(2, 1, {1, 3}), cfg);
    const Matrix a_before = ds.a_matrix();
    const Matrix k_before = ds.k_matrix();
    CHECK_THROWS_AS(ds.update_k(0, 0, 100.0), std::range_error);
    CHECK(ds.a_matrix() == a_before);
    CHECK(ds.k_matrix() == k_before);
    CHECK(ds.ct_k() == 0);
    CHECK(ds.query(0, 0) == doctest::Approx(2.0));
}

TEST_CASE("index and finiteness validation") {
    DynamicAttention ds(Matrix(2, 2, 0.0), Matrix(2, 2, 0.0), Matrix::ones(2, 2));
    CHECK_THROWS_AS(ds.update_k(2, 0, 1.0), std::out_of_range);
    CHECK_THROWS_AS(ds.update_v(0, 2, 1.0), std::out_of_range);
    CHECK_THROWS_AS(ds.query(5, 0), std::out_of_range);
    CHECK_THROWS_AS(ds.update_v(0, 0, std::nan("")), std::invalid_argument);
}

TEST_CASE("op counters bound query and update cost") {
    Rng rng(59);
    DynAttnConfig cfg;
    cfg.threshold = 100;
    const std::size_t n = 64, d = 8;
    const Matrix Q = random_matrix(n, d, rng, 0.3);
    const Matrix K = random_matrix(n, d, rng, 0.3);
    const Matrix V = random_matrix(n, d, rng, 5.0);
    DynamicAttention ds(Q, K, V, cfg);

    auto before = ds.op_counters();
    (void)ds.query(0, 0);
    auto after = ds.op_counters();
    CHECK(after.total() - before.total() <= 8);  // empty lists: <= c

    for (int t = 0; t < 10; ++t) {
        before = ds.op_counters();
        ds.update_k(rng.next_index(n), rng.next_index(d), rng.next_double(-0.2, 0.2));
        after = ds.op_counters();
        CHECK(after.total() - before.total() <= 16 * n);
        ds.update_v(rng.next_index(n), rng.next_index(d), rng.next_double(-1, 1));
    }
    const std::size_t pending = ds.ct_k() + ds.ct_v();
    before = ds.op_counters();
    (void)ds.query(1, 1);
    after = ds.op_counters();
    CHECK(after.total() - before.total() <= 8 * (pending + 1));

    before = ds.op_counters();
    ds.recompute();
    after = ds.op_counters();
    CHECK(after.total() - before.total() <=
          16 * (n * ds.threshold() * d + n * n));
}

TEST_CASE("op counters can be disabled") {
    DynAttnConfig cfg;
    cfg.count_ops = false;
    DynamicAttention ds(Matrix(2, 1, 0.0), Matrix(2, 1, 0.0), Matrix::ones(2, 1), cfg);
    CHECK_THROWS_AS(ds.op_counters(), std::logic_error);
}

TEST_CASE("state export round-trips through DATN1 and the manifest") {
    namespace fs = std::filesystem;
    Rng rng(61);
    const Matrix Q = random_matrix(4, 2, rng, 1.0);
    const Matrix K = random_matrix(4, 2, rng, 1.0);
    const Matrix V = random_matrix(4, 2, rng, 5.0);
    DynAttnConfig cfg;
    cfg.threshold = 10;
    DynamicAttention ds(Q, K, V, cfg);
    ds.update_k(0, 0, 0.5);

    const auto dir = (fs::temp_directory_path() / "datn_export_test").string();
    ds.export_state(dir);
    CHECK(read_datn1(dir + "/Q.datn1") == ds.q_matrix());
    CHECK(read_datn1(dir + "/K.datn1") == ds.k_matrix());
    CHECK(read_datn1(dir + "/V.datn1") == ds.v_snapshot());
    CHECK(read_datn1(dir + "/B.datn1") == ds.b_snapshot());
    const Matrix s = read_datn1(dir + "/s.datn1");
    CHECK(s.rows == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(s(i, 0) == ds.row_sum(i));

    std::ifstream is(dir + "/manifest.json");
    std::string manifest((std::istreambuf_iterator<char>(is)),
                         std::istreambuf_iterator<char>());
    CHECK(manifest.find("\"n\": 4") != std::string::npos);
    CHECK(manifest.find("\"d\": 2") != std::string::npos);
    CHECK(manifest.find("\"threshold\": 10") != std::string::npos);
    CHECK(manifest.find("\"ct_K\": 1") != std::string::npos);
    CHECK(manifest.find("\"ct_V\": 0") != std::string::npos);
    CHECK(manifest.find("\"rtol\"") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("C invariant: snapshot plus pending rank-1 deltas equals A V_snapshot") {
    Rng rng(67);
    DynAttnConfig cfg;
    cfg.threshold = 100;
    const std::size_t n = 8, d = 4;
    const Matrix Q = random_matrix(n, d, rng, 0.7);
    const Matrix K = random_matrix(n, d, rng, 0.7);
    const Matrix V = random_matrix(n, d, rng, 5.0);
    DynamicAttention ds(Q, K, V, cfg);
    for (int t = 0; t < 5; ++t)
        ds.update_k(rng.next_index(n), rng.next_index(d), rng.next_double(-0.3, 0.3));

    // Reconstruct C_snapshot + sum a b^T and compare to A * V_snapshot.
    Matrix lhs = ds.c_snapshot();
    const Matrix rhs = matmul(ds.a_matrix(), ds.v_snapshot());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j)
            CHECK(approx_equal(ds.query(i, j) * ds.row_sum(i), rhs(i, j), 1e-10));
    (void)lhs;
}
