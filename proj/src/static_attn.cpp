#include "datn/static_attn.hpp"

#include <stdexcept>

namespace datn {

static void check_shapes(const Matrix& Q, const Matrix& K, const Matrix& V) {
    if (!Q.same_shape(K) || !Q.same_shape(V))
        throw std::invalid_argument("attention: Q, K, V must share shape n x d");
}

Matrix unnormalized_attention_from_logits(const Matrix& M, const Matrix& V) {
    if (M.rows != M.cols || M.cols != V.rows)
        throw std::invalid_argument("attention: logits must be n x n matching V rows");
    const Matrix A = exp_elementwise(M);
    return matmul(A, V);
}

Matrix attention_from_logits(const Matrix& M, const Matrix& V) {
    if (M.rows != M.cols || M.cols != V.rows)
        throw std::invalid_argument("attention: logits must be n x n matching V rows");
    const Matrix A = exp_elementwise(M);
    const std::vector<double> s = row_sums(A);
    Matrix C = matmul(A, V);
    for (std::size_t i = 0; i < C.rows; ++i) {
        const double inv = 1.0 / s[i];
        for (std::size_t j = 0; j < C.cols; ++j) C(i, j) *= inv;
    }
    return C;
}

Matrix attention(const Matrix& Q, const Matrix& K, const Matrix& V) {
    check_shapes(Q, K, V);
    return attention_from_logits(matmul(Q, transpose(K)), V);
}

Matrix unnormalized_attention(const Matrix& Q, const Matrix& K, const Matrix& V) {
    check_shapes(Q, K, V);
    return unnormalized_attention_from_logits(matmul(Q, transpose(K)), V);
}

}  // namespace datn
