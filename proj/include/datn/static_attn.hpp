#pragma once

#include "datn/matrix.hpp"

namespace datn {

// Exact stateless attention: B = D^-1 exp(QK^T) V with D = diag(exp(QK^T) 1_n).
// Ground-truth oracle for the dynamic structure.
Matrix attention(const Matrix& Q, const Matrix& K, const Matrix& V);

// exp(QK^T) V with no D^-1 factor.
Matrix unnormalized_attention(const Matrix& Q, const Matrix& K, const Matrix& V);

// Entry point on the logits matrix M = QK^T directly. Lets tests assert
// row-softmax shift invariance without engineering a (Q,K) pair.
Matrix attention_from_logits(const Matrix& M, const Matrix& V);

Matrix unnormalized_attention_from_logits(const Matrix& M, const Matrix& V);

}  // namespace datn
