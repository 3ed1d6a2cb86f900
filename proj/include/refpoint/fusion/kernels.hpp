#pragma once

#include <cstddef>

// Dense row-major kernels used by the network. Every output element is owned by
// exactly one thread and accumulated in a fixed order, so results do not depend
// on the thread count.
namespace refpoint::fusion::kernels {

/// C[m x n] (+)= A[m x k] * B[k x n]
template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate);

/// C[m x n] (+)= A[k x m]^T * B[k x n]
template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate);

/// C[m x n] (+)= A[m x k] * B[n x k]^T
template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate);

/// rows x cols matrix: y[j] = bias[j] + x[i, j], in place
template <typename T>
void add_bias(std::size_t rows, std::size_t cols, const T* bias, T* x);

/// out[j] (+)= sum_i x[i, j]
template <typename T>
void column_sums(std::size_t rows, std::size_t cols, const T* x, T* out, bool accumulate);

template <typename T>
void relu_inplace(std::size_t n, T* x);

/// grad[i] = 0 where act[i] <= 0
template <typename T>
void relu_mask(std::size_t n, const T* act, T* grad);

/// Gather k x k neighbourhoods of an (h x w x c) map per sample into rows of
/// length k*k*c, zero outside the map. `pad` positions precede the first row/column.
template <typename T>
void im2col(std::size_t batch, int h, int w, int c, int k, int pad, const T* in, T* col);

/// Adjoint of im2col: in (+)= scatter(col).
template <typename T>
void col2im(std::size_t batch, int h, int w, int c, int k, int pad, const T* col, T* in, bool accumulate);

}  // namespace refpoint::fusion::kernels
