#include "refpoint/fusion/kernels.hpp"

#include <algorithm>
#include <cstring>

namespace refpoint::fusion::kernels {

namespace {
constexpr std::size_t kRowBlock = 64;
}

template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate) {
    const auto rows = static_cast<long>(m);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < rows; ++i) {
        T* ci = c + static_cast<std::size_t>(i) * n;
        if (!accumulate) std::fill(ci, ci + n, T(0));
        const T* ai = a + static_cast<std::size_t>(i) * k;
        for (std::size_t p = 0; p < k; ++p) {
            const T av = ai[p];
            if (av == T(0)) continue;
            const T* bp = b + p * n;
#pragma omp simd
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate) {
    if (!accumulate) std::fill(c, c + m * n, T(0));
    const auto blocks = static_cast<long>((m + kRowBlock - 1) / kRowBlock);
#pragma omp parallel for schedule(static)
    for (long blk = 0; blk < blocks; ++blk) {
        const std::size_t i0 = static_cast<std::size_t>(blk) * kRowBlock;
        const std::size_t i1 = std::min(m, i0 + kRowBlock);
        for (std::size_t p = 0; p < k; ++p) {
            const T* ap = a + p * m;
            const T* bp = b + p * n;
            for (std::size_t i = i0; i < i1; ++i) {
                const T av = ap[i];
                if (av == T(0)) continue;
                T* ci = c + i * n;
#pragma omp simd
                for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
            }
        }
    }
}

template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate) {
    const auto rows = static_cast<long>(m);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < rows; ++i) {
        const T* ai = a + static_cast<std::size_t>(i) * k;
        T* ci = c + static_cast<std::size_t>(i) * n;
        for (std::size_t j = 0; j < n; ++j) {
            const T* bj = b + j * k;
            T acc = 0;
#pragma omp simd reduction(+ : acc)
            for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] = accumulate ? ci[j] + acc : acc;
        }
    }
}

template <typename T>
void add_bias(std::size_t rows, std::size_t cols, const T* bias, T* x) {
    const auto r = static_cast<long>(rows);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < r; ++i) {
        T* xi = x + static_cast<std::size_t>(i) * cols;
#pragma omp simd
        for (std::size_t j = 0; j < cols; ++j) xi[j] += bias[j];
    }
}

template <typename T>
void column_sums(std::size_t rows, std::size_t cols, const T* x, T* out, bool accumulate) {
    if (!accumulate) std::fill(out, out + cols, T(0));
    for (std::size_t i = 0; i < rows; ++i) {
        const T* xi = x + i * cols;
#pragma omp simd
        for (std::size_t j = 0; j < cols; ++j) out[j] += xi[j];
    }
}

template <typename T>
void relu_inplace(std::size_t n, T* x) {
#pragma omp simd
    for (std::size_t i = 0; i < n; ++i) x[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_mask(std::size_t n, const T* act, T* grad) {
#pragma omp simd
    for (std::size_t i = 0; i < n; ++i) grad[i] = act[i] > T(0) ? grad[i] : T(0);
}

template <typename T>
void im2col(std::size_t batch, int h, int w, int c, int k, int pad, const T* in, T* col) {
    const std::size_t row_len = static_cast<std::size_t>(k * k * c);
    const std::size_t map = static_cast<std::size_t>(h * w * c);
    const auto nb = static_cast<long>(batch);
#pragma omp parallel for schedule(static)
    for (long b = 0; b < nb; ++b) {
        const T* src = in + static_cast<std::size_t>(b) * map;
        T* dst = col + static_cast<std::size_t>(b) * static_cast<std::size_t>(h * w) * row_len;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                T* row = dst + static_cast<std::size_t>(y * w + x) * row_len;
                for (int ky = 0; ky < k; ++ky) {
                    for (int kx = 0; kx < k; ++kx) {
                        T* seg = row + static_cast<std::size_t>((ky * k + kx) * c);
                        const int sy = y + ky - pad;
                        const int sx = x + kx - pad;
                        if (sy < 0 || sy >= h || sx < 0 || sx >= w) {
                            std::fill(seg, seg + c, T(0));
                        } else {
                            std::memcpy(seg, src + static_cast<std::size_t>((sy * w + sx) * c), sizeof(T) * c);
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im(std::size_t batch, int h, int w, int c, int k, int pad, const T* col, T* in, bool accumulate) {
    const std::size_t row_len = static_cast<std::size_t>(k * k * c);
    const std::size_t map = static_cast<std::size_t>(h * w * c);
    if (!accumulate) std::fill(in, in + batch * map, T(0));
    const auto nb = static_cast<long>(batch);
#pragma omp parallel for schedule(static)
    for (long b = 0; b < nb; ++b) {
        T* dst = in + static_cast<std::size_t>(b) * map;
        const T* src = col + static_cast<std::size_t>(b) * static_cast<std::size_t>(h * w) * row_len;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const T* row = src + static_cast<std::size_t>(y * w + x) * row_len;
                for (int ky = 0; ky < k; ++ky) {
                    for (int kx = 0; kx < k; ++kx) {
                        const int sy = y + ky - pad;
                        const int sx = x + kx - pad;
                        if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
                        const T* seg = row + static_cast<std::size_t>((ky * k + kx) * c);
                        T* d = dst + static_cast<std::size_t>((sy * w + sx) * c);
#pragma omp simd
                        for (int ch = 0; ch < c; ++ch) d[ch] += seg[ch];
                    }
                }
            }
        }
    }
}

#define REFPOINT_INSTANTIATE(T)                                                                               \
    template void gemm_nn<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*, bool);          \
    template void gemm_tn<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*, bool);          \
    template void gemm_nt<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*, bool);          \
    template void add_bias<T>(std::size_t, std::size_t, const T*, T*);                                      \
    template void column_sums<T>(std::size_t, std::size_t, const T*, T*, bool);                             \
    template void relu_inplace<T>(std::size_t, T*);                                                         \
    template void relu_mask<T>(std::size_t, const T*, T*);                                                  \
    template void im2col<T>(std::size_t, int, int, int, int, int, const T*, T*);                            \
    template void col2im<T>(std::size_t, int, int, int, int, int, const T*, T*, bool);

REFPOINT_INSTANTIATE(float)
REFPOINT_INSTANTIATE(double)

#undef REFPOINT_INSTANTIATE

}  // namespace refpoint::fusion::kernels
