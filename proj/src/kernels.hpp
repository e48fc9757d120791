#pragma once

// Dense row-major matrix products with a fixed accumulation order.
//
// Every output element forms its sum over the shared dimension in fixed blocks of ascending index,
// each block starting from zero and then added to the destination. Vector lanes hold independent outputs, never parts
// of one sum, so results do not depend on buffer alignment or on the tile an element falls in.

#include <cstddef>
#include <cstring>
#include <vector>

namespace aecnn::kernels {

namespace detail {

typedef double v4d __attribute__((vector_size(32)));

inline v4d load(const double* p) {
    v4d v;
    std::memcpy(&v, p, sizeof v);
    return v;
}

inline void store(double* p, v4d v) { std::memcpy(p, &v, sizeof v); }

// A is addressed as a[row * row_stride + t * depth_stride]; B row t starts at b + t * m.
struct Lhs {
    const double* a;
    std::size_t row_stride;
    std::size_t depth_stride;
    double at(std::size_t row, std::size_t t) const { return a[row * row_stride + t * depth_stride]; }
};

constexpr std::size_t kRows = 4;
constexpr std::size_t kVecs = 4;
constexpr std::size_t kDepthBlock = 256;

template <std::size_t R, std::size_t V>
inline void tile(const Lhs& lhs, std::size_t r, std::size_t t0, std::size_t t1, const double* b, double* c,
                 std::size_t m) {
    v4d acc[R][V] = {};
    for (std::size_t t = t0; t < t1; ++t) {
        v4d w[V];
        for (std::size_t v = 0; v < V; ++v) w[v] = load(b + t * m + 4 * v);
        for (std::size_t i = 0; i < R; ++i) {
            const double s = lhs.at(r + i, t);
            const v4d x = {s, s, s, s};
            for (std::size_t v = 0; v < V; ++v) acc[i][v] += x * w[v];
        }
    }
    for (std::size_t i = 0; i < R; ++i)
        for (std::size_t v = 0; v < V; ++v) {
            double* p = c + (r + i) * m + 4 * v;
            store(p, load(p) + acc[i][v]);
        }
}

template <std::size_t R>
inline void row_block(const Lhs& lhs, std::size_t r, std::size_t t0, std::size_t t1, const double* b, double* c,
                      std::size_t m) {
    std::size_t j = 0;
    for (; j + 4 * kVecs <= m; j += 4 * kVecs) tile<R, kVecs>(lhs, r, t0, t1, b + j, c + j, m);
    switch ((m - j) / 4) {
        case 3: tile<R, 3>(lhs, r, t0, t1, b + j, c + j, m); j += 12; break;
        case 2: tile<R, 2>(lhs, r, t0, t1, b + j, c + j, m); j += 8; break;
        case 1: tile<R, 1>(lhs, r, t0, t1, b + j, c + j, m); j += 4; break;
        default: break;
    }
    for (std::size_t i = r; i < r + R; ++i)
        for (std::size_t jj = j; jj < m; ++jj) {
            double acc = 0.0;
            for (std::size_t t = t0; t < t1; ++t) acc += lhs.at(i, t) * b[t * m + jj];
            c[i * m + jj] += acc;
        }
}

/// C[n x m] += L[n x depth] * B[depth x m], the depth summed in fixed blocks.
inline void product(const Lhs& lhs, const double* b, double* c, std::size_t n, std::size_t depth, std::size_t m) {
    for (std::size_t t0 = 0; t0 < depth; t0 += kDepthBlock) {
        const std::size_t t1 = depth - t0 < kDepthBlock ? depth : t0 + kDepthBlock;
        std::size_t r = 0;
        for (; r + kRows <= n; r += kRows) row_block<kRows>(lhs, r, t0, t1, b, c, m);
        switch (n - r) {
            case 3: row_block<3>(lhs, r, t0, t1, b, c, m); break;
            case 2: row_block<2>(lhs, r, t0, t1, b, c, m); break;
            case 1: row_block<1>(lhs, r, t0, t1, b, c, m); break;
            default: break;
        }
    }
}

}  // namespace detail

/// C[n x m] += A[n x k] * B[k x m].
inline void gemm_acc(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m) {
    detail::product({a, k, 1}, b, c, n, k, m);
}

/// C[k x m] += A[n x k]ᵀ * B[n x m].
inline void gemm_tn_acc(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m) {
    detail::product({a, 1, k}, b, c, k, n, m);
}

/// Bᵀ for B[rows x cols].
inline std::vector<double> transpose(const double* b, std::size_t rows, std::size_t cols) {
    std::vector<double> t(rows * cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) t[j * rows + i] = b[i * cols + j];
    return t;
}

/// C[n x k] += A[n x m] * B[k x m]ᵀ.
inline void gemm_nt_acc(const double* a, const double* b, double* c, std::size_t n, std::size_t m, std::size_t k) {
    const auto bt = transpose(b, k, m);
    gemm_acc(a, bt.data(), c, n, m, k);
}

}  // namespace aecnn::kernels
