#include "swm/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#if defined(__AVX512F__)
#include <immintrin.h>
#endif

namespace swm {

namespace {

constexpr std::size_t kTileRows = 8;
constexpr std::size_t kTileCols = 24;

constexpr std::size_t kBlockDepth = 256;  // k per packed block
constexpr std::size_t kBlockRows = 512;   // rows of A per packed block

// C[0..8, 0..24) (+)= A * P over `depth` steps. A is packed as depth x 8
// (element (r, p) at a[p * 8 + r]) and P as depth x 24. With `accumulate`
// the fma chains continue from the values already in C, so splitting k into
// blocks yields exactly the unsplit chain.
#if defined(__AVX512F__)
void tile_kernel(std::size_t depth, const double* a, const double* panel, double* c, std::size_t ldc,
                 bool accumulate) {
    __m512d acc[kTileRows][3];
    for (std::size_t r = 0; r < kTileRows; ++r) {
        for (std::size_t v = 0; v < 3; ++v) {
            acc[r][v] = accumulate ? _mm512_loadu_pd(c + r * ldc + 8 * v) : _mm512_setzero_pd();
        }
    }
    for (std::size_t p = 0; p < depth; ++p) {
        const double* bp = panel + p * kTileCols;
        const __m512d b0 = _mm512_loadu_pd(bp);
        const __m512d b1 = _mm512_loadu_pd(bp + 8);
        const __m512d b2 = _mm512_loadu_pd(bp + 16);
        const double* ap = a + p * kTileRows;
        for (std::size_t r = 0; r < kTileRows; ++r) {
            const __m512d av = _mm512_set1_pd(ap[r]);
            acc[r][0] = _mm512_fmadd_pd(av, b0, acc[r][0]);
            acc[r][1] = _mm512_fmadd_pd(av, b1, acc[r][1]);
            acc[r][2] = _mm512_fmadd_pd(av, b2, acc[r][2]);
        }
    }
    for (std::size_t r = 0; r < kTileRows; ++r) {
        _mm512_storeu_pd(c + r * ldc, acc[r][0]);
        _mm512_storeu_pd(c + r * ldc + 8, acc[r][1]);
        _mm512_storeu_pd(c + r * ldc + 16, acc[r][2]);
    }
}
#else
void tile_kernel(std::size_t depth, const double* a, const double* panel, double* c, std::size_t ldc,
                 bool accumulate) {
    double acc[kTileRows][kTileCols];
    for (std::size_t r = 0; r < kTileRows; ++r) {
        for (std::size_t j = 0; j < kTileCols; ++j) acc[r][j] = accumulate ? c[r * ldc + j] : 0.0;
    }
    for (std::size_t p = 0; p < depth; ++p) {
        const double* bp = panel + p * kTileCols;
        const double* ap = a + p * kTileRows;
        for (std::size_t r = 0; r < kTileRows; ++r) {
            for (std::size_t j = 0; j < kTileCols; ++j) acc[r][j] = std::fma(ap[r], bp[j], acc[r][j]);
        }
    }
    for (std::size_t r = 0; r < kTileRows; ++r) {
        std::copy_n(acc[r], kTileCols, c + r * ldc);
    }
}
#endif

// Shared driver. Every output element goes through tile_kernel; ragged
// edges are zero-padded so the summation order never depends on m or n.
template <bool TransposedA>
void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
    if (m == 0 || n == 0) return;
    if (k == 0) {
        std::fill_n(c, m * n, 0.0);
        return;
    }
    // Normal A: (r, p) at a[r * k + p]. Transposed A (stored k x m): a[p * m + r].
    const std::size_t rs = TransposedA ? 1 : k;
    const std::size_t ks = TransposedA ? m : 1;

    std::vector<double> a_pack(kBlockRows * kBlockDepth);
    std::vector<double> panel(kBlockDepth * kTileCols);
    double c_pad[kTileRows * kTileCols];

    for (std::size_t p0 = 0; p0 < k; p0 += kBlockDepth) {
        const std::size_t depth = std::min(kBlockDepth, k - p0);
        const bool accumulate = p0 > 0;
        for (std::size_t i0 = 0; i0 < m; i0 += kBlockRows) {
            const std::size_t rows = std::min(kBlockRows, m - i0);
            const std::size_t tiles = (rows + kTileRows - 1) / kTileRows;
            for (std::size_t t = 0; t < tiles; ++t) {
                double* dst = a_pack.data() + t * depth * kTileRows;
                for (std::size_t r = 0; r < kTileRows; ++r) {
                    const std::size_t row = t * kTileRows + r;
                    if (row >= rows) {
                        for (std::size_t p = 0; p < depth; ++p) dst[p * kTileRows + r] = 0.0;
                        continue;
                    }
                    const double* src = a + (i0 + row) * rs + p0 * ks;
                    for (std::size_t p = 0; p < depth; ++p) dst[p * kTileRows + r] = src[p * ks];
                }
            }

            for (std::size_t j = 0; j < n; j += kTileCols) {
                const std::size_t width = std::min(kTileCols, n - j);
                for (std::size_t p = 0; p < depth; ++p) {
                    double* dst = panel.data() + p * kTileCols;
                    std::copy_n(b + (p0 + p) * n + j, width, dst);
                    std::fill(dst + width, dst + kTileCols, 0.0);
                }
                for (std::size_t t = 0; t < tiles; ++t) {
                    const std::size_t row0 = i0 + t * kTileRows;
                    const std::size_t height = std::min(kTileRows, m - row0);
                    const double* ap = a_pack.data() + t * depth * kTileRows;
                    double* out = c + row0 * n + j;
                    if (width == kTileCols && height == kTileRows) {
                        tile_kernel(depth, ap, panel.data(), out, n, accumulate);
                        continue;
                    }
                    if (accumulate) {
                        for (std::size_t r = 0; r < height; ++r) std::copy_n(out + r * n, width, c_pad + r * kTileCols);
                    }
                    tile_kernel(depth, ap, panel.data(), c_pad, kTileCols, accumulate);
                    for (std::size_t r = 0; r < height; ++r) std::copy_n(c_pad + r * kTileCols, width, out + r * n);
                }
            }
        }
    }
}

}  // namespace

void matmul(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
    gemm<false>(m, n, k, a, b, c);
}

void matmul_at(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
    gemm<true>(m, n, k, a, b, c);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
    Matrix out = Matrix::for_overwrite(a.rows(), b.cols());
    matmul(a.rows(), b.cols(), a.cols(), a.data(), b.data(), out.data());
    return out;
}

Matrix matmul_transposed(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw std::invalid_argument("matmul_transposed: inner dimensions differ");
    return matmul(a, transpose(b));
}

Matrix transposed_matmul(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw std::invalid_argument("transposed_matmul: inner dimensions differ");
    Matrix out = Matrix::for_overwrite(a.cols(), b.cols());
    matmul_at(a.cols(), b.cols(), a.rows(), a.data(), b.data(), out.data());
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out = Matrix::for_overwrite(a.cols(), a.rows());
    constexpr std::size_t block = 32;
    for (std::size_t r0 = 0; r0 < a.rows(); r0 += block) {
        for (std::size_t c0 = 0; c0 < a.cols(); c0 += block) {
            const std::size_t r1 = std::min(a.rows(), r0 + block);
            const std::size_t c1 = std::min(a.cols(), c0 + block);
            for (std::size_t r = r0; r < r1; ++r) {
                for (std::size_t c = c0; c < c1; ++c) out(c, r) = a(r, c);
            }
        }
    }
    return out;
}

}  // namespace swm
