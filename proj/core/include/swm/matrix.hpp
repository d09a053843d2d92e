#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <type_traits>
#include <utility>
#include <vector>

namespace swm {

namespace detail {

// Leaves new elements default-initialised (indeterminate for double) so
// buffers that a kernel fully overwrites skip the zero-fill pass.
template <class T>
struct DefaultInitAllocator : std::allocator<T> {
    template <class U>
    struct rebind {
        using other = DefaultInitAllocator<U>;
    };
    using std::allocator<T>::allocator;

    template <class U>
    void construct(U* p) noexcept(std::is_nothrow_default_constructible_v<U>) {
        ::new (static_cast<void*>(p)) U;
    }
    template <class U, class... Args>
    void construct(U* p, Args&&... args) {
        std::allocator_traits<std::allocator<T>>::construct(static_cast<std::allocator<T>&>(*this), p,
                                                            std::forward<Args>(args)...);
    }
};

}  // namespace detail

/// Dense row-major matrix of doubles.
///
/// Rows are samples (points or streamlines), columns are features. Kept
/// deliberately small: storage, shape, and row access. Arithmetic lives in
/// the free functions below so that every kernel used by the network has a
/// single, fixed evaluation order.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    void resize(std::size_t rows, std::size_t cols, double fill = 0.0) {
        rows_ = rows;
        cols_ = cols;
        data_.assign(rows * cols, fill);
    }

    /// Shape change without initialising the contents; the caller must
    /// write every element before reading it.
    void reshape_for_overwrite(std::size_t rows, std::size_t cols) {
        rows_ = rows;
        cols_ = cols;
        data_.resize(rows * cols);
    }

    static Matrix for_overwrite(std::size_t rows, std::size_t cols) {
        Matrix m;
        m.reshape_for_overwrite(rows, cols);
        return m;
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double, detail::DefaultInitAllocator<double>> data_;
};

/// C = A * B for row-major A (m x k), B (k x n), C (m x n).
///
/// Each output element is the fused multiply-add chain over k in increasing
/// order, starting from zero. The result for one row of A never depends on
/// the other rows, on m, or on the instruction set the kernel was built for.
void matmul(std::size_t m, std::size_t n, std::size_t k,
            const double* a, const double* b, double* c);

/// C = A^T * B with A stored row-major as k x m. Same summation order as
/// matmul on the explicit transpose.
void matmul_at(std::size_t m, std::size_t n, std::size_t k,
               const double* a, const double* b, double* c);

/// out = a * b
Matrix matmul(const Matrix& a, const Matrix& b);

/// out = a * b^T (b given as n x k).
Matrix matmul_transposed(const Matrix& a, const Matrix& b);

/// out = a^T * b (a given as k x m).
Matrix transposed_matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

}  // namespace swm
