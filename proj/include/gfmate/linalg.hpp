#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace gfmate {

/// Row-major dense matrix of doubles.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const noexcept {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  DenseMatrix transposed() const;
  bool all_finite() const noexcept;
  double frobenius_norm() const noexcept;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Compressed sparse row matrix (square, N×N) holding normalized adjacency.
struct CsrAdjacency {
  std::vector<std::size_t> row_ptr;
  std::vector<std::uint32_t> col_idx;
  std::vector<double> values;

  std::size_t num_rows() const noexcept {
    return row_ptr.empty() ? 0 : row_ptr.size() - 1;
  }
  std::size_t nnz() const noexcept { return col_idx.size(); }

  /// Value at (i, j), or 0 when not stored.
  double at(std::size_t i, std::size_t j) const noexcept;

  /// Checks the structural invariants; throws shape error on violation.
  void validate() const;
};

/// a · b, rows accumulated in ascending column order of `a`.
DenseMatrix spmm(const CsrAdjacency& a, const DenseMatrix& b);

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
/// aᵀ · b
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
/// a · bᵀ
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);

void scale_in_place(DenseMatrix& m, double factor) noexcept;
/// y += factor · x
void axpy(double factor, const DenseMatrix& x, DenseMatrix& y);

void relu_in_place(DenseMatrix& m) noexcept;

double dot(std::span<const double> a, std::span<const double> b) noexcept;
double norm2(std::span<const double> a) noexcept;

inline constexpr double kZeroNormGuard = 1e-12;

/// Cosine similarity; 0 when either norm is below kZeroNormGuard.
double cosine_sim(std::span<const double> h, std::span<const double> e);

/// softmax(z / tau) with max subtraction.
std::vector<double> row_softmax(std::span<const double> z, double tau);

/// log Σ exp(z), stable.
double log_sum_exp(std::span<const double> z) noexcept;

/// −Σ p log p with 0 log 0 = 0.
double shannon_entropy(std::span<const double> p);

/// Lowest index of the maximum / minimum element.
std::size_t argmax(std::span<const double> v) noexcept;
std::size_t argmin(std::span<const double> v) noexcept;

}  // namespace gfmate
