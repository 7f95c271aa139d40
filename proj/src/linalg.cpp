#include "gfmate/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gfmate/error.hpp"

namespace gfmate {

namespace {

std::string dims(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    fail(ErrorKind::shape, "dense matrix " + dims(rows, cols) + " given " +
                               std::to_string(data_.size()) + " values");
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::transposed() const {
  DenseMatrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

bool DenseMatrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

double DenseMatrix::frobenius_norm() const noexcept { return norm2(data_); }

double CsrAdjacency::at(std::size_t i, std::size_t j) const noexcept {
  const auto first = col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr[i]);
  const auto last = col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr[i + 1]);
  const auto it = std::lower_bound(first, last, static_cast<std::uint32_t>(j));
  if (it == last || *it != j) return 0.0;
  return values[static_cast<std::size_t>(it - col_idx.begin())];
}

void CsrAdjacency::validate() const {
  if (row_ptr.empty() || row_ptr.front() != 0)
    fail(ErrorKind::shape, "csr: row_ptr must start at 0");
  if (row_ptr.back() != col_idx.size() || col_idx.size() != values.size())
    fail(ErrorKind::shape, "csr: row_ptr/col_idx/values length mismatch");
  const std::size_t n = num_rows();
  for (std::size_t i = 0; i < n; ++i) {
    if (row_ptr[i] > row_ptr[i + 1]) fail(ErrorKind::shape, "csr: row_ptr decreasing");
    for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
      if (col_idx[k] >= n) fail(ErrorKind::shape, "csr: column out of range");
      if (k > row_ptr[i] && col_idx[k - 1] >= col_idx[k])
        fail(ErrorKind::shape, "csr: columns not strictly sorted in row " + std::to_string(i));
      if (!std::isfinite(values[k])) fail(ErrorKind::shape, "csr: non-finite value");
    }
  }
}

DenseMatrix spmm(const CsrAdjacency& a, const DenseMatrix& b) {
  const std::size_t n = a.num_rows();
  if (n != b.rows())
    fail(ErrorKind::shape, "spmm: adjacency has " + std::to_string(n) +
                               " rows, dense operand " + dims(b.rows(), b.cols()));
  DenseMatrix out(n, b.cols());
  for (std::size_t i = 0; i < n; ++i) {
    auto dst = out.row(i);
    for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
      const double w = a.values[k];
      const auto src = b.row(a.col_idx[k]);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += w * src[j];
    }
  }
  return out;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows())
    fail(ErrorKind::shape, "matmul: " + dims(a.rows(), a.cols()) + " * " +
                               dims(b.rows(), b.cols()));
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    const auto lhs = a.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double w = lhs[k];
      if (w == 0.0) continue;
      const auto src = b.row(k);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += w * src[j];
    }
  }
  return out;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows())
    fail(ErrorKind::shape, "matmul_tn: " + dims(a.rows(), a.cols()) + "^T * " +
                               dims(b.rows(), b.cols()));
  DenseMatrix out(a.cols(), b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto lhs = a.row(r);
    const auto src = b.row(r);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double w = lhs[i];
      if (w == 0.0) continue;
      auto dst = out.row(i);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += w * src[j];
    }
  }
  return out;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols())
    fail(ErrorKind::shape, "matmul_nt: " + dims(a.rows(), a.cols()) + " * " +
                               dims(b.rows(), b.cols()) + "^T");
  DenseMatrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(a.row(i), b.row(j));
  return out;
}

void scale_in_place(DenseMatrix& m, double factor) noexcept {
  for (double& v : m.data()) v *= factor;
}

void axpy(double factor, const DenseMatrix& x, DenseMatrix& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols())
    fail(ErrorKind::shape, "axpy: " + dims(x.rows(), x.cols()) + " vs " +
                               dims(y.rows(), y.cols()));
  auto dst = y.data();
  const auto src = x.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += factor * src[i];
}

void relu_in_place(DenseMatrix& m) noexcept {
  for (double& v : m.data()) v = v > 0.0 ? v : 0.0;
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) noexcept { return std::sqrt(dot(a, a)); }

double cosine_sim(std::span<const double> h, std::span<const double> e) {
  if (h.size() != e.size())
    fail(ErrorKind::shape, "cosine_sim: lengths " + std::to_string(h.size()) + " and " +
                               std::to_string(e.size()));
  const double nh = norm2(h);
  const double ne = norm2(e);
  if (nh < kZeroNormGuard || ne < kZeroNormGuard) return 0.0;
  return dot(h, e) / (nh * ne);
}

std::vector<double> row_softmax(std::span<const double> z, double tau) {
  if (!(tau > 0.0)) fail(ErrorKind::invalid_argument, "softmax temperature must be > 0");
  std::vector<double> p(z.size());
  if (z.empty()) return p;
  const double top = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp((z[i] - top) / tau);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

double log_sum_exp(std::span<const double> z) noexcept {
  if (z.empty()) return -std::numeric_limits<double>::infinity();
  const double top = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double v : z) total += std::exp(v - top);
  return top + std::log(total);
}

double shannon_entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v < 0.0 || !std::isfinite(v))
      fail(ErrorKind::invalid_argument, "entropy: invalid probability entry");
    if (v > 0.0) h -= v * std::log(v);
  }
  return h < 0.0 ? 0.0 : h;
}

std::size_t argmax(std::span<const double> v) noexcept {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

std::size_t argmin(std::span<const double> v) noexcept {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] < v[best]) best = i;
  return best;
}

}  // namespace gfmate
