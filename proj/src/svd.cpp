#include "gfmate/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gfmate/error.hpp"
#include "gfmate/rng.hpp"

namespace gfmate {

namespace {

constexpr int kMaxSweeps = 80;
constexpr double kRotationTol = 1e-15;

double column_dot(const DenseMatrix& m, std::size_t p, std::size_t q) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) s += m(i, p) * m(i, q);
  return s;
}

// Removes from column j its projection on columns [0, j).
void project_out(DenseMatrix& m, std::size_t j) {
  for (std::size_t p = 0; p < j; ++p) {
    const double c = column_dot(m, p, j);
    for (std::size_t i = 0; i < m.rows(); ++i) m(i, j) -= c * m(i, p);
  }
}

// Jacobi for rows ≥ cols. Returns u (rows×cols), s, v (cols×cols).
void hestenes(DenseMatrix a, DenseMatrix& u, std::vector<double>& s, DenseMatrix& v,
              std::uint64_t seed) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  v = DenseMatrix::identity(n);

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          const double ap = a(i, p), aq = a(i, q);
          alpha += ap * ap;
          beta += aq * aq;
          gamma += ap * aq;
        }
        if (gamma == 0.0 || std::abs(gamma) <= kRotationTol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double ap = a(i, p), aq = a(i, q);
          a(i, p) = c * ap - sn * aq;
          a(i, q) = sn * ap + c * aq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - sn * vq;
          v(i, q) = sn * vp + c * vq;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = std::sqrt(column_dot(a, j, j));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  u = DenseMatrix(m, n);
  DenseMatrix v_sorted(n, n);
  s.assign(n, 0.0);
  const double cutoff = (sigma.empty() ? 0.0 : sigma[order[0]]) * 1e-14;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    s[k] = sigma[j];
    for (std::size_t i = 0; i < n; ++i) v_sorted(i, k) = v(i, j);
    if (sigma[j] > cutoff && sigma[j] > 0.0) {
      for (std::size_t i = 0; i < m; ++i) u(i, k) = a(i, j) / sigma[j];
    } else {
      s[k] = 0.0;
    }
  }
  v = std::move(v_sorted);
  // Null directions get an orthonormal completion so u stays orthonormal.
  orthonormalize_columns(u, seed);
}

SvdResult truncate(SvdResult full, std::size_t k) {
  SvdResult out;
  out.s.assign(full.s.begin(), full.s.begin() + static_cast<std::ptrdiff_t>(k));
  out.u = DenseMatrix(full.u.rows(), k);
  for (std::size_t i = 0; i < full.u.rows(); ++i)
    for (std::size_t j = 0; j < k; ++j) out.u(i, j) = full.u(i, j);
  out.vt = DenseMatrix(k, full.vt.cols());
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < full.vt.cols(); ++j) out.vt(i, j) = full.vt(i, j);
  return out;
}

void check_rank(const DenseMatrix& x, std::size_t k) {
  if (k == 0) fail(ErrorKind::invalid_argument, "svd: rank must be >= 1");
  if (k > std::min(x.rows(), x.cols()))
    fail(ErrorKind::invalid_argument, "svd: rank " + std::to_string(k) + " exceeds min dimension of " +
                                          std::to_string(x.rows()) + "x" + std::to_string(x.cols()));
}

}  // namespace

void orthonormalize_columns(DenseMatrix& m, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t rows = m.rows();
  for (std::size_t j = 0; j < m.cols(); ++j) {
    const double before = std::sqrt(column_dot(m, j, j));
    for (int attempt = 0;; ++attempt) {
      project_out(m, j);
      project_out(m, j);
      const double after = std::sqrt(column_dot(m, j, j));
      if (after > 1e-10 * std::max(before, 1.0) && after > 0.0) {
        for (std::size_t i = 0; i < rows; ++i) m(i, j) /= after;
        break;
      }
      if (attempt > 8 || j >= rows) {
        // No room left in the column space; leave the column at zero.
        for (std::size_t i = 0; i < rows; ++i) m(i, j) = 0.0;
        break;
      }
      for (std::size_t i = 0; i < rows; ++i) m(i, j) = rng.normal();
    }
  }
}

SvdResult jacobi_svd(const DenseMatrix& x) {
  if (x.rows() == 0 || x.cols() == 0) fail(ErrorKind::invalid_argument, "svd: empty matrix");
  SvdResult r;
  DenseMatrix v;
  if (x.rows() >= x.cols()) {
    hestenes(x, r.u, r.s, v, 0x5EEDULL);
    r.vt = v.transposed();
  } else {
    // xᵀ = U' S V'ᵀ  ⇒  x = V' S U'ᵀ
    DenseMatrix u_t;
    hestenes(x.transposed(), u_t, r.s, v, 0x5EEDULL);
    r.u = std::move(v);
    r.vt = u_t.transposed();
  }
  return r;
}

SvdResult randomized_svd(const DenseMatrix& x, std::size_t k, std::uint64_t seed,
                         const RandomizedSvdOptions& opts) {
  check_rank(x, k);
  const std::size_t width = std::min(k + opts.oversampling, std::min(x.rows(), x.cols()));
  Rng rng(seed);

  DenseMatrix omega(x.cols(), width);
  for (double& v : omega.data()) v = rng.normal();

  DenseMatrix q = matmul(x, omega);
  orthonormalize_columns(q, rng.next());
  for (std::size_t it = 0; it < opts.power_iterations; ++it) {
    DenseMatrix z = matmul_tn(x, q);
    orthonormalize_columns(z, rng.next());
    q = matmul(x, z);
    orthonormalize_columns(q, rng.next());
  }

  const DenseMatrix b = matmul_tn(q, x);  // width × cols
  SvdResult small = jacobi_svd(b);
  SvdResult r;
  r.u = matmul(q, small.u);
  r.s = std::move(small.s);
  r.vt = std::move(small.vt);
  return truncate(std::move(r), k);
}

SvdResult truncated_svd(const DenseMatrix& x, std::size_t k, std::uint64_t seed) {
  check_rank(x, k);
  if (x.rows() <= kJacobiDimLimit && x.cols() <= kJacobiDimLimit)
    return truncate(jacobi_svd(x), k);
  return randomized_svd(x, k, seed);
}

}  // namespace gfmate
