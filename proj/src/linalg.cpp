#include "magna/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace magna {

namespace {

constexpr double kMinPivot = 1e-12;

// In-place LU factorization with row pivoting: P M = L U, unit-diagonal L.
class PivotedLu {
 public:
  explicit PivotedLu(Matrix m) : lu_(std::move(m)), perm_(static_cast<std::size_t>(lu_.rows())) {
    const Eigen::Index n = lu_.rows();
    std::iota(perm_.begin(), perm_.end(), Eigen::Index{0});
    for (Eigen::Index k = 0; k < n; ++k) {
      Eigen::Index pivot = k;
      for (Eigen::Index i = k + 1; i < n; ++i) {
        if (std::abs(lu_(i, k)) > std::abs(lu_(pivot, k))) pivot = i;
      }
      if (std::abs(lu_(pivot, k)) < kMinPivot) {
        throw NumericError("dense_solve: singular matrix (pivot " +
                           std::to_string(std::abs(lu_(pivot, k))) + " at column " +
                           std::to_string(k) + ")");
      }
      if (pivot != k) {
        lu_.row(k).swap(lu_.row(pivot));
        std::swap(perm_[static_cast<std::size_t>(k)], perm_[static_cast<std::size_t>(pivot)]);
      }
      const double inv = 1.0 / lu_(k, k);
      for (Eigen::Index i = k + 1; i < n; ++i) {
        const double f = lu_(i, k) * inv;
        lu_(i, k) = f;
        if (f != 0.0) lu_.row(i).tail(n - k - 1) -= f * lu_.row(k).tail(n - k - 1);
      }
    }
  }

  Matrix solve(const Matrix& b) const {
    const Eigen::Index n = lu_.rows();
    Matrix x(n, b.cols());
    for (Eigen::Index i = 0; i < n; ++i) x.row(i) = b.row(perm_[static_cast<std::size_t>(i)]);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index k = 0; k < i; ++k) {
        if (lu_(i, k) != 0.0) x.row(i) -= lu_(i, k) * x.row(k);
      }
    }
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      for (Eigen::Index k = i + 1; k < n; ++k) {
        if (lu_(i, k) != 0.0) x.row(i) -= lu_(i, k) * x.row(k);
      }
      x.row(i) /= lu_(i, i);
    }
    return x;
  }

 private:
  Matrix lu_;
  std::vector<Eigen::Index> perm_;
};

}  // namespace

Matrix dense_solve(const Matrix& m, const Matrix& b) {
  if (m.rows() != m.cols()) throw ShapeError("dense_solve: matrix must be square, got " + shape_string(m));
  if (b.rows() != m.rows()) {
    throw ShapeError("dense_solve: right-hand side " + shape_string(b) + " does not match " +
                     shape_string(m));
  }
  const PivotedLu lu(m);
  Matrix x = lu.solve(b);
  const Matrix residual = b - m * x;
  x += lu.solve(residual);
  return x;
}

SymEigen sym_eigen(const Matrix& m) {
  if (m.rows() != m.cols()) throw ShapeError("sym_eigen: matrix must be square, got " + shape_string(m));
  const Eigen::Index n = m.rows();
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
    throw NumericError("sym_eigen: input is not symmetric");
  }
  Matrix a = 0.5 * (m + m.transpose());
  Matrix v = Matrix::Identity(n, n);
  const double scale = std::max(1.0, a.norm());

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    }
    if (std::sqrt(off) <= 1e-15 * scale) break;

    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t;
        if (std::abs(theta) > 1e150) {
          t = 1.0 / (2.0 * theta);
        } else {
          t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        }
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return a(i, i) < a(j, j); });
  SymEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    out.values(k) = a(src, src);
    out.vectors.col(k) = v.col(src);
  }
  return out;
}

}  // namespace magna
