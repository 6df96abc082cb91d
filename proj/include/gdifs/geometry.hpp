#pragma once

// Numeric layer for contracting similarities x -> r*T(x) + v on R^d.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>

#include "gdifs/errors.hpp"

namespace gdifs {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

namespace detail {

// Largest singular value. Closed form for d <= 2, SVD otherwise.
inline double op_norm(const Mat& m) {
  if (m.rows() == 0) return 0.0;
  if (m.rows() == 1 && m.cols() == 1) return std::abs(m(0, 0));
  if (m.rows() == 2 && m.cols() == 2) {
    const double f = m.squaredNorm();
    const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    const double disc = std::max(0.0, f * f - 4.0 * det * det);
    return std::sqrt(std::max(0.0, 0.5 * (f + std::sqrt(disc))));
  }
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues()(0);
}

inline Mat polar_project(const Mat& m) {
  if (m.rows() == 1) {
    Mat out(1, 1);
    out(0, 0) = m(0, 0) >= 0 ? 1.0 : -1.0;
    return out;
  }
  if (m.rows() == 2) {
    // Closed form: M + sign(det M) * cof(M), rescaled to unit determinant.
    const double a = m(0, 0), b = m(0, 1), c = m(1, 0), d = m(1, 1);
    const double sg = a * d - b * c >= 0.0 ? 1.0 : -1.0;
    Mat q(2, 2);
    q << a + sg * d, b - sg * c, c - sg * b, d + sg * a;
    const double det = std::abs(q(0, 0) * q(1, 1) - q(0, 1) * q(1, 0));
    if (det > 1e-200) return q / std::sqrt(det);
  }
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

}  // namespace detail

/// An element of O(d). The stored matrix is re-orthonormalized by polar
/// projection whenever it is built from arbitrary entries.
class OrthogonalTransform {
 public:
  OrthogonalTransform() : m_(Mat::Identity(1, 1)) {}

  explicit OrthogonalTransform(const Mat& m) {
    if (m.rows() != m.cols() || m.rows() == 0)
      throw InputError("orthogonal transform must be a nonempty square matrix");
    if (!m.allFinite()) throw InputError("orthogonal transform has non-finite entries");
    // Matrices that are already orthogonal to rounding are kept bit-exact so
    // serialized transforms read back unchanged.
    const Mat id = Mat::Identity(m.rows(), m.rows());
    const double scale = std::pow(detail::op_norm(m), static_cast<double>(m.rows()));
    if (!(std::abs(m.determinant()) > 1e-12 * scale)) throw InputError("orthogonal transform matrix is singular");
    m_ = detail::op_norm(m.transpose() * m - id) <= 1e-15 ? m : detail::polar_project(m);
    const double err = detail::op_norm(m_.transpose() * m_ - Mat::Identity(dim(), dim()));
    if (err > 1e-9) throw InputError("matrix is too far from orthogonal to project");
  }

  static OrthogonalTransform identity(int d) {
    return OrthogonalTransform(Mat::Identity(d, d), Trusted{});
  }

  /// Planar rotation by `angle`; with `reflect`, rotation after the reflection
  /// (x, y) -> (x, -y).
  static OrthogonalTransform planar(double angle, bool reflect = false) {
    Mat m(2, 2);
    const double c = std::cos(angle), s = std::sin(angle);
    m << c, -s, s, c;
    if (reflect) m.col(1) *= -1.0;
    return OrthogonalTransform(m, Trusted{});
  }

  static OrthogonalTransform axis_angle(const Vec& axis, double angle) {
    if (axis.size() != 3 || axis.norm() == 0.0)
      throw InputError("axis-angle rotation needs a nonzero 3-vector axis");
    Eigen::AngleAxisd aa(angle, Eigen::Vector3d(axis(0), axis(1), axis(2)).normalized());
    return OrthogonalTransform(Mat(aa.toRotationMatrix()));
  }

  int dim() const { return static_cast<int>(m_.rows()); }
  const Mat& matrix() const { return m_; }
  double determinant() const { return m_.determinant(); }
  bool preserves_orientation() const { return determinant() > 0.0; }

  OrthogonalTransform inverse() const { return OrthogonalTransform(m_.transpose(), Trusted{}); }

  Vec apply(const Vec& x) const { return m_ * x; }

  friend OrthogonalTransform operator*(const OrthogonalTransform& a, const OrthogonalTransform& b) {
    if (a.dim() != b.dim()) throw InputError("orthogonal transforms of different dimension");
    return OrthogonalTransform(detail::polar_project(a.m_ * b.m_), Trusted{});
  }

  OrthogonalTransform pow(long n) const {
    Mat acc = Mat::Identity(dim(), dim());
    Mat base = n >= 0 ? m_ : Mat(m_.transpose());
    unsigned long e = static_cast<unsigned long>(n >= 0 ? n : -n);
    while (e) {
      if (e & 1UL) acc = acc * base;
      base = base * base;
      e >>= 1UL;
    }
    return OrthogonalTransform(detail::polar_project(acc), Trusted{});
  }

  /// Counter-clockwise angle of a planar transform's rotation part in (-pi, pi].
  double planar_angle() const { return std::atan2(m_(1, 0), m_(0, 0)); }

 private:
  struct Trusted {};
  OrthogonalTransform(Mat m, Trusted) : m_(std::move(m)) {}

  Mat m_;
};

/// ||a - b|| in the Euclidean operator norm.
inline double operator_distance(const OrthogonalTransform& a, const OrthogonalTransform& b) {
  if (a.dim() != b.dim()) throw InputError("operator_distance: dimension mismatch");
  return detail::op_norm(a.matrix() - b.matrix());
}

class Similarity {
 public:
  Similarity(double ratio, OrthogonalTransform rotation, Vec translation)
      : ratio_(ratio), rotation_(std::move(rotation)), translation_(std::move(translation)) {
    if (!(ratio_ > 0.0 && ratio_ < 1.0)) throw InputError("similarity ratio must lie in (0,1)");
    if (translation_.size() != rotation_.dim())
      throw InputError("similarity translation and rotation dimensions differ");
    if (!translation_.allFinite()) throw InputError("similarity translation is not finite");
  }

  static Similarity scaling(double ratio, const Vec& translation) {
    return {ratio, OrthogonalTransform::identity(static_cast<int>(translation.size())), translation};
  }

  int dim() const { return rotation_.dim(); }
  double ratio() const { return ratio_; }
  const OrthogonalTransform& rotation() const { return rotation_; }
  const Vec& translation() const { return translation_; }

  Vec apply(const Vec& x) const {
    if (x.size() != dim()) throw InputError("similarity applied to a point of wrong dimension");
    return ratio_ * rotation_.apply(x) + translation_;
  }

  Similarity with_ratio(double r) const { return {r, rotation_, translation_}; }
  Similarity with_rotation(OrthogonalTransform t) const { return {ratio_, std::move(t), translation_}; }

 private:
  double ratio_;
  OrthogonalTransform rotation_;
  Vec translation_;
};

/// (a o b)(x) = a(b(x)).
inline Similarity compose(const Similarity& a, const Similarity& b) {
  if (a.dim() != b.dim()) throw InputError("compose: dimension mismatch");
  return {a.ratio() * b.ratio(), a.rotation() * b.rotation(),
          a.ratio() * a.rotation().apply(b.translation()) + a.translation()};
}

struct FixedPoint {
  Vec point;
  double residual = 0.0;
};

inline FixedPoint fixed_point(const Similarity& s) {
  const int d = s.dim();
  const Mat lhs = Mat::Identity(d, d) - s.ratio() * s.rotation().matrix();
  FixedPoint fp;
  fp.point = lhs.partialPivLu().solve(s.translation());
  fp.residual = (s.apply(fp.point) - fp.point).norm();
  return fp;
}

/// Result of the order search: `finite` with the order, or no order up to the
/// search limit. For planar rotations `angle` holds the rotation angle.
struct RotationOrder {
  bool finite = false;
  long order = 0;
  double angle = std::numeric_limits<double>::quiet_NaN();

  bool infinite_or_deep() const { return !finite; }
};

inline RotationOrder rotation_order(const OrthogonalTransform& t, long max_order, double tol = 1e-8) {
  if (max_order < 1) throw InputError("rotation_order: max_order must be >= 1");
  const int d = t.dim();
  const Mat id = Mat::Identity(d, d);
  if (detail::op_norm(t.matrix() - id) <= tol) return {true, 1, 0.0};

  if (d == 2 && t.preserves_orientation()) {
    const double theta = t.planar_angle();
    RotationOrder out;
    out.angle = theta;
    // Continued-fraction convergents of theta/(2 pi); the first n with
    // ||t^n - I|| <= tol is a convergent denominator.
    double x = theta / (2.0 * std::numbers::pi);
    x -= std::floor(x);
    long h_prev = 0, h = 1, k_prev = 1, k = 0;
    double rem = x;
    for (int iter = 0; iter < 64; ++iter) {
      const double a_d = std::floor(rem);
      if (a_d > 1e12) break;
      const long a = static_cast<long>(a_d);
      const long h_next = a * h + h_prev;
      const long k_next = a * k + k_prev;
      h_prev = h, h = h_next, k_prev = k, k = k_next;
      if (k > max_order) break;
      if (k >= 1 && 2.0 * std::abs(std::sin(0.5 * static_cast<double>(k) * theta)) <= tol) {
        out.finite = true;
        out.order = k;
        return out;
      }
      const double frac = rem - a_d;
      if (frac < 1e-300) break;
      rem = 1.0 / frac;
    }
    return out;
  }

  Mat power = t.matrix();
  for (long n = 1; n <= max_order; ++n) {
    if (detail::op_norm(power - id) <= tol) return {true, n, d == 2 ? t.planar_angle() : std::numeric_limits<double>::quiet_NaN()};
    power = power * t.matrix();
  }
  return {};
}

}  // namespace gdifs
