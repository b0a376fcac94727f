#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace rgtd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace linalg {

/// Singular values in descending order.
inline Vector singular_values(const Matrix& a) {
    if (a.size() == 0) return Vector{};
    return Eigen::JacobiSVD<Matrix>(a).singularValues();
}

inline double spectral_norm(const Matrix& a) {
    if (a.size() == 0) return 0.0;
    return singular_values(a)(0);
}

inline double spectral_norm(const Vector& v) { return v.norm(); }

/// Smallest singular value divided by the largest (0 for the zero matrix).
inline double singular_ratio(const Matrix& a) {
    const Vector s = singular_values(a);
    if (s.size() == 0 || s(0) == 0.0) return 0.0;
    return s(s.size() - 1) / s(0);
}

inline bool has_full_column_rank(const Matrix& a, double rel_tol = 1e-10) {
    if (a.cols() > a.rows()) return false;
    const Vector s = singular_values(a);
    return s.size() > 0 && s(0) > 0.0 && s(s.size() - 1) > rel_tol * s(0);
}

inline Matrix symmetric_part(const Matrix& a) { return 0.5 * (a + a.transpose()); }

/// Orthonormal basis (columns) of {x : a x = 0}, singular values below
/// rel_tol * sigma_max counted as zero.
inline Matrix null_space(const Matrix& a, double rel_tol = 1e-10) {
    const Eigen::Index n = a.cols();
    if (a.rows() == 0) return Matrix::Identity(n, n);
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullV);
    const Vector& s = svd.singularValues();
    const double cutoff = s.size() > 0 ? rel_tol * s(0) : 0.0;
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) > cutoff) ++rank;
    }
    return svd.matrixV().rightCols(n - rank);
}

/// Least squares fit y = slope * x + intercept.
struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

template <typename XRange, typename YRange>
LineFit fit_line(const XRange& xs, const YRange& ys) {
    const auto n = static_cast<double>(std::size(xs));
    double sx = 0, sy = 0;
    auto yit = std::begin(ys);
    for (auto x : xs) {
        sx += x;
        sy += *yit++;
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    yit = std::begin(ys);
    for (auto x : xs) {
        const double dx = x - mx, dy = *yit++ - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    LineFit fit;
    fit.slope = sxx > 0 ? sxy / sxx : 0.0;
    fit.intercept = my - fit.slope * mx;
    fit.r_squared = (sxx > 0 && syy > 0) ? (sxy * sxy) / (sxx * syy) : 1.0;
    return fit;
}

}  // namespace linalg
}  // namespace rgtd
