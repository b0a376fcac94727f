#pragma once

// Closed-form quantities of the regularized saddle-point problem.
//
//   M = Phi^T D (gamma P^pi - I) Phi      (feature interaction matrix, FIM)
//   B = Phi^T D Phi,  b = Phi^T D R^pi
//   G = M^T B^{-1} M,  K = G^{-1} B G^{-1} M^T B^{-1} b   (G nonsingular only)
//
// Lagrangian: L(theta, w, lambda) = c/2 w^T B w + 1/2 theta^T B theta
//                                  + lambda^T (M theta + B w + b)

#include "rgtd/error.hpp"
#include "rgtd/linalg.hpp"
#include "rgtd/mdp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace rgtd {

struct CoreMatrices {
    Matrix m;
    Matrix b_mat;
    Vector b;
    Matrix g;
    std::optional<Vector> k;  // empty when G is singular
    Matrix phi;               // features, for the prediction-space quantities
    Vector mtbinv_b;          // M^T B^{-1} b, shared by every solution formula

    int dim() const noexcept { return static_cast<int>(m.rows()); }
};

struct SpectralDecomp {
    Matrix pinv;
    Matrix null_basis;  // q x k, orthonormal
    Matrix null_projector;
    Matrix range_projector;
    Vector singular_values;  // descending

    int nullity() const noexcept { return static_cast<int>(null_basis.cols()); }
};

/// theta_p + span(null_basis).
struct AffineSolutionSet {
    Vector particular;
    Matrix null_basis;

    bool singleton() const noexcept { return null_basis.cols() == 0; }
};

struct SaddleSolution {
    Vector theta;
    Vector w;
    Vector lambda;
    double c = 0.0;
};

/// Default relative threshold below which an eigen/singular value counts as zero.
inline constexpr double kNullTol = 1e-9;

namespace detail {

inline void require_positive_c(double c, const char* where) {
    if (!(c > 0.0) || !std::isfinite(c)) throw UsageError(std::string(where) + ": c must be a positive finite number");
}

}  // namespace detail

/// Eigen-decomposition of a symmetric PSD matrix into pseudoinverse and
/// null/range projectors.
inline SpectralDecomp decompose(const Matrix& g, double rel_tol = kNullTol) {
    const Eigen::Index q = g.rows();
    Eigen::SelfAdjointEigenSolver<Matrix> es(linalg::symmetric_part(g));
    if (es.info() != Eigen::Success) throw NumericalError("decompose: eigen-solve failed");
    const Vector& ev = es.eigenvalues();
    const Matrix& vecs = es.eigenvectors();
    const double scale = q > 0 ? ev.cwiseAbs().maxCoeff() : 0.0;
    const double cutoff = rel_tol * scale;

    SpectralDecomp sd;
    sd.pinv = Matrix::Zero(q, q);
    std::vector<Eigen::Index> null_idx;
    for (Eigen::Index i = 0; i < q; ++i) {
        if (scale == 0.0 || std::abs(ev(i)) <= cutoff) {
            null_idx.push_back(i);
        } else {
            sd.pinv += vecs.col(i) * vecs.col(i).transpose() / ev(i);
        }
    }
    sd.null_basis.resize(q, static_cast<Eigen::Index>(null_idx.size()));
    for (std::size_t j = 0; j < null_idx.size(); ++j) sd.null_basis.col(static_cast<Eigen::Index>(j)) = vecs.col(null_idx[j]);
    sd.null_projector = sd.null_basis * sd.null_basis.transpose();
    sd.range_projector = Matrix::Identity(q, q) - sd.null_projector;
    Vector sv = ev.cwiseAbs();
    std::sort(sv.data(), sv.data() + sv.size(), std::greater<>());
    sd.singular_values = sv;
    return sd;
}

/// Builds the core matrices from raw (M, B, b). phi defaults to the identity.
inline CoreMatrices make_core(Matrix m, Matrix b_mat, Vector b, std::optional<Matrix> phi = std::nullopt,
                              double rel_tol = kNullTol) {
    const Eigen::Index q = m.rows();
    if (m.cols() != q || b_mat.rows() != q || b_mat.cols() != q || b.size() != q)
        throw DataError("core matrices: dimension mismatch");
    Eigen::LLT<Matrix> llt(b_mat);
    if (llt.info() != Eigen::Success) throw NumericalError("core matrices: B is not positive definite");

    CoreMatrices cm;
    cm.g = linalg::symmetric_part(m.transpose() * llt.solve(m));
    cm.mtbinv_b = m.transpose() * llt.solve(b);
    const SpectralDecomp sd = decompose(cm.g, rel_tol);
    if (sd.nullity() == 0) {
        Eigen::LDLT<Matrix> gl(cm.g);
        const Vector ginv_rhs = gl.solve(cm.mtbinv_b);
        cm.k = gl.solve(b_mat * ginv_rhs);
    }
    cm.phi = phi ? std::move(*phi) : Matrix::Identity(q, q);
    cm.m = std::move(m);
    cm.b_mat = std::move(b_mat);
    cm.b = std::move(b);
    return cm;
}

inline CoreMatrices assemble(const EvalProblem& problem, double rel_tol = kNullTol) {
    const Matrix& phi = problem.phi();
    const Eigen::Index n = phi.rows();
    const auto d = problem.dist().matrix();
    const Matrix t = problem.gamma() * problem.p_pi() - Matrix::Identity(n, n);
    return make_core(phi.transpose() * d * t * phi, phi.transpose() * d * phi, phi.transpose() * d * problem.r_pi(),
                     phi, rel_tol);
}

/// 1/2 (M theta + b)^T B^{-1} (M theta + b).
inline double mspbe(const CoreMatrices& cm, const Vector& theta) {
    const Vector e = cm.m * theta + cm.b;
    return 0.5 * e.dot(cm.b_mat.llt().solve(e));
}

inline Vector mspbe_gradient(const CoreMatrices& cm, const Vector& theta) {
    return cm.m.transpose() * cm.b_mat.llt().solve(cm.m * theta + cm.b);
}

/// c * MSPBE(theta) + 1/2 theta^T B theta, whose minimiser is theta_RGTD.
inline double regularized_objective(const CoreMatrices& cm, const Vector& theta, double c) {
    return c * mspbe(cm, theta) + 0.5 * theta.dot(cm.b_mat * theta);
}

inline double lagrangian(const CoreMatrices& cm, const Vector& theta, const Vector& w, const Vector& lambda, double c) {
    return 0.5 * c * w.dot(cm.b_mat * w) + 0.5 * theta.dot(cm.b_mat * theta) +
           lambda.dot(cm.m * theta + cm.b_mat * w + cm.b);
}

inline AffineSolutionSet gtd2_solutions(const CoreMatrices& cm, double rel_tol = kNullTol) {
    const SpectralDecomp sd = decompose(cm.g, rel_tol);
    return {-sd.pinv * cm.mtbinv_b, sd.null_basis};
}

/// Solves (G + B/c) theta = -M^T B^{-1} b.
inline Vector rgtd_solution(const CoreMatrices& cm, double c) {
    detail::require_positive_c(c, "rgtd_solution");
    const Matrix a = cm.g + cm.b_mat / c;
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success) throw NumericalError("rgtd_solution: G + B/c not positive definite");
    return llt.solve(-cm.mtbinv_b);
}

/// Full 3q x 3q KKT system
///   B theta + M^T lambda = 0,  c B w + B lambda = 0,  M theta + B w + b = 0.
inline Matrix kkt_matrix(const CoreMatrices& cm, double c) {
    const Eigen::Index q = cm.dim();
    Matrix k = Matrix::Zero(3 * q, 3 * q);
    k.block(0, 0, q, q) = cm.b_mat;
    k.block(0, 2 * q, q, q) = cm.m.transpose();
    k.block(q, q, q, q) = c * cm.b_mat;
    k.block(q, 2 * q, q, q) = cm.b_mat;
    k.block(2 * q, 0, q, q) = cm.m;
    k.block(2 * q, q, q, q) = cm.b_mat;
    return k;
}

inline SaddleSolution saddle_point(const CoreMatrices& cm, double c) {
    detail::require_positive_c(c, "saddle_point");
    const Eigen::Index q = cm.dim();
    const Matrix k = kkt_matrix(cm, c);
    Vector rhs = Vector::Zero(3 * q);
    rhs.tail(q) = -cm.b;
    Eigen::FullPivLU<Matrix> lu(k);
    if (!lu.isInvertible()) throw NumericalError("saddle_point: KKT system is singular");
    const Vector x = lu.solve(rhs);
    if (!x.allFinite()) throw NumericalError("saddle_point: non-finite KKT solution");
    SaddleSolution s;
    s.c = c;
    s.theta = x.head(q);
    s.lambda = x.tail(q);
    s.w = -s.lambda / c;
    return s;
}

inline SaddleSolution saddle_point(const EvalProblem& problem, double c) { return saddle_point(assemble(problem), c); }

/// Norms of grad_theta L, grad_w L, grad_lambda L at the given point.
inline std::array<double, 3> kkt_residuals(const CoreMatrices& cm, const SaddleSolution& s) {
    return {(cm.b_mat * s.theta + cm.m.transpose() * s.lambda).norm(),
            (s.c * cm.b_mat * s.w + cm.b_mat * s.lambda).norm(),
            (cm.m * s.theta + cm.b_mat * s.w + cm.b).norm()};
}

/// (G + Pi_N / c)^{-1} = G^+ + c Pi_N.
inline Matrix regularized_inverse(const SpectralDecomp& sd, double c) {
    detail::require_positive_c(c, "regularized_inverse");
    return sd.pinv + c * sd.null_projector;
}

/// Limit of theta_RGTD(c) as c -> infinity: the point of the GTD2 set with the
/// smallest B-norm. It equals particular - Pi_N particular only when Null(G)
/// is an invariant subspace of B.
inline Vector rgtd_limit(const CoreMatrices& cm, const AffineSolutionSet& set) {
    if (set.singleton()) return set.particular;
    const Matrix& v = set.null_basis;
    const Vector z = (v.transpose() * cm.b_mat * v).ldlt().solve(-(v.transpose() * cm.b_mat * set.particular));
    return set.particular + v * z;
}

struct ExpansionRow {
    double c = 0.0;
    double residual = 0.0;
};

struct ExpansionReport {
    bool singular = false;
    double c0 = 0.0;
    double gamma_const = std::numeric_limits<double>::quiet_NaN();  // nonsingular only
    std::vector<ExpansionRow> rows;
    std::optional<linalg::LineFit> slope;  // absent when every residual is zero
    /// max_c c * residual(c): empirical first-order constant in parameter space.
    double first_order_constant = 0.0;
};

/// Threshold above which the expansion in 1/c is valid.
inline double expansion_threshold(const CoreMatrices& cm, const AffineSolutionSet& set) {
    if (set.singleton()) return linalg::spectral_norm(Matrix(cm.g.ldlt().solve(cm.b_mat)));
    const Matrix pn = set.null_basis * set.null_basis.transpose();
    return linalg::spectral_norm(Matrix(cm.b_mat - pn));
}

/// ||Phi|| ||G^{-1} B G^{-1} B G^{-1}|| ||M^T B^{-1} b||, nonsingular G only.
inline double second_order_constant(const CoreMatrices& cm) {
    if (!cm.k) throw UsageError("second_order_constant: G is singular");
    Eigen::LDLT<Matrix> gl(cm.g);
    const Matrix ginv = gl.solve(Matrix::Identity(cm.dim(), cm.dim()));
    return linalg::spectral_norm(cm.phi) * linalg::spectral_norm(Matrix(ginv * cm.b_mat * ginv * cm.b_mat * ginv)) *
           cm.mtbinv_b.norm();
}

inline ExpansionReport expansion_check(const CoreMatrices& cm, const AffineSolutionSet& set,
                                       const std::vector<double>& c_grid) {
    if (c_grid.size() < 3) throw UsageError("expansion_check: c_grid needs at least 3 points");
    for (std::size_t i = 1; i < c_grid.size(); ++i)
        if (!(c_grid[i] > c_grid[i - 1])) throw UsageError("expansion_check: c_grid must be strictly ascending");

    ExpansionReport rep;
    rep.singular = !set.singleton();
    rep.c0 = expansion_threshold(cm, set);
    for (double c : c_grid) {
        if (!(c > rep.c0))
            throw UsageError("expansion_check: c = " + std::to_string(c) + " is not above c0 = " + std::to_string(rep.c0));
    }

    Vector target;
    if (rep.singular) {
        target = set.particular - set.null_basis * (set.null_basis.transpose() * set.particular);
    } else {
        rep.gamma_const = second_order_constant(cm);
    }
    std::vector<double> lx, ly;
    bool any_zero = false;
    for (double c : c_grid) {
        const Vector theta = rgtd_solution(cm, c);
        const double r = rep.singular ? (theta - target).norm() : (theta - set.particular - *cm.k / c).norm();
        rep.rows.push_back({c, r});
        rep.first_order_constant = std::max(rep.first_order_constant, c * r);
        if (r > 0.0) {
            lx.push_back(std::log(c));
            ly.push_back(std::log(r));
        } else {
            any_zero = true;
        }
    }
    if (!any_zero) rep.slope = linalg::fit_line(lx, ly);
    return rep;
}

struct Gtd2Distance {
    double distance = 0.0;
    Vector projection;  // closest point of Phi * Theta_GTD2 to Phi theta
};

/// Euclidean distance from Phi theta to {Phi theta_p + Phi V z}.
inline Gtd2Distance dist_to_gtd2_set(const Matrix& phi, const Vector& theta, const AffineSolutionSet& set) {
    const Vector base = phi * set.particular;
    const Vector y = phi * theta;
    Gtd2Distance out;
    if (set.singleton()) {
        out.projection = base;
    } else {
        const Matrix a = phi * set.null_basis;
        const Vector z = a.completeOrthogonalDecomposition().solve(y - base);
        out.projection = base + a * z;
    }
    out.distance = (y - out.projection).norm();
    return out;
}

struct BoundRow {
    double c = 0.0;
    double residual = 0.0;  // expansion residual at c
    double bound_lhs = 0.0;
    double bound_rhs = 0.0;
    bool holds = false;
};

struct BoundReport {
    bool singular = false;
    double c0 = 0.0;
    double constant = 0.0;  // C of the C/c term; empirical in the singular case
    bool constant_is_empirical = false;
    double gamma_const = std::numeric_limits<double>::quiet_NaN();
    std::vector<BoundRow> rows;

    bool all_hold() const {
        return std::all_of(rows.begin(), rows.end(), [](const BoundRow& r) { return r.holds; });
    }
};

/// Prediction-error bound ||Phi theta_RGTD - Phi theta*|| <= rhs(c) for each
/// grid c above c0 (entries at or below c0 are skipped).
///
/// singular:    rhs = dist(Phi theta*, S) + ||P_S(Phi theta_RGTD) - P_S(Phi theta*)|| + C/c,
///              C = ||Phi|| max_c c * r(c) fitted on the grid.
/// nonsingular: rhs = ||Phi theta_GTD2 - Phi theta*|| + ||Phi|| ||K|| / c
///              + Gamma / (c^2 (1 - c0/c)), the last term bounding the whole tail.
inline BoundReport prediction_bound_check(const CoreMatrices& cm, const Vector& theta_star,
                                          const std::vector<double>& c_grid, double rel_tol = kNullTol) {
    const AffineSolutionSet set = gtd2_solutions(cm, rel_tol);
    BoundReport rep;
    rep.singular = !set.singleton();
    rep.c0 = expansion_threshold(cm, set);
    std::vector<double> usable;
    for (double c : c_grid)
        if (c > rep.c0) usable.push_back(c);
    std::sort(usable.begin(), usable.end());
    if (usable.empty()) return rep;

    const double phi_norm = linalg::spectral_norm(cm.phi);
    const Vector pstar = cm.phi * theta_star;
    const Gtd2Distance star = dist_to_gtd2_set(cm.phi, theta_star, set);

    std::vector<double> residual(usable.size(), 0.0);
    if (usable.size() >= 3) {
        const ExpansionReport ex = expansion_check(cm, set, usable);
        for (std::size_t i = 0; i < usable.size(); ++i) residual[i] = ex.rows[i].residual;
        rep.gamma_const = ex.gamma_const;
        if (rep.singular) rep.constant = phi_norm * ex.first_order_constant;
    } else {
        // Too few points for a fit: residuals computed directly.
        const Vector target = rep.singular
                                  ? Vector(set.particular - set.null_basis * (set.null_basis.transpose() * set.particular))
                                  : set.particular;
        for (std::size_t i = 0; i < usable.size(); ++i) {
            const Vector th = rgtd_solution(cm, usable[i]);
            residual[i] = rep.singular ? (th - target).norm() : (th - target - *cm.k / usable[i]).norm();
            if (rep.singular) rep.constant = std::max(rep.constant, phi_norm * usable[i] * residual[i]);
        }
        if (!rep.singular) rep.gamma_const = second_order_constant(cm);
    }
    if (!rep.singular) rep.constant = phi_norm * cm.k->norm();
    rep.constant_is_empirical = rep.singular;

    for (std::size_t i = 0; i < usable.size(); ++i) {
        const double c = usable[i];
        const Vector th = rgtd_solution(cm, c);
        BoundRow row;
        row.c = c;
        row.residual = residual[i];
        row.bound_lhs = (cm.phi * th - pstar).norm();
        if (rep.singular) {
            const Gtd2Distance here = dist_to_gtd2_set(cm.phi, th, set);
            row.bound_rhs = star.distance + (here.projection - star.projection).norm() + rep.constant / c;
        } else {
            row.bound_rhs = (cm.phi * set.particular - pstar).norm() + rep.constant / c +
                            rep.gamma_const / (c * c * (1.0 - rep.c0 / c));
        }
        // Slack for round-off in the two sides.
        row.holds = row.bound_lhs <= row.bound_rhs * (1.0 + 1e-9) + 1e-12;
        rep.rows.push_back(row);
    }
    return rep;
}

inline BoundReport prediction_bound_check(const EvalProblem& problem, const std::vector<double>& c_grid) {
    return prediction_bound_check(assemble(problem), problem.theta_star(), c_grid);
}

}  // namespace rgtd
