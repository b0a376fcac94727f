#pragma once

// Deterministic primal-dual gradient dynamics of the regularized Lagrangian.
//
//   theta' = -B theta - M^T lambda
//   w'     = -c B w   - B lambda
//   lambda' = M theta + B w + b
//
// Stacked x = [theta; w; lambda]: x' = A_bar x + b_vec.

#include "rgtd/closed_form.hpp"
#include "rgtd/error.hpp"
#include "rgtd/linalg.hpp"

#include <cmath>
#include <complex>
#include <vector>

namespace rgtd {

struct PdgdSystem {
    CoreMatrices core;
    double c = 1.0;
    Matrix a_bar;       // 3q x 3q
    Vector b_vec;       // [0; 0; b]
    Matrix constraint;  // q x 2q, [M | B]
    SaddleSolution equilibrium;

    int dim() const noexcept { return core.dim(); }
    Vector equilibrium_state() const {
        Vector x(3 * dim());
        x << equilibrium.theta, equilibrium.w, equilibrium.lambda;
        return x;
    }
};

inline PdgdSystem make_system(const CoreMatrices& cm, double c) {
    detail::require_positive_c(c, "pdgd system");
    const Eigen::Index q = cm.dim();
    PdgdSystem sys;
    sys.core = cm;
    sys.c = c;
    sys.a_bar = Matrix::Zero(3 * q, 3 * q);
    sys.a_bar.block(0, 0, q, q) = -cm.b_mat;
    sys.a_bar.block(0, 2 * q, q, q) = -cm.m.transpose();
    sys.a_bar.block(q, q, q, q) = -c * cm.b_mat;
    sys.a_bar.block(q, 2 * q, q, q) = -cm.b_mat;
    sys.a_bar.block(2 * q, 0, q, q) = cm.m;
    sys.a_bar.block(2 * q, q, q, q) = cm.b_mat;
    sys.b_vec = Vector::Zero(3 * q);
    sys.b_vec.tail(q) = cm.b;
    sys.constraint.resize(q, 2 * q);
    sys.constraint << cm.m, cm.b_mat;
    sys.equilibrium = saddle_point(cm, c);
    return sys;
}

inline Vector flow(const PdgdSystem& sys, const Vector& x) {
    const Eigen::Index q = sys.dim();
    if (x.size() != 3 * q) throw UsageError("flow: state length must be 3q");
    const auto& cm = sys.core;
    const auto theta = x.segment(0, q);
    const auto w = x.segment(q, q);
    const auto lambda = x.segment(2 * q, q);
    Vector dx(3 * q);
    dx.segment(0, q) = -cm.b_mat * theta - cm.m.transpose() * lambda;
    dx.segment(q, q) = -sys.c * cm.b_mat * w - cm.b_mat * lambda;
    dx.segment(2 * q, q) = cm.m * theta + cm.b_mat * w + cm.b;
    return dx;
}

enum class Integrator { rk4, euler };

struct IntegrationResult {
    std::vector<double> t;
    std::vector<double> dist;  // ||x(t) - x_eq||
    Vector final_state;
    double dt = 0.0;  // step actually used
    int halvings = 0;
};

namespace detail {

inline bool integrate_once(const PdgdSystem& sys, const Vector& x0, double dt, long steps, Integrator mode,
                           IntegrationResult& out, long& blowup_step) {
    const Vector eq = sys.equilibrium_state();
    Vector x = x0;
    out.t.assign(1, 0.0);
    out.dist.assign(1, (x - eq).norm());
    out.t.reserve(static_cast<std::size_t>(steps) + 1);
    out.dist.reserve(static_cast<std::size_t>(steps) + 1);
    for (long k = 0; k < steps; ++k) {
        if (mode == Integrator::euler) {
            const Vector f = flow(sys, x);
            x += dt * f;
        } else {
            const Vector k1 = flow(sys, x);
            const Vector k2 = flow(sys, x + 0.5 * dt * k1);
            const Vector k3 = flow(sys, x + 0.5 * dt * k2);
            const Vector k4 = flow(sys, x + dt * k3);
            x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        if (!x.allFinite() || x.norm() > 1e12) {
            blowup_step = k + 1;
            return false;
        }
        out.t.push_back(static_cast<double>(k + 1) * dt);
        out.dist.push_back((x - eq).norm());
    }
    out.final_state = x;
    return true;
}

}  // namespace detail

/// Fixed-step integration over steps * dt. On blow-up the step is halved (and
/// the step count doubled) up to 8 times before giving up.
inline IntegrationResult integrate(const PdgdSystem& sys, const Vector& x0, double dt, long steps,
                                   Integrator mode = Integrator::rk4, int max_halvings = 8) {
    if (!(dt > 0.0)) throw UsageError("integrate: dt must be > 0");
    if (steps < 0) throw UsageError("integrate: steps must be >= 0");
    IntegrationResult out;
    for (int h = 0; h <= max_halvings; ++h) {
        long blowup = -1;
        if (detail::integrate_once(sys, x0, dt, steps, mode, out, blowup)) {
            out.dt = dt;
            out.halvings = h;
            return out;
        }
        if (h == max_halvings)
            throw NumericalError("integrate: blow-up at step " + std::to_string(blowup) + " (dt = " +
                                 std::to_string(dt) + ")");
        dt *= 0.5;
        steps *= 2;
    }
    return out;
}

/// Least-squares fit of log(dist) against t over the final half of the
/// series. Points at or below floor * dist(0) are round-off and dropped.
inline linalg::LineFit decay_fit(const IntegrationResult& res, double floor = 1e-13) {
    std::vector<double> ts, ls;
    const std::size_t n = res.t.size();
    const double cut = floor * (res.dist.empty() ? 0.0 : res.dist.front());
    for (std::size_t i = n / 2; i < n; ++i) {
        if (res.dist[i] > cut && res.dist[i] > 0.0) {
            ts.push_back(res.t[i]);
            ls.push_back(std::log(res.dist[i]));
        }
    }
    if (ts.size() < 2) throw NumericalError("decay_fit: fewer than two usable points");
    return linalg::fit_line(ts, ls);
}

struct RankCertificate {
    bool full_row_rank = false;
    double smallest_singular_value = 0.0;
    double largest_singular_value = 0.0;
};

inline RankCertificate rank_certificate(const Matrix& block, double rel_tol = 1e-10) {
    const Vector s = linalg::singular_values(block);
    RankCertificate rc;
    if (s.size() == 0) return rc;
    rc.largest_singular_value = s(0);
    // Row rank needs min(rows, cols) = rows nonzero singular values.
    rc.smallest_singular_value = block.rows() <= block.cols() ? s(block.rows() - 1) : 0.0;
    rc.full_row_rank = block.rows() <= block.cols() && rc.smallest_singular_value > rel_tol * rc.largest_singular_value;
    return rc;
}

inline RankCertificate rank_certificate(const PdgdSystem& sys, double rel_tol = 1e-10) {
    return rank_certificate(sys.constraint, rel_tol);
}

struct SpectrumCertificate {
    std::vector<std::complex<double>> eigenvalues;
    double abscissa = 0.0;  // max real part
    bool hurwitz = false;
};

inline SpectrumCertificate spectrum_certificate(const Matrix& a, double margin = 1e-10) {
    Eigen::EigenSolver<Matrix> es(a, false);
    if (es.info() != Eigen::Success) throw NumericalError("spectrum_certificate: eigen-solve did not converge");
    SpectrumCertificate sc;
    sc.abscissa = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        sc.eigenvalues.push_back(es.eigenvalues()(i));
        sc.abscissa = std::max(sc.abscissa, es.eigenvalues()(i).real());
    }
    sc.hurwitz = sc.abscissa < -margin;
    return sc;
}

inline SpectrumCertificate spectrum_certificate(const PdgdSystem& sys, double margin = 1e-10) {
    return spectrum_certificate(sys.a_bar, margin);
}

}  // namespace rgtd
