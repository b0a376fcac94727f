#pragma once

// Benchmark problems: the 3-state singular toy, random MDPs, a constructor
// that appends a feature making the FIM exactly singular, and Baird's star.

#include "rgtd/closed_form.hpp"
#include "rgtd/error.hpp"
#include "rgtd/linalg.hpp"
#include "rgtd/mdp.hpp"
#include "rgtd/rng.hpp"

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

namespace rgtd {

enum class DistMode { uniform, stationary, random };

inline DistMode parse_dist_mode(std::string_view s) {
    if (s == "uniform") return DistMode::uniform;
    if (s == "stationary") return DistMode::stationary;
    if (s == "random") return DistMode::random;
    throw UsageError("unknown dist_mode '" + std::string(s) + "' (expected uniform, stationary or random)");
}

inline std::string to_string(DistMode m) {
    switch (m) {
        case DistMode::uniform: return "uniform";
        case DistMode::stationary: return "stationary";
        case DistMode::random: return "random";
    }
    return "?";
}

struct GeneratorConfig {
    int n_states = 100;
    int n_actions = 10;
    double gamma = 0.99;
    int n_features = 10;
    double reward_sparsify_threshold = 0.2;
    std::uint64_t seed = 0;
    DistMode dist_mode = DistMode::uniform;
    /// Next states reachable from each (s, a); 0 means all of them.
    int transition_support = 0;

    void validate() const {
        if (n_states <= 0 || n_actions <= 0) throw UsageError("generator: n_states and n_actions must be positive");
        if (n_actions > 99) throw UsageError("generator: n_actions must be below 100 (behaviour floor 0.01)");
        if (!(gamma > 0.0 && gamma < 1.0)) throw UsageError("generator: gamma must lie in (0, 1)");
        if (n_features <= 0 || n_features > n_states) throw UsageError("generator: need 0 < n_features <= n_states");
        if (!(reward_sparsify_threshold >= 0.0 && reward_sparsify_threshold <= 1.0))
            throw UsageError("generator: reward_sparsify_threshold must lie in [0, 1]");
        if (transition_support < 0 || transition_support > n_states)
            throw UsageError("generator: transition_support must lie in [0, n_states]");
    }
};

/// gamma = 0.9, uniform d, every row of P = [1/6, 1/6, 2/3], R = [1, 5, 5],
/// Phi = [[1,0],[0,1],[1,1]], one action.
inline EvalProblem toy_3state() {
    Matrix p(3, 3);
    p.rowwise() = Eigen::RowVector3d(1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0);
    Matrix r(3, 3);
    r << 1, 1, 1, 5, 5, 5, 5, 5, 5;
    Matrix phi(3, 2);
    phi << 1, 0, 0, 1, 1, 1;
    const Matrix one = Matrix::Ones(3, 1);
    return EvalProblem(TabularMdp({p}, {r}, 0.9), Policy(one), Policy(one), FeatureMap(phi),
                       StateDistribution::uniform(3));
}

namespace detail {

inline Matrix random_row_stochastic(Rng& rng, int rows, int cols, double floor) {
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform() + floor;
        m.row(i) /= m.row(i).sum();
    }
    return m;
}

}  // namespace detail

inline EvalProblem random_mdp(const GeneratorConfig& cfg) {
    cfg.validate();
    const int n = cfg.n_states, na = cfg.n_actions;
    Rng rng(cfg.seed);

    std::vector<Matrix> transition(na, Matrix::Zero(n, n));
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int s = 0; s < n; ++s) {
        for (int a = 0; a < na; ++a) {
            auto row = transition[a].row(s);
            if (cfg.transition_support == 0) {
                for (int sn = 0; sn < n; ++sn) row(sn) = rng.uniform() + 1e-3;
            } else {
                // Partial Fisher-Yates for the support set.
                std::iota(perm.begin(), perm.end(), 0);
                for (int i = 0; i < cfg.transition_support; ++i) {
                    const auto j = static_cast<std::size_t>(i) + rng.index(static_cast<std::size_t>(n - i));
                    std::swap(perm[static_cast<std::size_t>(i)], perm[j]);
                    row(perm[static_cast<std::size_t>(i)]) = rng.uniform() + 1e-3;
                }
            }
            row /= row.sum();
        }
    }

    std::vector<Matrix> reward(na, Matrix::Zero(n, n));
    for (int s = 0; s < n; ++s)
        for (int a = 0; a < na; ++a)
            for (int sn = 0; sn < n; ++sn) {
                const double r = rng.uniform(-1.0, 1.0);
                reward[a](s, sn) = std::abs(r) <= cfg.reward_sparsify_threshold ? 0.0 : r;
            }

    Matrix target = detail::random_row_stochastic(rng, n, na, 0.01);
    Matrix behavior = detail::random_row_stochastic(rng, n, na, 0.0);
    behavior = (behavior * (1.0 - 0.01 * na)).array() + 0.01;

    Matrix phi(n, cfg.n_features);
    bool ok = false;
    for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < cfg.n_features; ++j) phi(i, j) = rng.normal();
        ok = linalg::has_full_column_rank(phi);
    }
    if (!ok) throw NumericalError("random_mdp: no full-column-rank feature matrix after 100 draws");

    TabularMdp mdp(std::move(transition), std::move(reward), cfg.gamma);
    Policy beta(std::move(behavior));
    Vector d;
    switch (cfg.dist_mode) {
        case DistMode::uniform: d = Vector::Constant(n, 1.0 / n); break;
        case DistMode::stationary: d = stationary_distribution(induce_target_kernel(mdp, beta).p).d(); break;
        case DistMode::random:
            d.resize(n);
            for (int s = 0; s < n; ++s) {
                const double u = rng.uniform();
                d(s) = u * u + 0.01;
            }
            d /= d.sum();
            break;
    }
    return EvalProblem(std::move(mdp), Policy(std::move(target)), std::move(beta), FeatureMap(std::move(phi)),
                       StateDistribution(std::move(d)));
}

struct SingularizeOptions {
    /// Also require Phi^T D x = 0 for the new column x, which makes the null
    /// direction of the FIM an eigenvector of B.
    bool d_orthogonal = true;
};

/// Appends a feature column x with Phi^T D (gamma P - I) x = 0 and
/// x^T D (gamma P - I) x = 0, so that the FIM annihilates the new coordinate.
inline EvalProblem singularize(const EvalProblem& problem, SingularizeOptions opt = {}) {
    const Matrix& phi = problem.phi();
    const Eigen::Index n = phi.rows(), q1 = phi.cols();
    if (q1 + 1 > n - 1) throw UsageError("singularize: need q <= n_states - 1");
    const Vector& dv = problem.dist().d();
    const Matrix t = dv.asDiagonal() * (problem.gamma() * problem.p_pi() - Matrix::Identity(n, n));

    Matrix constraints = phi.transpose() * t;
    if (opt.d_orthogonal) {
        constraints.conservativeResize(2 * q1, n);
        constraints.bottomRows(q1) = phi.transpose() * dv.asDiagonal();
    }
    const Matrix basis = linalg::null_space(constraints);
    if (basis.cols() == 0) throw DataError("singularize: admissible subspace is empty");

    const Matrix ts = linalg::symmetric_part(t);
    Eigen::SelfAdjointEigenSolver<Matrix> es(basis.transpose() * ts * basis);
    const Vector& ev = es.eigenvalues();
    const double scale = ev.cwiseAbs().maxCoeff();
    if (!(ev(ev.size() - 1) > 1e-12 * scale) || !(ev(0) < -1e-12 * scale))
        throw DataError("cannot singularize; distribution/policy mismatch insufficient");
    const Vector x_pos = basis * es.eigenvectors().col(ev.size() - 1);
    const Vector x_neg = basis * es.eigenvectors().col(0);

    auto point = [&](double s) -> Vector { return s * x_pos + (1.0 - s) * x_neg; };
    auto quad = [&](double s) { const Vector x = point(s); return x.dot(ts * x); };
    const double d_norm = dv.maxCoeff();
    double lo = 0.0, hi = 1.0, s = 0.5;
    for (int it = 0; it < 200; ++it) {
        s = 0.5 * (lo + hi);
        const double f = quad(s);
        const Vector x = point(s);
        if (std::abs(f) < 1e-14 * d_norm * x.squaredNorm()) break;
        (f < 0.0 ? lo : hi) = s;
    }
    {
        const Vector x = point(s);
        const double deriv = 2.0 * (x_pos - x_neg).dot(ts * x);
        if (deriv != 0.0) {
            const double polished = s - quad(s) / deriv;
            if (polished > 0.0 && polished < 1.0 && std::abs(quad(polished)) <= std::abs(quad(s))) s = polished;
        }
    }
    Vector x = point(s);

    // Scale to the mean D-norm of the existing columns.
    double target_norm = 0.0;
    for (Eigen::Index j = 0; j < q1; ++j) target_norm += std::sqrt(phi.col(j).dot(dv.asDiagonal() * phi.col(j)));
    target_norm /= static_cast<double>(q1);
    x *= target_norm / std::sqrt(x.dot(dv.asDiagonal() * x));

    Matrix phi_new(n, q1 + 1);
    phi_new << phi, x;
    EvalProblem out = problem.with_features(FeatureMap(std::move(phi_new)));
    const CoreMatrices cm = assemble(out);
    if (!(linalg::singular_ratio(cm.m) < 1e-10))
        throw NumericalError("singularize: FIM singular-value ratio " + std::to_string(linalg::singular_ratio(cm.m)) +
                             " not below 1e-10");
    return out;
}

struct SingularProblem {
    EvalProblem problem;
    std::uint64_t seed;  // generator seed that succeeded
};

/// random_mdp with n_features - 1 columns, then singularize. Seeds
/// cfg.seed, cfg.seed + 1, ... are tried until one admits a singular column.
inline SingularProblem singular_problem(GeneratorConfig cfg, int max_tries = 50, SingularizeOptions opt = {}) {
    if (cfg.n_features < 2) throw UsageError("singular_problem: n_features must be >= 2");
    const std::uint64_t base = cfg.seed;
    cfg.n_features -= 1;
    for (int i = 0; i < max_tries; ++i) {
        cfg.seed = base + static_cast<std::uint64_t>(i);
        try {
            return {singularize(random_mdp(cfg), opt), cfg.seed};
        } catch (const DataError&) {
        } catch (const NumericalError&) {
        }
    }
    throw DataError("cannot singularize; distribution/policy mismatch insufficient (" + std::to_string(max_tries) +
                    " seeds tried)");
}

/// Unit vector spanning the FIM null space, oriented so that its inner
/// product with theta* is <= 0. Throws if the FIM is nonsingular.
inline Vector fim_null_direction(const EvalProblem& problem) {
    const CoreMatrices cm = assemble(problem);
    const Matrix nb = linalg::null_space(cm.m, kNullTol);
    if (nb.cols() == 0) throw UsageError("FIM is nonsingular; no null direction");
    Vector v = nb.col(0).normalized();
    if (v.dot(problem.theta_star()) > 0.0) v = -v;
    return v;
}

/// Baird's seven-state star. Action 0 (dashed) jumps uniformly to states
/// 0..5, action 1 (solid) goes to state 6. Target always solid, behaviour
/// dashed w.p. 6/7. Eight features of rank seven.
inline EvalProblem baird() {
    const int n = 7;
    Matrix dashed = Matrix::Zero(n, n), solid = Matrix::Zero(n, n);
    dashed.leftCols(6).setConstant(1.0 / 6.0);
    solid.col(6).setOnes();
    Matrix target(n, 2), behavior(n, 2);
    target.col(0).setZero();
    target.col(1).setOnes();
    behavior.col(0).setConstant(6.0 / 7.0);
    behavior.col(1).setConstant(1.0 / 7.0);
    Matrix phi = Matrix::Zero(n, 8);
    for (int i = 0; i < 6; ++i) {
        phi(i, i) = 2.0;
        phi(i, 7) = 1.0;
    }
    phi(6, 6) = 1.0;
    phi(6, 7) = 2.0;
    return EvalProblem(TabularMdp({dashed, solid}, {Matrix::Zero(n, n), Matrix::Zero(n, n)}, 0.99), Policy(target),
                       Policy(behavior), FeatureMap(phi, RankRequirement::allow_deficient),
                       StateDistribution::uniform(n));
}

/// (1,1,1,1,1,1,10,1) minus its component along the feature null direction
/// (1,1,1,1,1,1,4,-2). Learner updates never touch that component.
inline Vector baird_theta0() {
    Vector t(8), u(8);
    t << 1, 1, 1, 1, 1, 1, 10, 1;
    u << 1, 1, 1, 1, 1, 1, 4, -2;
    u.normalize();
    return t - u * u.dot(t);
}

struct NamedProblem {
    std::string name;
    EvalProblem problem;
    bool singular;
};

inline GeneratorConfig small_nonsingular_config(std::uint64_t seed) {
    GeneratorConfig cfg;
    cfg.n_states = 10;
    cfg.n_actions = 3;
    cfg.gamma = 0.5;
    cfg.n_features = 4;
    cfg.seed = seed;
    return cfg;
}

inline GeneratorConfig small_singular_config(std::uint64_t seed) {
    GeneratorConfig cfg;
    cfg.n_states = 20;
    cfg.n_actions = 2;
    cfg.gamma = 0.99;
    cfg.n_features = 4;
    cfg.seed = seed;
    cfg.dist_mode = DistMode::random;
    cfg.transition_support = 1;
    return cfg;
}

/// Problems every closed-form and dynamics property is checked on: the toy,
/// three small nonsingular random problems and three singularized ones.
/// Baird is left out because its B is singular.
inline std::vector<NamedProblem> bundled_problems() {
    std::vector<NamedProblem> out;
    out.push_back({"toy", toy_3state(), true});
    for (std::uint64_t i = 0; i < 3; ++i)
        out.push_back({"nonsingular_" + std::to_string(i), random_mdp(small_nonsingular_config(100 + i)), false});
    for (std::uint64_t i = 0; i < 3; ++i)
        out.push_back({"singular_" + std::to_string(i), singular_problem(small_singular_config(200 + 100 * i)).problem,
                       true});
    return out;
}

}  // namespace rgtd
