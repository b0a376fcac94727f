#pragma once

// Tabular MDPs, policies, linear features and the policy-induced quantities
// every other module is built on: P^pi, R^pi, V^pi and the projected solution
// theta* with Phi theta* = Pi V^pi.

#include "rgtd/error.hpp"
#include "rgtd/linalg.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace rgtd {

namespace detail {

inline std::string fmt_index(const char* what, Eigen::Index i) { return std::string(what) + "[" + std::to_string(i) + "]"; }

inline void check_stochastic_rows(const Matrix& m, const std::string& name, double tol = 1e-12) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        if ((m.row(r).array() < 0.0).any() || !m.row(r).allFinite())
            throw DataError(name + ": negative or non-finite entry in " + fmt_index("row", r));
        if (std::abs(m.row(r).sum() - 1.0) > tol)
            throw DataError(name + ": " + fmt_index("row", r) + " does not sum to 1");
    }
}

}  // namespace detail

/// Finite MDP. transition(a)(s, s') = P(s'|s,a), reward(a)(s, s') = r(s,a,s').
class TabularMdp {
public:
    TabularMdp(std::vector<Matrix> transition, std::vector<Matrix> reward, double gamma)
        : transition_(std::move(transition)), reward_(std::move(reward)), gamma_(gamma) {
        if (transition_.empty()) throw DataError("mdp: at least one action required");
        if (reward_.size() != transition_.size()) throw DataError("mdp: reward/transition action count mismatch");
        if (!(gamma_ > 0.0 && gamma_ < 1.0)) throw DataError("mdp: gamma must lie in (0, 1)");
        const Eigen::Index n = transition_.front().rows();
        if (n == 0) throw DataError("mdp: at least one state required");
        for (std::size_t a = 0; a < transition_.size(); ++a) {
            const std::string tag = "mdp.transition" + detail::fmt_index("", static_cast<Eigen::Index>(a));
            if (transition_[a].rows() != n || transition_[a].cols() != n) throw DataError(tag + ": shape mismatch");
            if (reward_[a].rows() != n || reward_[a].cols() != n) throw DataError("mdp.reward: shape mismatch");
            if (!reward_[a].allFinite()) throw DataError("mdp.reward: non-finite entry");
            detail::check_stochastic_rows(transition_[a], tag);
        }
    }

    int n_states() const noexcept { return static_cast<int>(transition_.front().rows()); }
    int n_actions() const noexcept { return static_cast<int>(transition_.size()); }
    double gamma() const noexcept { return gamma_; }

    double p(int s, int a, int s_next) const { return transition_[a](s, s_next); }
    double r(int s, int a, int s_next) const { return reward_[a](s, s_next); }
    const Matrix& transition(int a) const { return transition_[a]; }
    const Matrix& reward(int a) const { return reward_[a]; }

private:
    std::vector<Matrix> transition_;
    std::vector<Matrix> reward_;
    double gamma_;
};

/// Stochastic policy, probs(s, a) = pi(a|s).
class Policy {
public:
    explicit Policy(Matrix probs) : probs_(std::move(probs)) {
        if (probs_.size() == 0) throw DataError("policy: empty");
        detail::check_stochastic_rows(probs_, "policy");
    }

    double operator()(int s, int a) const { return probs_(s, a); }
    const Matrix& probs() const noexcept { return probs_; }
    int n_states() const noexcept { return static_cast<int>(probs_.rows()); }
    int n_actions() const noexcept { return static_cast<int>(probs_.cols()); }

private:
    Matrix probs_;
};

enum class RankRequirement { full_column_rank, allow_deficient };

/// Feature matrix Phi (|S| x q); row s is phi(s).
class FeatureMap {
public:
    explicit FeatureMap(Matrix phi, RankRequirement req = RankRequirement::full_column_rank)
        : phi_(std::move(phi)) {
        if (phi_.size() == 0) throw DataError("features: empty");
        if (!phi_.allFinite()) throw DataError("features: non-finite entry");
        full_rank_ = linalg::has_full_column_rank(phi_);
        if (!full_rank_ && req == RankRequirement::full_column_rank)
            throw DataError("features: Phi must have full column rank");
    }

    const Matrix& phi() const noexcept { return phi_; }
    auto row(int s) const { return phi_.row(s); }
    int n_states() const noexcept { return static_cast<int>(phi_.rows()); }
    int dim() const noexcept { return static_cast<int>(phi_.cols()); }
    bool full_column_rank() const noexcept { return full_rank_; }

private:
    Matrix phi_;
    bool full_rank_ = false;
};

/// Strictly positive state weighting d (the diagonal of D).
class StateDistribution {
public:
    explicit StateDistribution(Vector d) : d_(std::move(d)) {
        if (d_.size() == 0) throw DataError("dist: empty");
        if (!d_.allFinite() || (d_.array() <= 0.0).any()) throw DataError("dist: entries must be strictly positive");
        if (std::abs(d_.sum() - 1.0) > 1e-12) throw DataError("dist: entries must sum to 1");
    }

    static StateDistribution uniform(int n) { return StateDistribution(Vector::Constant(n, 1.0 / n)); }

    const Vector& d() const noexcept { return d_; }
    double operator()(int s) const { return d_(s); }
    int size() const noexcept { return static_cast<int>(d_.size()); }
    auto matrix() const { return d_.asDiagonal(); }

private:
    Vector d_;
};

struct PolicyKernel {
    Matrix p;  // P^pi(s, s')
    Vector r;  // R^pi(s)
};

inline PolicyKernel induce_target_kernel(const TabularMdp& mdp, const Policy& policy) {
    if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions())
        throw DataError("policy dimensions do not match the mdp");
    const int n = mdp.n_states();
    PolicyKernel k{Matrix::Zero(n, n), Vector::Zero(n)};
    for (int a = 0; a < mdp.n_actions(); ++a) {
        const Vector w = policy.probs().col(a);
        k.p += w.asDiagonal() * mdp.transition(a);
        k.r += w.cwiseProduct(mdp.transition(a).cwiseProduct(mdp.reward(a)).rowwise().sum());
    }
    return k;
}

/// Stationary distribution of a row-stochastic matrix by power iteration on
/// d <- d P. Failure to converge is reported as a non-ergodic chain.
inline StateDistribution stationary_distribution(const Matrix& p, int max_iters = 100000, double tol = 1e-12) {
    if (p.rows() != p.cols() || p.rows() == 0) throw DataError("stationary_distribution: P must be square");
    detail::check_stochastic_rows(p, "stationary_distribution.P", 1e-10);
    const Eigen::Index n = p.rows();
    Eigen::RowVectorXd d = Eigen::RowVectorXd::Constant(n, 1.0 / static_cast<double>(n));
    for (int it = 0; it < max_iters; ++it) {
        Eigen::RowVectorXd next = d * p;
        next /= next.sum();
        const double change = (next - d).lpNorm<1>();
        d = std::move(next);
        if (change < tol) {
            if ((d.array() <= 1e-9 * d.maxCoeff()).any())
                throw NumericalError("stationary_distribution: chain has transient states (d(s) = 0)");
            d /= d.sum();
            return StateDistribution(d.transpose());
        }
    }
    throw NumericalError("stationary_distribution: power iteration did not converge; chain is not ergodic");
}

/// Solves (I - gamma P) V = R by a dense LU solve.
inline Vector value_function(const Matrix& p, const Vector& r, double gamma) {
    const Eigen::Index n = p.rows();
    const Matrix a = Matrix::Identity(n, n) - gamma * p;
    Eigen::PartialPivLU<Matrix> lu(a);
    Vector v = lu.solve(r);
    const double residual = (a * v - r).norm();
    if (!v.allFinite() || residual > 1e-9 * (1.0 + r.norm()))
        throw NumericalError("value_function: linear solve failed");
    return v;
}

/// theta* = argmin ||V - Phi theta||_D. Rank-deficient features get the
/// minimum-norm minimiser.
inline Vector true_projected_solution(const Matrix& phi, const Vector& d, const Vector& v) {
    const Matrix b = phi.transpose() * d.asDiagonal() * phi;
    const Vector rhs = phi.transpose() * d.asDiagonal() * v;
    if (linalg::has_full_column_rank(phi)) return b.llt().solve(rhs);
    return b.completeOrthogonalDecomposition().solve(rhs);
}

/// Policy evaluation problem: MDP, target and behaviour policies, features and
/// state weighting, plus the derived P^pi, R^pi, V^pi and theta*.
class EvalProblem {
public:
    EvalProblem(TabularMdp mdp, Policy target, Policy behavior, FeatureMap features, StateDistribution dist)
        : mdp_(std::move(mdp)),
          target_(std::move(target)),
          behavior_(std::move(behavior)),
          features_(std::move(features)),
          dist_(std::move(dist)) {
        const int n = mdp_.n_states();
        if (behavior_.n_states() != n || behavior_.n_actions() != mdp_.n_actions())
            throw DataError("behavior policy dimensions do not match the mdp");
        if (features_.n_states() != n) throw DataError("features: row count must equal n_states");
        if (dist_.size() != n) throw DataError("dist: length must equal n_states");
        for (int s = 0; s < n; ++s)
            for (int a = 0; a < mdp_.n_actions(); ++a)
                if (target_(s, a) > 0.0 && behavior_(s, a) <= 0.0)
                    throw DataError("behavior policy must cover the target policy at state " + std::to_string(s));
        auto kernel = induce_target_kernel(mdp_, target_);
        p_pi_ = std::move(kernel.p);
        r_pi_ = std::move(kernel.r);
        v_pi_ = value_function(p_pi_, r_pi_, mdp_.gamma());
        theta_star_ = true_projected_solution(features_.phi(), dist_.d(), v_pi_);
    }

    const TabularMdp& mdp() const noexcept { return mdp_; }
    const Policy& target() const noexcept { return target_; }
    const Policy& behavior() const noexcept { return behavior_; }
    const FeatureMap& features() const noexcept { return features_; }
    const StateDistribution& dist() const noexcept { return dist_; }

    const Matrix& phi() const noexcept { return features_.phi(); }
    const Matrix& p_pi() const noexcept { return p_pi_; }
    const Vector& r_pi() const noexcept { return r_pi_; }
    const Vector& v_pi() const noexcept { return v_pi_; }
    const Vector& theta_star() const noexcept { return theta_star_; }

    double gamma() const noexcept { return mdp_.gamma(); }
    int n_states() const noexcept { return mdp_.n_states(); }
    int n_actions() const noexcept { return mdp_.n_actions(); }
    int dim() const noexcept { return features_.dim(); }

    /// Same dynamics and policies, different features.
    EvalProblem with_features(FeatureMap features) const {
        return EvalProblem(mdp_, target_, behavior_, std::move(features), dist_);
    }

private:
    TabularMdp mdp_;
    Policy target_;
    Policy behavior_;
    FeatureMap features_;
    StateDistribution dist_;
    Matrix p_pi_;
    Vector r_pi_;
    Vector v_pi_;
    Vector theta_star_;
};

/// D-weighted projection onto Range(Phi): Phi (Phi^T D Phi)^{-1} Phi^T D.
inline Matrix projection_matrix(const Matrix& phi, const Vector& d) {
    const Matrix b = phi.transpose() * d.asDiagonal() * phi;
    return phi * b.llt().solve(phi.transpose() * d.asDiagonal());
}

}  // namespace rgtd
