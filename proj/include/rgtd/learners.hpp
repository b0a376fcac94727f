#pragma once

// Stochastic learners driven by i.i.d. transitions:
//   s ~ d, a ~ beta(.|s), s' ~ P(.|s,a), rho = pi(a|s) / beta(a|s).

#include "rgtd/error.hpp"
#include "rgtd/linalg.hpp"
#include "rgtd/mdp.hpp"
#include "rgtd/rng.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rgtd {

enum class Algorithm { rgtd, gtd2, td0 };

inline std::string to_string(Algorithm a) {
    switch (a) {
        case Algorithm::rgtd: return "rgtd";
        case Algorithm::gtd2: return "gtd2";
        case Algorithm::td0: return "td0";
    }
    return "?";
}

inline Algorithm parse_algorithm(std::string_view s) {
    if (s == "rgtd" || s == "R-GTD") return Algorithm::rgtd;
    if (s == "gtd2" || s == "GTD2") return Algorithm::gtd2;
    if (s == "td0" || s == "TD(0)") return Algorithm::td0;
    throw UsageError("unknown algorithm '" + std::string(s) + "' (expected rgtd, gtd2 or td0)");
}

struct LearnerState {
    Vector theta;
    Vector w;
    Vector lambda;
    std::int64_t iter = 0;

    static LearnerState from_theta(const Vector& theta0) {
        return {theta0, Vector::Zero(theta0.size()), Vector::Zero(theta0.size()), 0};
    }
    bool finite() const { return theta.allFinite() && w.allFinite() && lambda.allFinite(); }
};

/// alpha_k = scale / (k + offset), or a constant.
class StepSchedule {
public:
    enum class Kind { paper_default, constant, custom };

    static StepSchedule paper_default() { return StepSchedule(Kind::paper_default, 1.0, 30.0); }
    static StepSchedule constant(double alpha) {
        if (!(alpha > 0.0)) throw UsageError("step schedule: constant alpha must be > 0");
        return StepSchedule(Kind::constant, alpha, 0.0);
    }
    static StepSchedule custom(double scale, double offset) {
        if (!(scale > 0.0) || !(offset > 0.0)) throw UsageError("step schedule: scale and offset must be > 0");
        return StepSchedule(Kind::custom, scale, offset);
    }

    double operator()(std::int64_t k) const noexcept {
        if (kind_ == Kind::constant) return scale_;
        return scale_ / (static_cast<double>(k) + offset_);
    }

    Kind kind() const noexcept { return kind_; }
    double scale() const noexcept { return scale_; }
    double offset() const noexcept { return offset_; }

private:
    StepSchedule(Kind k, double scale, double offset) : kind_(k), scale_(scale), offset_(offset) {}
    Kind kind_;
    double scale_;
    double offset_;
};

struct TransitionSample {
    int s = 0;
    int a = 0;
    int s_next = 0;
    double r = 0.0;
    double rho = 0.0;
    int q = 0;
    const double* phi_data = nullptr;       // phi(s)
    const double* phi_next_data = nullptr;  // phi(s')

    Eigen::Map<const Vector> phi() const { return {phi_data, q}; }
    Eigen::Map<const Vector> phi_next() const { return {phi_next_data, q}; }
};

/// Precomputed cumulative tables for fast sampling from an EvalProblem.
class Sampler {
public:
    explicit Sampler(const EvalProblem& problem)
        : n_(problem.n_states()), na_(problem.n_actions()), q_(problem.dim()), gamma_(problem.gamma()),
          phi_t_(problem.phi().transpose()) {
        const auto& mdp = problem.mdp();
        cum_d_ = cumulate(problem.dist().d().data(), n_);
        cum_beta_.resize(static_cast<std::size_t>(n_) * na_);
        rho_.resize(static_cast<std::size_t>(n_) * na_);
        cum_p_.resize(static_cast<std::size_t>(n_) * na_ * n_);
        reward_.resize(cum_p_.size());
        for (int s = 0; s < n_; ++s) {
            double acc = 0.0;
            for (int a = 0; a < na_; ++a) {
                const double pb = problem.behavior()(s, a);
                acc += pb;
                cum_beta_[idx(s, a)] = acc;
                rho_[idx(s, a)] = pb > 0.0 ? problem.target()(s, a) / pb : 0.0;
                double pacc = 0.0;
                for (int sn = 0; sn < n_; ++sn) {
                    pacc += mdp.p(s, a, sn);
                    cum_p_[idx(s, a) * n_ + sn] = pacc;
                    reward_[idx(s, a) * n_ + sn] = mdp.r(s, a, sn);
                }
            }
        }
    }

    TransitionSample sample(Rng& rng) const {
        TransitionSample t;
        t.s = static_cast<int>(rng.categorical({cum_d_.data(), cum_d_.size()}));
        t.a = static_cast<int>(rng.categorical({cum_beta_.data() + idx(t.s, 0), static_cast<std::size_t>(na_)}));
        t.s_next = static_cast<int>(
            rng.categorical({cum_p_.data() + idx(t.s, t.a) * n_, static_cast<std::size_t>(n_)}));
        fill(t);
        return t;
    }

    /// Deterministic sample for a given outcome (used for enumeration).
    TransitionSample make(int s, int a, int s_next) const {
        TransitionSample t;
        t.s = s;
        t.a = a;
        t.s_next = s_next;
        fill(t);
        return t;
    }

    double gamma() const noexcept { return gamma_; }
    int dim() const noexcept { return q_; }

private:
    std::size_t idx(int s, int a) const noexcept { return static_cast<std::size_t>(s) * na_ + a; }

    void fill(TransitionSample& t) const {
        t.r = reward_[idx(t.s, t.a) * n_ + t.s_next];
        t.rho = rho_[idx(t.s, t.a)];
        t.q = q_;
        t.phi_data = phi_t_.col(t.s).data();
        t.phi_next_data = phi_t_.col(t.s_next).data();
    }

    static std::vector<double> cumulate(const double* p, int n) {
        std::vector<double> c(static_cast<std::size_t>(n));
        double acc = 0.0;
        for (int i = 0; i < n; ++i) c[static_cast<std::size_t>(i)] = acc += p[i];
        return c;
    }

    int n_, na_, q_;
    double gamma_;
    Matrix phi_t_;  // q x n, column s is phi(s)
    std::vector<double> cum_d_, cum_beta_, rho_, cum_p_, reward_;
};

/// R-GTD update, all right-hand sides evaluated at the current iterate.
inline void rgtd_step(LearnerState& st, const TransitionSample& x, double gamma, double alpha, double c) {
    const double pt = x.phi().dot(st.theta);
    const double pw = x.phi().dot(st.w);
    const double pl = x.phi().dot(st.lambda);
    const double delta = x.rho * x.r + gamma * x.rho * x.phi_next().dot(st.theta) - pt;
    st.theta += alpha * ((x.phi() - gamma * x.rho * x.phi_next()) * pl - x.phi() * pt);
    st.w += (alpha * (-c * pw - pl)) * x.phi();
    st.lambda += (alpha * (delta + pw)) * x.phi();
    ++st.iter;
}

inline void gtd2_step(LearnerState& st, const TransitionSample& x, double gamma, double alpha) {
    const double pt = x.phi().dot(st.theta);
    const double pl = x.phi().dot(st.lambda);
    const double delta = x.rho * x.r + gamma * x.rho * x.phi_next().dot(st.theta) - pt;
    st.theta += (alpha * pl) * (x.phi() - gamma * x.rho * x.phi_next());
    st.lambda += (alpha * (delta - pl)) * x.phi();
    ++st.iter;
}

inline void td0_step(LearnerState& st, const TransitionSample& x, double gamma, double alpha) {
    const double delta = x.r + gamma * x.phi_next().dot(st.theta) - x.phi().dot(st.theta);
    st.theta += (alpha * x.rho * delta) * x.phi();
    ++st.iter;
}

inline void step(Algorithm alg, LearnerState& st, const TransitionSample& x, double gamma, double alpha, double c) {
    switch (alg) {
        case Algorithm::rgtd: rgtd_step(st, x, gamma, alpha, c); break;
        case Algorithm::gtd2: gtd2_step(st, x, gamma, alpha); break;
        case Algorithm::td0: td0_step(st, x, gamma, alpha); break;
    }
}

/// Exact E[increment] / alpha at a fixed state, by enumerating every
/// (s, a, s') outcome weighted by d(s) beta(a|s) P(s'|s,a).
/// Returned stacked as [theta; w; lambda].
inline Vector expected_increment(const EvalProblem& problem, const LearnerState& at, Algorithm alg, double c) {
    const Sampler sampler(problem);
    const int q = problem.dim();
    Vector mean = Vector::Zero(3 * q);
    for (int s = 0; s < problem.n_states(); ++s)
        for (int a = 0; a < problem.n_actions(); ++a)
            for (int sn = 0; sn < problem.n_states(); ++sn) {
                const double p = problem.dist()(s) * problem.behavior()(s, a) * problem.mdp().p(s, a, sn);
                if (p == 0.0) continue;
                LearnerState next = at;
                step(alg, next, sampler.make(s, a, sn), problem.gamma(), 1.0, c);
                mean.segment(0, q) += p * (next.theta - at.theta);
                mean.segment(q, q) += p * (next.w - at.w);
                mean.segment(2 * q, q) += p * (next.lambda - at.lambda);
            }
    return mean;
}

struct RunConfig {
    Algorithm algorithm = Algorithm::rgtd;
    StepSchedule schedule = StepSchedule::paper_default();
    double c = 1.0;
    std::int64_t iters = 200000;
    std::uint64_t seed = 0;
    std::int64_t stride = 100;
    double divergence_threshold = 1e12;
};

struct Trajectory {
    Algorithm algorithm = Algorithm::rgtd;
    double c = 0.0;
    std::uint64_t seed = 0;
    std::vector<std::int64_t> iters;  // logged iteration indices
    std::vector<double> errors;       // ||theta_k - theta_ref||
    LearnerState final_state;
    bool diverged = false;
    std::int64_t diverged_at = -1;
};

/// Logged iterations: 0, stride, 2 stride, ... and finally iters itself, i.e.
/// ceil(iters / stride) + 1 points. After divergence the run halts and the
/// remaining points repeat the last error (infinity if non-finite).
inline Trajectory run(const EvalProblem& problem, const Sampler& sampler, const RunConfig& cfg, const Vector& theta0,
                      const Vector& theta_ref) {
    if (cfg.iters < 0) throw UsageError("run: iters must be >= 0");
    if (cfg.stride <= 0) throw UsageError("run: stride must be > 0");
    if (cfg.algorithm == Algorithm::rgtd && !(cfg.c > 0.0)) throw UsageError("run: c must be > 0");
    if (theta0.size() != problem.dim() || theta_ref.size() != problem.dim())
        throw UsageError("run: theta0/theta_ref length must equal the feature dimension");

    Trajectory tr;
    tr.algorithm = cfg.algorithm;
    tr.c = cfg.algorithm == Algorithm::rgtd ? cfg.c : 0.0;
    tr.seed = cfg.seed;
    const std::int64_t n_log = (cfg.iters + cfg.stride - 1) / cfg.stride + 1;
    tr.iters.reserve(static_cast<std::size_t>(n_log));
    tr.errors.reserve(static_cast<std::size_t>(n_log));

    Rng rng(cfg.seed);
    LearnerState st = LearnerState::from_theta(theta0);
    const double gamma = problem.gamma();
    auto log_point = [&](std::int64_t k) {
        tr.iters.push_back(k);
        tr.errors.push_back((st.theta - theta_ref).norm());
    };
    log_point(0);

    for (std::int64_t k = 0; k < cfg.iters; ++k) {
        step(cfg.algorithm, st, sampler.sample(rng), gamma, cfg.schedule(k), cfg.c);
        const std::int64_t done = k + 1;
        const bool finite = st.finite();
        if (!finite || st.theta.norm() > cfg.divergence_threshold) {
            tr.diverged = true;
            tr.diverged_at = done;
            const double frozen = finite ? (st.theta - theta_ref).norm() : std::numeric_limits<double>::infinity();
            for (std::int64_t j = static_cast<std::int64_t>(tr.iters.size()); j < n_log; ++j) {
                tr.iters.push_back(std::min(j * cfg.stride, cfg.iters));
                tr.errors.push_back(frozen);
            }
            break;
        }
        if (done % cfg.stride == 0 || done == cfg.iters) log_point(done);
    }
    tr.final_state = std::move(st);
    return tr;
}

inline Trajectory run(const EvalProblem& problem, const RunConfig& cfg, const Vector& theta0, const Vector& theta_ref) {
    return run(problem, Sampler(problem), cfg, theta0, theta_ref);
}

}  // namespace rgtd
