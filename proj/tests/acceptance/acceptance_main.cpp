// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Tolerances and runtime limits are pinned below.

#include "rgtd/harness.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

using namespace rgtd;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += "FAILED " + what;
        }
    }
    void note(const std::string& s) {
        if (!detail.empty()) detail += "; ";
        detail += s;
    }
};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

double rel_diff(const Vector& a, const Vector& b) { return (a - b).norm() / std::max(1.0, std::max(a.norm(), b.norm())); }

// ---------------------------------------------------------------- 1

constexpr double kClosedFormTol = 1e-8;

Outcome closed_form_consistency() {
    Outcome o;
    double worst = 0.0;
    int checked = 0;
    for (int i = 0; i < 20; ++i) {
        GeneratorConfig g;
        g.n_states = 20;
        g.n_actions = 3;
        g.gamma = 0.9;
        g.n_features = 2 + i % 9;  // 2..10
        g.seed = 1000 + static_cast<std::uint64_t>(i);
        const EvalProblem p = random_mdp(g);
        const CoreMatrices cm = assemble(p);
        if (!cm.k) {
            o.require(false, "problem " + std::to_string(i) + " has singular G");
            continue;
        }
        const Matrix mi = cm.m.fullPivLu().inverse();
        const int q = cm.dim();
        for (double c : {0.2, 0.4, 1.0, 10.0}) {
            const SaddleSolution kkt = saddle_point(cm, c);
            // Inverse formulas through M^{-1}.
            const Matrix lhs = Matrix::Identity(q, q) + mi * cm.b_mat * mi.transpose() * cm.b_mat / c;
            const Vector th_inv = lhs.fullPivLu().solve(-mi * cm.b);
            const Vector la_inv = -mi.transpose() * cm.b_mat * th_inv;
            const Vector w_inv = -la_inv / c;
            const Vector th_ne = rgtd_solution(cm, c);
            worst = std::max({worst, rel_diff(kkt.theta, th_inv), rel_diff(kkt.theta, th_ne), rel_diff(th_inv, th_ne),
                              rel_diff(kkt.lambda, la_inv), rel_diff(kkt.w, w_inv)});
            ++checked;
        }
    }
    o.require(worst <= kClosedFormTol, "pairwise agreement");
    o.note(std::to_string(checked) + " (problem, c) pairs, worst relative difference " + num(worst) + " (tol " +
           num(kClosedFormTol) + ")");
    return o;
}

// ---------------------------------------------------------------- 2

constexpr double kInverseTol = 1e-8;

Outcome regularized_inverse_identity() {
    Outcome o;
    Rng rng(2024);
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
        const int q = 3 + static_cast<int>(rng.index(8));                       // 3..10
        const int r = 1 + static_cast<int>(rng.index(static_cast<std::uint64_t>(q - 1)));  // 1..q-1
        Matrix a(q, r);
        for (int x = 0; x < q; ++x)
            for (int y = 0; y < r; ++y) a(x, y) = rng.normal();
        const Matrix g = a * a.transpose();
        const SpectralDecomp sd = decompose(g);
        if (sd.nullity() != q - r) {
            o.require(false, "matrix " + std::to_string(i) + " nullity " + std::to_string(sd.nullity()) + " != " +
                                 std::to_string(q - r));
            continue;
        }
        for (double c : {0.1, 1.0, 100.0}) {
            const Matrix prod = (g + sd.null_projector / c) * regularized_inverse(sd, c);
            worst = std::max(worst, (prod - Matrix::Identity(q, q)).cwiseAbs().maxCoeff());
        }
    }
    o.require(worst <= kInverseTol, "identity");
    o.note("50 matrices x 3 c, worst max-abs deviation " + num(worst) + " (tol " + num(kInverseTol) + ")");
    return o;
}

// ---------------------------------------------------------------- 3

const std::vector<double> kExpansionGrid{1e2, 1e3, 1e4};
constexpr double kNonsingularSlopeLo = -2.3, kNonsingularSlopeHi = -1.7, kSingularSlopeMax = -0.9;

Outcome expansion_slopes(const std::vector<NamedProblem>& problems) {
    Outcome o;
    for (const auto& np : problems) {
        const CoreMatrices cm = assemble(np.problem);
        const AffineSolutionSet set = gtd2_solutions(cm);
        try {
            const ExpansionReport rep = expansion_check(cm, set, kExpansionGrid);
            if (!rep.slope) {
                o.require(false, np.name + " has zero residuals");
                continue;
            }
            const double s = rep.slope->slope;
            if (rep.singular)
                o.require(np.singular && s <= kSingularSlopeMax, np.name + " slope " + num(s));
            else
                o.require(!np.singular && s >= kNonsingularSlopeLo && s <= kNonsingularSlopeHi, np.name + " slope " + num(s));
            o.note(np.name + " c0=" + num(rep.c0) + " slope=" + num(s));
        } catch (const Error& e) {
            o.require(false, np.name + ": " + e.what());
        }
    }
    return o;
}

// ---------------------------------------------------------------- 4

const std::vector<double> kBoundGrid{0.2, 0.4, 1.0, 2.0, 5.0, 10.0, 1e2, 1e3, 1e4};

Outcome prediction_bounds(const std::vector<NamedProblem>& problems) {
    Outcome o;
    int rows = 0;
    for (const auto& np : problems) {
        const CoreMatrices cm = assemble(np.problem);
        const BoundReport rep = prediction_bound_check(cm, np.problem.theta_star(), kBoundGrid);
        std::size_t expected = 0;
        for (double c : kBoundGrid) expected += c > rep.c0 ? 1 : 0;
        o.require(rep.rows.size() == expected, np.name + " skipped a grid point above c0");
        o.require(rep.all_hold(), np.name + " bound");
        if (!rep.singular) {
            // Explicit ||Phi|| ||K|| / c term.
            const double explicit_const = linalg::spectral_norm(cm.phi) * cm.k->norm();
            o.require(std::abs(rep.constant - explicit_const) <= 1e-12 * explicit_const, np.name + " K term");
        }
        double min_slack = std::numeric_limits<double>::infinity();
        for (const auto& r : rep.rows) min_slack = std::min(min_slack, r.bound_rhs - r.bound_lhs);
        rows += static_cast<int>(rep.rows.size());
        o.note(np.name + (rep.singular ? " (singular, empirical C)" : " (nonsingular)") + " min slack " + num(min_slack));
    }
    o.note(std::to_string(rows) + " (problem, c) rows");
    return o;
}

// ---------------------------------------------------------------- 5

constexpr double kToyRatioMax = 1e-12, kToyEndpointTol = 1e-2;

Outcome toy_fidelity() {
    Outcome o;
    const EvalProblem toy = toy_3state();
    Matrix p(3, 3), r(3, 3), phi(3, 2);
    p << 1.0 / 6, 1.0 / 6, 2.0 / 3, 1.0 / 6, 1.0 / 6, 2.0 / 3, 1.0 / 6, 1.0 / 6, 2.0 / 3;
    r << 1, 1, 1, 5, 5, 5, 5, 5, 5;
    phi << 1, 0, 0, 1, 1, 1;
    o.require(toy.mdp().transition(0) == p, "P");
    o.require(toy.mdp().reward(0) == r, "R");
    o.require(toy.phi() == phi, "Phi");
    o.require(toy.gamma() == 0.9, "gamma");
    o.require(toy.dist().d() == Vector::Constant(3, 1.0 / 3), "d");

    const CoreMatrices cm = assemble(toy);
    Matrix m(2, 2);
    m << -0.5, 0.5, 0.5, -0.5;
    m /= 3.0;
    o.require((cm.m - m).cwiseAbs().maxCoeff() <= 1e-15, "FIM entries");
    const double ratio = linalg::singular_ratio(cm.m);
    o.require(ratio < kToyRatioMax, "singular-value ratio");

    const auto path = harness::toy_trajectory();
    const harness::ToyRow& end = path[path.size() - 2];
    const harness::ToyRow& lim = path.back();
    const AffineSolutionSet set = gtd2_solutions(cm);
    const Vector target = cm.phi * (set.particular - set.null_basis * (set.null_basis.transpose() * set.particular));
    const double gap = (end.phi_theta - target).norm();
    o.require((lim.phi_theta - target).norm() <= 1e-12, "limit row");
    o.require(gap <= kToyEndpointTol, "endpoint");
    o.note("ratio " + num(ratio) + ", endpoint c=" + num(end.c) + " gap " + num(gap) + " (tol " + num(kToyEndpointTol) + ")");
    return o;
}

// ---------------------------------------------------------------- 6-8

constexpr int kSeeds = 30;

std::vector<harness::VariantRuns> runs(const EvalProblem& p, std::vector<harness::Variant> variants,
                                       std::int64_t iters, const Vector& theta0, const Vector& ref,
                                       std::int64_t stride = 1000) {
    return harness::run_variants("acceptance", p, variants, kSeeds, 0, iters, stride, StepSchedule::paper_default(),
                                 theta0, ref);
}

double median_at(const harness::VariantRuns& vr, std::int64_t iter) {
    for (const auto& s : harness::variant_statistics(vr))
        if (s.iter == iter) return s.box.median;
    throw UsageError("no log point at iteration " + std::to_string(iter));
}

constexpr double kConvergenceRatio = 0.25;

Outcome stochastic_convergence(const std::vector<NamedProblem>& problems) {
    Outcome o;
    const std::int64_t iters = 200000;
    for (const char* name : {"toy", "singular_0"}) {
        const auto it = std::find_if(problems.begin(), problems.end(), [&](const NamedProblem& np) { return np.name == name; });
        const EvalProblem& p = it->problem;
        const Vector ref = saddle_point(p, 1.0).theta;
        const auto vr = runs(p, {{Algorithm::rgtd, 1.0}}, iters, Vector::Zero(p.dim()), ref).front();
        const double m0 = median_at(vr, 0), m1k = median_at(vr, 1000), mend = median_at(vr, iters);
        o.require(mend < kConvergenceRatio * m0, std::string(name) + " final/initial");
        o.require(mend < m1k, std::string(name) + " final vs 1e3");
        o.note(std::string(name) + ": median initial " + num(m0) + ", k=1e3 " + num(m1k) + ", final " + num(mend) +
               " (ratio " + num(mend / m0) + ", need < " + num(kConvergenceRatio) + ")");
    }
    return o;
}

Outcome null_space_contrast(const std::vector<NamedProblem>& problems) {
    Outcome o;
    const auto it = std::find_if(problems.begin(), problems.end(), [](const NamedProblem& np) { return np.name == "singular_0"; });
    const EvalProblem& p = it->problem;
    const Vector v = fim_null_direction(p);
    const Vector theta0 = v;  // unit null-space component
    const double null_norm = std::abs(v.dot(theta0));
    const std::int64_t iters = 200000;
    const auto all = runs(p, {{Algorithm::rgtd, 1.0}, {Algorithm::gtd2, 0.0}}, iters, theta0, p.theta_star());
    const auto rg = harness::variant_statistics(all[0]).back().box;
    const auto gt_stats = harness::variant_statistics(all[1]);
    double gtd2_min_median = std::numeric_limits<double>::infinity();
    for (const auto& s : gt_stats) gtd2_min_median = std::min(gtd2_min_median, s.box.median);
    const auto gt = gt_stats.back().box;
    o.require(rg.iqr() < gt.iqr(), "IQR contrast");
    o.require(gtd2_min_median >= null_norm, "GTD2 retains null component");
    o.note("final IQR R-GTD " + num(rg.iqr()) + " vs GTD2 " + num(gt.iqr()) + "; GTD2 min median " + num(gtd2_min_median) +
           " vs null component " + num(null_norm) + "; final medians R-GTD " + num(rg.median) + ", GTD2 " + num(gt.median));
    return o;
}

constexpr int kTdDivergedMin = 28;
constexpr double kTdErrorThreshold = 1e3, kBairdRgtdRatio = 0.10;

Outcome baird_check() {
    Outcome o;
    const EvalProblem p = baird();
    const Vector theta0 = baird_theta0();
    const Vector ref = Vector::Zero(8);

    const auto td = runs(p, {{Algorithm::td0, 0.0}}, 100000, theta0, ref, 100).front();
    int bad = 0;
    double td_max_median = 0.0;
    for (const auto& t : td.runs) {
        const double peak = *std::max_element(t.errors.begin(), t.errors.end());
        if (t.diverged || peak > kTdErrorThreshold) ++bad;
    }
    for (const auto& s : harness::variant_statistics(td)) td_max_median = std::max(td_max_median, s.box.median);
    o.require(bad >= kTdDivergedMin, "TD(0) divergence count");

    const std::int64_t iters = 200000;
    const auto all = runs(p, {{Algorithm::rgtd, 1.0}, {Algorithm::gtd2, 0.0}}, iters, theta0, ref);
    const double r0 = median_at(all[0], 0), rend = median_at(all[0], iters);
    const double g0 = median_at(all[1], 0), gmid = median_at(all[1], iters / 2), gend = median_at(all[1], iters);
    o.require(rend < kBairdRgtdRatio * r0, "R-GTD final/initial");
    o.require(gend < gmid && gmid < g0, "GTD2 decreasing");
    o.note("TD(0) runs diverged or > 1e3: " + std::to_string(bad) + "/30 (need " + std::to_string(kTdDivergedMin) +
           "), largest TD(0) median " + num(td_max_median) + "; R-GTD ratio " + num(rend / r0) + " (need < " +
           num(kBairdRgtdRatio) + "); GTD2 medians " + num(g0) + " -> " + num(gmid) + " -> " + num(gend));
    return o;
}

// ---------------------------------------------------------------- 9

constexpr double kShrinkMin = 1e6, kDecayR2Min = 0.99;

Outcome dynamics_certificates(const std::vector<NamedProblem>& problems) {
    Outcome o;
    double worst_shrink = std::numeric_limits<double>::infinity(), worst_r2 = 1.0;
    for (const auto& np : problems) {
        const CoreMatrices cm = assemble(np.problem);
        for (double c : {0.2, 0.4, 1.0}) {
            const PdgdSystem sys = make_system(cm, c);
            const RankCertificate rank = rank_certificate(sys);
            const SpectrumCertificate spec = spectrum_certificate(sys);
            const std::string tag = np.name + " c=" + num(c);
            o.require(rank.full_row_rank, tag + " rank");
            o.require(spec.hurwitz, tag + " Hurwitz");
            if (!spec.hurwitz) continue;
            // Horizon long enough for the slowest mode to decay by e^-30;
            // step small enough for the fastest.
            double radius = 0.0;
            for (const auto& z : spec.eigenvalues) radius = std::max(radius, std::abs(z));
            const double dt = std::min(0.01, 1.0 / radius);
            const double horizon = 30.0 / -spec.abscissa;
            const long steps = static_cast<long>(std::ceil(horizon / dt));
            const IntegrationResult res = integrate(sys, Vector::Zero(3 * sys.dim()), dt, steps);
            const double shrink = res.dist.front() / res.dist.back();
            const linalg::LineFit fit = decay_fit(res);
            worst_shrink = std::min(worst_shrink, shrink);
            worst_r2 = std::min(worst_r2, fit.r_squared);
            o.require(shrink >= kShrinkMin, tag + " shrink " + num(shrink));
            o.require(fit.r_squared > kDecayR2Min, tag + " r2 " + num(fit.r_squared));
        }
    }
    o.note(std::to_string(problems.size() * 3) + " systems, smallest shrink " + num(worst_shrink) + ", smallest r2 " +
           num(worst_r2));
    return o;
}

// ---------------------------------------------------------------- 10

constexpr double kSigmaBound = 3.0;

Outcome unbiasedness(const std::vector<NamedProblem>& problems) {
    Outcome o;
    const auto it = std::find_if(problems.begin(), problems.end(), [](const NamedProblem& np) { return np.name == "singular_0"; });
    const EvalProblem& p = it->problem;
    const int q = p.dim();
    const double c = 1.0;
    const Sampler sampler(p);
    Rng state_rng(77);
    Rng rng(78);
    double worst_z = 0.0;
    int comps = 0;
    for (int k = 0; k < 3; ++k) {
        LearnerState at = LearnerState::from_theta(Vector::Zero(q));
        for (int i = 0; i < q; ++i) {
            at.theta(i) = state_rng.normal();
            at.w(i) = state_rng.normal();
            at.lambda(i) = state_rng.normal();
        }
        const Vector exact = expected_increment(p, at, Algorithm::rgtd, c);
        const long n = 1000000;
        Vector sum = Vector::Zero(3 * q), sumsq = Vector::Zero(3 * q), inc(3 * q);
        for (long s = 0; s < n; ++s) {
            LearnerState next = at;
            rgtd_step(next, sampler.sample(rng), p.gamma(), 1.0, c);
            inc << next.theta - at.theta, next.w - at.w, next.lambda - at.lambda;
            sum += inc;
            sumsq += inc.cwiseProduct(inc);
        }
        const Vector mean = sum / double(n);
        const Vector var = (sumsq / double(n) - mean.cwiseProduct(mean)) * (double(n) / double(n - 1));
        for (int i = 0; i < 3 * q; ++i) {
            const double se = std::sqrt(var(i) / double(n));
            const double z = se > 0 ? std::abs(mean(i) - exact(i)) / se : (mean(i) == exact(i) ? 0.0 : INFINITY);
            worst_z = std::max(worst_z, z);
            ++comps;
            o.require(z <= kSigmaBound, "state " + std::to_string(k) + " component " + std::to_string(i) + " z=" + num(z));
        }
    }
    o.note(std::to_string(comps) + " components, largest |mean - exact| / SE = " + num(worst_z) + " (bound " +
           num(kSigmaBound) + ")");
    return o;
}

}  // namespace

int main() {
    using Clock = std::chrono::steady_clock;
    std::printf("building bundled problems...\n");
    const std::vector<NamedProblem> problems = bundled_problems();

    struct Criterion {
        int id;
        const char* name;
        double limit_s;
        std::function<Outcome()> fn;
    };
    const std::vector<Criterion> criteria{
        {1, "closed-form consistency", 5, closed_form_consistency},
        {2, "regularized inverse identity", 2, regularized_inverse_identity},
        {3, "expansion slopes", 10, [&] { return expansion_slopes(problems); }},
        {4, "prediction-error bound", 5, [&] { return prediction_bounds(problems); }},
        {5, "toy fidelity", 1, toy_fidelity},
        {6, "stochastic convergence", 120, [&] { return stochastic_convergence(problems); }},
        {7, "null-space contrast", 120, [&] { return null_space_contrast(problems); }},
        {8, "Baird", 120, baird_check},
        {9, "dynamics certificates", 30, [&] { return dynamics_certificates(problems); }},
        {10, "unbiased increments", 60, [&] { return unbiasedness(problems); }},
    };

    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = c.fn();
        } catch (const std::exception& e) {
            o.require(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
        o.require(secs < c.limit_s, "runtime");
        failed += o.pass ? 0 : 1;
        std::printf("%s criterion %d (%s) [%.2fs / %.0fs]: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs,
                    c.limit_s, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
