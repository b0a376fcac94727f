#pragma once

// Experiment runner: configs, parallel seeded runs, CSV and JSON outputs.
//
// trajectories.csv  experiment,algorithm,c,seed,iter,error,diverged
// statistics.csv    experiment,algorithm,c,iter,median,q1,q3,lo_whisker,hi_whisker,n_outliers
// toy_trajectory.csv c,phi_theta_1,phi_theta_2,phi_theta_3,below_c0
// ode_trace.csv     problem,c,t,dist_to_equilibrium
//
// Numbers are printed with %.17g. The c column is empty for algorithms
// without a regularization parameter. Rows are ordered by algorithm (config
// order), c, seed, iter.

#include "rgtd/closed_form.hpp"
#include "rgtd/dynamics.hpp"
#include "rgtd/environments.hpp"
#include "rgtd/error.hpp"
#include "rgtd/io.hpp"
#include "rgtd/learners.hpp"
#include "rgtd/stats.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace rgtd::harness {

using io::Json;

inline std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------- threads

/// Worker count: requested if > 0, else hardware concurrency; then capped by
/// RGTD_THREADS when that is set to a positive integer.
inline unsigned worker_count(unsigned requested = 0) {
    unsigned n = requested > 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("RGTD_THREADS")) {
        char* end = nullptr;
        const long cap = std::strtol(env, &end, 10);
        if (end != env && cap > 0) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
    }
    return std::max(1u, n);
}

/// Runs job(i) for i in [0, n) on a bounded pool. The first exception thrown
/// by any job is rethrown after all workers stop.
inline void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& job) {
    threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), std::max<std::size_t>(n, 1)));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                job(i);
            } catch (...) {
                std::lock_guard lock(failure_mu);
                if (!failure) failure = std::current_exception();
                next.store(n);
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------- config

enum class ExperimentKind { toy_trajectory, singular_main, nonsingular_random, baird, ode_check, expansion_sweep };

inline ExperimentKind parse_kind(const std::string& s) {
    if (s == "toy_trajectory") return ExperimentKind::toy_trajectory;
    if (s == "singular_main") return ExperimentKind::singular_main;
    if (s == "nonsingular_random") return ExperimentKind::nonsingular_random;
    if (s == "baird") return ExperimentKind::baird;
    if (s == "ode_check") return ExperimentKind::ode_check;
    if (s == "expansion_sweep") return ExperimentKind::expansion_sweep;
    throw UsageError("config.kind: unknown experiment kind '" + s + "'");
}

inline std::string to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::toy_trajectory: return "toy_trajectory";
        case ExperimentKind::singular_main: return "singular_main";
        case ExperimentKind::nonsingular_random: return "nonsingular_random";
        case ExperimentKind::baird: return "baird";
        case ExperimentKind::ode_check: return "ode_check";
        case ExperimentKind::expansion_sweep: return "expansion_sweep";
    }
    return "?";
}

/// How theta_0 is chosen for learner experiments.
enum class Theta0Mode { zero, null_direction, baird, explicit_vector };

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::singular_main;
    std::string name;
    std::vector<Algorithm> algorithms;
    std::vector<double> c_values;
    std::int64_t iters = 200000;
    int n_runs = 30;
    std::uint64_t seed = 0;
    StepSchedule schedule = StepSchedule::paper_default();
    std::int64_t stride = 100;
    std::filesystem::path out = "results";
    unsigned threads = 0;

    GeneratorConfig generator;
    int n_problems = 1;
    Theta0Mode theta0_mode = Theta0Mode::zero;
    Vector theta0;
    std::optional<std::filesystem::path> problem_file;

    double dt = 0.01;
    long steps = 10000;
    Integrator integrator = Integrator::rk4;
    std::vector<double> c_grid = {1e2, 1e3, 1e4};

    /// Defaults for each kind, before any config fields are applied.
    static ExperimentConfig defaults(ExperimentKind kind) {
        ExperimentConfig c;
        c.kind = kind;
        c.name = to_string(kind);
        c.out = std::filesystem::path("results") / c.name;
        switch (kind) {
            case ExperimentKind::singular_main:
                c.algorithms = {Algorithm::rgtd, Algorithm::gtd2};
                c.c_values = {0.2, 0.4, 1.0};
                c.generator.n_states = 100;
                c.generator.n_actions = 10;
                c.generator.gamma = 0.99;
                c.generator.n_features = 10;
                c.generator.dist_mode = DistMode::random;
                c.generator.transition_support = 1;
                c.theta0_mode = Theta0Mode::null_direction;
                break;
            case ExperimentKind::nonsingular_random:
                c.algorithms = {Algorithm::rgtd, Algorithm::gtd2};
                c.c_values = {0.2, 0.4, 1.0};
                c.generator.n_states = 100;
                c.generator.n_actions = 10;
                c.generator.gamma = 0.9;
                c.generator.n_features = 10;
                c.n_problems = 3;
                break;
            case ExperimentKind::baird:
                c.algorithms = {Algorithm::rgtd, Algorithm::gtd2, Algorithm::td0};
                c.c_values = {1.0};
                c.theta0_mode = Theta0Mode::baird;
                break;
            case ExperimentKind::ode_check: c.c_values = {0.2, 0.4, 1.0}; break;
            case ExperimentKind::toy_trajectory:
            case ExperimentKind::expansion_sweep: break;
        }
        return c;
    }

    void validate() const {
        if (n_runs < 1) throw UsageError("config.n_runs: must be >= 1");
        if (iters < 0) throw UsageError("config.iters: must be >= 0");
        if (stride < 1) throw UsageError("config.stride: must be >= 1");
        for (double c : c_values)
            if (!(c > 0.0)) throw UsageError("config.c: entries must be > 0");
        if (is_learner() && algorithms.empty()) throw UsageError("config.algorithms: at least one algorithm required");
        if (n_problems < 1) throw UsageError("config.n_problems: must be >= 1");
        if (!(dt > 0.0)) throw UsageError("config.dt: must be > 0");
        if (steps < 1) throw UsageError("config.steps: must be >= 1");
        if (kind == ExperimentKind::expansion_sweep && c_grid.size() < 3)
            throw UsageError("config.c_grid: at least 3 values required");
    }

    bool is_learner() const {
        return kind == ExperimentKind::singular_main || kind == ExperimentKind::nonsingular_random ||
               kind == ExperimentKind::baird;
    }
};

namespace detail {

template <typename T>
T get_field(const Json& j, const char* name) {
    try {
        return j.at(name).get<T>();
    } catch (const Json::exception&) {
        throw UsageError(std::string("config.") + name + ": missing or wrong type");
    }
}

inline std::vector<double> get_doubles(const Json& j, const char* name) {
    const Json& v = j.at(name);
    if (v.is_number()) return {v.get<double>()};
    return get_field<std::vector<double>>(j, name);
}

inline StepSchedule parse_schedule(const Json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "paper_default") return StepSchedule::paper_default();
        throw UsageError("config.schedule: unknown schedule '" + j.get<std::string>() + "'");
    }
    const auto kind = get_field<std::string>(j, "kind");
    if (kind == "paper_default") return StepSchedule::paper_default();
    if (kind == "constant") return StepSchedule::constant(get_field<double>(j, "alpha"));
    if (kind == "custom") return StepSchedule::custom(get_field<double>(j, "scale"), get_field<double>(j, "offset"));
    throw UsageError("config.schedule.kind: unknown schedule '" + kind + "'");
}

inline Json schedule_to_json(const StepSchedule& s) {
    switch (s.kind()) {
        case StepSchedule::Kind::paper_default: return {{"kind", "paper_default"}};
        case StepSchedule::Kind::constant: return {{"kind", "constant"}, {"alpha", s.scale()}};
        case StepSchedule::Kind::custom: return {{"kind", "custom"}, {"scale", s.scale()}, {"offset", s.offset()}};
    }
    return {};
}

inline void apply_generator(const Json& j, GeneratorConfig& g) {
    if (j.contains("n_states")) g.n_states = get_field<int>(j, "n_states");
    if (j.contains("n_actions")) g.n_actions = get_field<int>(j, "n_actions");
    if (j.contains("gamma")) g.gamma = get_field<double>(j, "gamma");
    if (j.contains("n_features")) g.n_features = get_field<int>(j, "n_features");
    if (j.contains("reward_sparsify_threshold"))
        g.reward_sparsify_threshold = get_field<double>(j, "reward_sparsify_threshold");
    if (j.contains("seed")) g.seed = get_field<std::uint64_t>(j, "seed");
    if (j.contains("dist_mode")) g.dist_mode = parse_dist_mode(get_field<std::string>(j, "dist_mode"));
    if (j.contains("transition_support")) g.transition_support = get_field<int>(j, "transition_support");
}

}  // namespace detail

inline ExperimentConfig config_from_json(const Json& j) {
    using detail::get_field;
    if (!j.is_object()) throw UsageError("config: expected a JSON object");
    ExperimentConfig c = ExperimentConfig::defaults(parse_kind(get_field<std::string>(j, "kind")));
    if (j.contains("name")) {
        c.name = get_field<std::string>(j, "name");
        c.out = std::filesystem::path("results") / c.name;
    }
    if (j.contains("algorithms")) {
        c.algorithms.clear();
        for (const auto& a : get_field<std::vector<std::string>>(j, "algorithms")) c.algorithms.push_back(parse_algorithm(a));
    }
    if (j.contains("c")) c.c_values = detail::get_doubles(j, "c");
    if (j.contains("iters")) c.iters = get_field<std::int64_t>(j, "iters");
    if (j.contains("n_runs")) c.n_runs = get_field<int>(j, "n_runs");
    if (j.contains("seed")) c.seed = get_field<std::uint64_t>(j, "seed");
    if (j.contains("schedule")) c.schedule = detail::parse_schedule(j.at("schedule"));
    if (j.contains("stride")) c.stride = get_field<std::int64_t>(j, "stride");
    if (j.contains("out")) c.out = get_field<std::string>(j, "out");
    if (j.contains("threads")) c.threads = get_field<unsigned>(j, "threads");
    if (j.contains("generator")) detail::apply_generator(j.at("generator"), c.generator);
    if (j.contains("n_problems")) c.n_problems = get_field<int>(j, "n_problems");
    if (j.contains("theta0")) {
        const Json& t = j.at("theta0");
        if (t.is_string()) {
            const auto s = t.get<std::string>();
            if (s == "zero") c.theta0_mode = Theta0Mode::zero;
            else if (s == "null_direction") c.theta0_mode = Theta0Mode::null_direction;
            else if (s == "baird") c.theta0_mode = Theta0Mode::baird;
            else throw UsageError("config.theta0: unknown mode '" + s + "'");
        } else {
            const auto v = get_field<std::vector<double>>(j, "theta0");
            c.theta0 = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
            c.theta0_mode = Theta0Mode::explicit_vector;
        }
    }
    if (j.contains("problem_file")) c.problem_file = get_field<std::string>(j, "problem_file");
    if (j.contains("dt")) c.dt = get_field<double>(j, "dt");
    if (j.contains("steps")) c.steps = get_field<long>(j, "steps");
    if (j.contains("integrator")) {
        const auto s = get_field<std::string>(j, "integrator");
        if (s == "rk4") c.integrator = Integrator::rk4;
        else if (s == "euler") c.integrator = Integrator::euler;
        else throw UsageError("config.integrator: expected rk4 or euler");
    }
    if (j.contains("c_grid")) c.c_grid = detail::get_doubles(j, "c_grid");
    c.validate();
    return c;
}

inline ExperimentConfig read_config(const std::filesystem::path& path) {
    const Json j = io::parse_json_text(io::read_text(path), path.string());
    return config_from_json(j);
}

// ---------------------------------------------------------------- learner runs

struct Variant {
    Algorithm algorithm;
    double c;  // 0 for algorithms without c
};

inline std::string algorithm_label(Algorithm a) { return to_string(a); }

/// One (algorithm, c) pair per R-GTD value of c, one for each other algorithm.
inline std::vector<Variant> expand_variants(const std::vector<Algorithm>& algs, const std::vector<double>& cs) {
    std::vector<Variant> out;
    for (Algorithm a : algs) {
        if (a == Algorithm::rgtd) {
            std::vector<double> sorted = cs;
            std::sort(sorted.begin(), sorted.end());
            for (double c : sorted) out.push_back({a, c});
        } else {
            out.push_back({a, 0.0});
        }
    }
    return out;
}

struct VariantRuns {
    std::string experiment;
    Variant variant;
    std::vector<Trajectory> runs;  // ordered by seed
};

/// n_runs seeded runs (seed_i = seed_base + i) of every variant on one problem.
inline std::vector<VariantRuns> run_variants(const std::string& experiment, const EvalProblem& problem,
                                             const std::vector<Variant>& variants, int n_runs,
                                             std::uint64_t seed_base, std::int64_t iters, std::int64_t stride,
                                             const StepSchedule& schedule, const Vector& theta0,
                                             const Vector& theta_ref, unsigned threads = 0) {
    const Sampler sampler(problem);
    std::vector<VariantRuns> out;
    for (const auto& v : variants) out.push_back({experiment, v, std::vector<Trajectory>(static_cast<std::size_t>(n_runs))});
    const std::size_t total = variants.size() * static_cast<std::size_t>(n_runs);
    parallel_for(total, worker_count(threads), [&](std::size_t job) {
        const std::size_t vi = job / static_cast<std::size_t>(n_runs), ri = job % static_cast<std::size_t>(n_runs);
        RunConfig rc;
        rc.algorithm = variants[vi].algorithm;
        rc.c = variants[vi].algorithm == Algorithm::rgtd ? variants[vi].c : 1.0;
        rc.schedule = schedule;
        rc.iters = iters;
        rc.stride = stride;
        rc.seed = seed_base + ri;
        out[vi].runs[ri] = run(problem, sampler, rc, theta0, theta_ref);
    });
    return out;
}

inline std::vector<stats::RunStatistics> variant_statistics(const VariantRuns& vr) {
    std::vector<std::vector<double>> series;
    series.reserve(vr.runs.size());
    for (const auto& t : vr.runs) series.push_back(t.errors);
    return stats::across_runs(series, vr.runs.front().iters);
}

inline std::string c_field(const Variant& v) { return v.algorithm == Algorithm::rgtd ? fmt(v.c) : std::string(); }

inline std::string trajectories_csv(const std::vector<VariantRuns>& all) {
    std::ostringstream os;
    os << "experiment,algorithm,c,seed,iter,error,diverged\n";
    for (const auto& vr : all)
        for (const auto& t : vr.runs)
            for (std::size_t i = 0; i < t.iters.size(); ++i) {
                const bool div = t.diverged && t.iters[i] >= t.diverged_at;
                os << vr.experiment << ',' << algorithm_label(vr.variant.algorithm) << ',' << c_field(vr.variant) << ','
                   << t.seed << ',' << t.iters[i] << ',' << fmt(t.errors[i]) << ',' << (div ? 1 : 0) << '\n';
            }
    return os.str();
}

inline std::string statistics_csv(const std::vector<VariantRuns>& all) {
    std::ostringstream os;
    os << "experiment,algorithm,c,iter,median,q1,q3,lo_whisker,hi_whisker,n_outliers\n";
    for (const auto& vr : all)
        for (const auto& s : variant_statistics(vr))
            os << vr.experiment << ',' << algorithm_label(vr.variant.algorithm) << ',' << c_field(vr.variant) << ','
               << s.iter << ',' << fmt(s.box.median) << ',' << fmt(s.box.q1) << ',' << fmt(s.box.q3) << ','
               << fmt(s.box.lo_whisker) << ',' << fmt(s.box.hi_whisker) << ',' << s.box.outliers.size() << '\n';
    return os.str();
}

// ---------------------------------------------------------------- toy path

struct ToyRow {
    double c;
    Vector phi_theta;
    bool below_c0;
};

/// Phi theta_RGTD(c) on the toy over n log-spaced c in [lo, hi], then the
/// limit point Phi (theta_GTD2 - Pi_N theta_GTD2) with c = inf.
inline std::vector<ToyRow> toy_trajectory(int n = 100, double lo = 1e-1, double hi = 1e4) {
    const EvalProblem toy = toy_3state();
    const CoreMatrices cm = assemble(toy);
    const AffineSolutionSet set = gtd2_solutions(cm);
    const double c0 = expansion_threshold(cm, set);
    std::vector<ToyRow> rows;
    for (int i = 0; i < n; ++i) {
        const double e = std::log10(lo) + (std::log10(hi) - std::log10(lo)) * i / (n - 1);
        const double c = i == n - 1 ? hi : std::pow(10.0, e);
        rows.push_back({c, cm.phi * rgtd_solution(cm, c), !(c > c0)});
    }
    const Vector limit = set.particular - set.null_basis * (set.null_basis.transpose() * set.particular);
    rows.push_back({std::numeric_limits<double>::infinity(), cm.phi * limit, false});
    return rows;
}

inline std::string toy_csv(const std::vector<ToyRow>& rows) {
    std::ostringstream os;
    os << "c,phi_theta_1,phi_theta_2,phi_theta_3,below_c0\n";
    for (const auto& r : rows)
        os << fmt(r.c) << ',' << fmt(r.phi_theta(0)) << ',' << fmt(r.phi_theta(1)) << ',' << fmt(r.phi_theta(2)) << ','
           << (r.below_c0 ? 1 : 0) << '\n';
    return os.str();
}

// ---------------------------------------------------------------- reports

inline Json vec_json(const Vector& v) { return io::detail::vector_to_json(v); }

inline Json expansion_json(const ExpansionReport& ex, const BoundReport& br) {
    Json rows = Json::array();
    for (std::size_t i = 0; i < ex.rows.size(); ++i) {
        Json r{{"c", ex.rows[i].c}, {"residual", ex.rows[i].residual}};
        auto it = std::find_if(br.rows.begin(), br.rows.end(), [&](const BoundRow& b) { return b.c == ex.rows[i].c; });
        if (it != br.rows.end()) {
            r["bound_lhs"] = it->bound_lhs;
            r["bound_rhs"] = it->bound_rhs;
            r["bound_holds"] = it->holds;
        }
        rows.push_back(std::move(r));
    }
    Json j{{"singular", ex.singular}, {"c0", ex.c0}, {"rows", rows},
           {"first_order_constant", br.constant}, {"first_order_constant_empirical", br.constant_is_empirical}};
    if (!ex.singular) j["gamma"] = ex.gamma_const;
    if (ex.slope) j["slope"] = {{"slope", ex.slope->slope}, {"intercept", ex.slope->intercept}, {"r_squared", ex.slope->r_squared}};
    else j["slope"] = nullptr;
    return j;
}

/// Closed-form summary of one problem at one c.
inline Json solve_report(const EvalProblem& problem, double c) {
    const CoreMatrices cm = assemble(problem);
    const AffineSolutionSet set = gtd2_solutions(cm);
    const SaddleSolution sp = saddle_point(cm, c);
    const Vector theta_r = rgtd_solution(cm, c);
    const auto res = kkt_residuals(cm, sp);
    const double c0 = expansion_threshold(cm, set);

    Json j;
    j["n_states"] = problem.n_states();
    j["n_features"] = problem.dim();
    j["c"] = c;
    j["fim_singular_values"] = vec_json(linalg::singular_values(cm.m));
    j["fim_singular_ratio"] = linalg::singular_ratio(cm.m);
    j["fim_singular"] = !set.singleton();
    j["gtd2_null_dimension"] = set.null_basis.cols();
    j["theta_gtd2"] = vec_json(set.particular);
    Json basis = Json::array();
    for (Eigen::Index k = 0; k < set.null_basis.cols(); ++k) basis.push_back(vec_json(set.null_basis.col(k)));
    j["gtd2_null_basis"] = basis;
    j["theta_rgtd"] = vec_json(theta_r);
    j["w_rgtd"] = vec_json(sp.w);
    j["lambda_rgtd"] = vec_json(sp.lambda);
    j["theta_star"] = vec_json(problem.theta_star());
    j["kkt_residuals"] = {res[0], res[1], res[2]};
    j["rgtd_minus_gtd2_norm"] = (theta_r - rgtd_limit(cm, set)).norm();
    j["mspbe_rgtd"] = mspbe(cm, theta_r);
    j["c0"] = c0;
    if (cm.k) {
        j["k"] = vec_json(*cm.k);
        j["gamma"] = second_order_constant(cm);
    } else {
        j["k"] = nullptr;
    }
    if (c > c0) {
        const BoundReport br = prediction_bound_check(cm, problem.theta_star(), {c, 10 * c, 100 * c});
        const BoundRow& row = br.rows.front();
        j["bound"] = {{"c", row.c}, {"lhs", row.bound_lhs}, {"rhs", row.bound_rhs}, {"holds", row.holds},
                      {"constant", br.constant}, {"constant_empirical", br.constant_is_empirical}};
    } else {
        j["bound"] = {{"c", c}, {"skipped", "c is not above c0"}};
    }
    return j;
}

// ---------------------------------------------------------------- drivers

struct ExperimentOutput {
    std::vector<std::filesystem::path> files;
    Json summary;
};

inline Vector choose_theta0(const ExperimentConfig& cfg, const EvalProblem& p) {
    switch (cfg.theta0_mode) {
        case Theta0Mode::zero: return Vector::Zero(p.dim());
        case Theta0Mode::null_direction: return fim_null_direction(p);
        case Theta0Mode::baird: return baird_theta0();
        case Theta0Mode::explicit_vector:
            if (cfg.theta0.size() != p.dim()) throw UsageError("config.theta0: length must equal the feature dimension");
            return cfg.theta0;
    }
    return Vector::Zero(p.dim());
}

inline Json variant_summary(const std::vector<VariantRuns>& all) {
    Json out = Json::array();
    for (const auto& vr : all) {
        const auto st = variant_statistics(vr);
        int diverged = 0;
        for (const auto& t : vr.runs) diverged += t.diverged ? 1 : 0;
        Json v{{"experiment", vr.experiment}, {"algorithm", algorithm_label(vr.variant.algorithm)},
               {"initial_median", st.front().box.median}, {"final_median", st.back().box.median},
               {"final_iqr", st.back().box.iqr()}, {"diverged_runs", diverged}};
        if (vr.variant.algorithm == Algorithm::rgtd) v["c"] = vr.variant.c;
        out.push_back(std::move(v));
    }
    return out;
}

inline ExperimentOutput run_learner_experiment(const ExperimentConfig& cfg) {
    std::vector<std::pair<std::string, EvalProblem>> problems;
    if (cfg.problem_file) {
        problems.emplace_back(cfg.name, io::read_problem(*cfg.problem_file));
    } else if (cfg.kind == ExperimentKind::baird) {
        problems.emplace_back(cfg.name, baird());
    } else if (cfg.kind == ExperimentKind::singular_main) {
        problems.emplace_back(cfg.name, singular_problem(cfg.generator).problem);
    } else {
        for (int k = 0; k < cfg.n_problems; ++k) {
            GeneratorConfig g = cfg.generator;
            g.seed += static_cast<std::uint64_t>(k);
            problems.emplace_back(cfg.n_problems == 1 ? cfg.name : cfg.name + "_p" + std::to_string(k), random_mdp(g));
        }
    }
    const auto variants = expand_variants(cfg.algorithms, cfg.c_values);
    std::vector<VariantRuns> all;
    for (const auto& [label, p] : problems) {
        auto runs = run_variants(label, p, variants, cfg.n_runs, cfg.seed, cfg.iters, cfg.stride, cfg.schedule,
                                 choose_theta0(cfg, p), p.theta_star(), cfg.threads);
        for (auto& r : runs) all.push_back(std::move(r));
    }
    ExperimentOutput out;
    out.files = {cfg.out / "trajectories.csv", cfg.out / "statistics.csv"};
    io::write_text_atomic(out.files[0], trajectories_csv(all));
    io::write_text_atomic(out.files[1], statistics_csv(all));
    out.summary = {{"experiment", cfg.name}, {"variants", variant_summary(all)}};
    return out;
}

inline ExperimentOutput run_ode_experiment(const ExperimentConfig& cfg) {
    std::vector<NamedProblem> problems;
    if (cfg.problem_file) problems.push_back({cfg.name, io::read_problem(*cfg.problem_file), false});
    else problems = bundled_problems();

    std::ostringstream trace;
    trace << "problem,c,t,dist_to_equilibrium\n";
    Json certs = Json::array();
    for (const auto& np : problems) {
        const CoreMatrices cm = assemble(np.problem);
        for (double c : cfg.c_values) {
            const PdgdSystem sys = make_system(cm, c);
            const auto rank = rank_certificate(sys);
            const auto spec = spectrum_certificate(sys);
            const IntegrationResult res =
                integrate(sys, Vector::Zero(3 * sys.dim()), cfg.dt, cfg.steps, cfg.integrator);
            for (std::size_t i = 0; i < res.t.size(); ++i)
                trace << np.name << ',' << fmt(c) << ',' << fmt(res.t[i]) << ',' << fmt(res.dist[i]) << '\n';
            Json cert{{"problem", np.name}, {"c", c}, {"full_row_rank", rank.full_row_rank},
                      {"smallest_singular_value", rank.smallest_singular_value}, {"hurwitz", spec.hurwitz},
                      {"spectral_abscissa", spec.abscissa}, {"dt", res.dt},
                      {"shrink_factor", res.dist.front() > 0 ? res.dist.back() / res.dist.front() : 0.0}};
            certs.push_back(std::move(cert));
        }
    }
    ExperimentOutput out;
    out.files = {cfg.out / "ode_trace.csv", cfg.out / "certificates.json"};
    io::write_text_atomic(out.files[0], trace.str());
    io::write_text_atomic(out.files[1], certs.dump(1) + "\n");
    out.summary = {{"experiment", cfg.name}, {"certificates", certs}};
    return out;
}

inline ExperimentOutput run_expansion_sweep(const ExperimentConfig& cfg) {
    std::vector<NamedProblem> problems;
    if (cfg.problem_file) problems.push_back({cfg.name, io::read_problem(*cfg.problem_file), false});
    else problems = bundled_problems();

    std::vector<double> grid = cfg.c_grid;
    std::sort(grid.begin(), grid.end());
    Json reports = Json::array();
    std::ostringstream csv;
    csv << "problem,c,residual,bound_lhs,bound_rhs\n";
    for (const auto& np : problems) {
        const CoreMatrices cm = assemble(np.problem);
        const AffineSolutionSet set = gtd2_solutions(cm);
        const ExpansionReport ex = expansion_check(cm, set, grid);
        const BoundReport br = prediction_bound_check(cm, np.problem.theta_star(), grid);
        Json r = expansion_json(ex, br);
        r["problem"] = np.name;
        for (std::size_t i = 0; i < ex.rows.size(); ++i)
            csv << np.name << ',' << fmt(ex.rows[i].c) << ',' << fmt(ex.rows[i].residual) << ','
                << fmt(br.rows[i].bound_lhs) << ',' << fmt(br.rows[i].bound_rhs) << '\n';
        reports.push_back(std::move(r));
    }
    ExperimentOutput out;
    out.files = {cfg.out / "expansion.csv", cfg.out / "expansion.json"};
    io::write_text_atomic(out.files[0], csv.str());
    io::write_text_atomic(out.files[1], reports.dump(1) + "\n");
    out.summary = {{"experiment", cfg.name}, {"reports", reports}};
    return out;
}

inline ExperimentOutput run_toy_experiment(const ExperimentConfig& cfg) {
    ExperimentOutput out;
    out.files = {cfg.out / "toy_trajectory.csv"};
    io::write_text_atomic(out.files[0], toy_csv(toy_trajectory()));
    out.summary = {{"experiment", cfg.name}};
    return out;
}

inline ExperimentOutput run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    switch (cfg.kind) {
        case ExperimentKind::singular_main:
        case ExperimentKind::nonsingular_random:
        case ExperimentKind::baird: return run_learner_experiment(cfg);
        case ExperimentKind::ode_check: return run_ode_experiment(cfg);
        case ExperimentKind::expansion_sweep: return run_expansion_sweep(cfg);
        case ExperimentKind::toy_trajectory: return run_toy_experiment(cfg);
    }
    throw UsageError("unknown experiment kind");
}

}  // namespace rgtd::harness
