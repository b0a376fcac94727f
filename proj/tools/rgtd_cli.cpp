// rgtd: command-line front end for the R-GTD evaluation lab.
//
//   rgtd gen <toy|baird|random|singular> --out FILE [generator flags]
//   rgtd solve FILE --c C
//   rgtd run CONFIG [--iters N] [--seed S] [--out DIR] [--threads T]
//   rgtd sweep [CONFIG] [--problem FILE] [--c-grid ...] [--out DIR]
//   rgtd ode [CONFIG] [--problem FILE] [--dt DT] [--steps N] [--out DIR]
//   rgtd toy [--out DIR]
//
// Exit codes: 0 success, 1 usage, 2 data/parse, 3 numerical failure.

#include "rgtd/rgtd.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace rgtd;

struct GenOptions {
    std::string env;
    std::string out;
    GeneratorConfig gen;
    std::string dist_mode = "uniform";
};

struct RunOptions {
    std::string config;
    std::optional<std::int64_t> iters;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<unsigned> threads;
    std::optional<std::string> problem;
    std::vector<double> c_grid;
    std::optional<double> dt;
    std::optional<long> steps;
    std::optional<std::string> integrator;
};

void apply_overrides(harness::ExperimentConfig& cfg, const RunOptions& o) {
    if (o.iters) cfg.iters = *o.iters;
    if (o.seed) cfg.seed = *o.seed;
    if (o.out) cfg.out = *o.out;
    if (o.threads) cfg.threads = *o.threads;
    if (o.problem) cfg.problem_file = *o.problem;
    if (!o.c_grid.empty()) cfg.c_grid = o.c_grid;
    if (o.dt) cfg.dt = *o.dt;
    if (o.steps) cfg.steps = *o.steps;
    if (o.integrator) {
        if (*o.integrator == "rk4") cfg.integrator = Integrator::rk4;
        else if (*o.integrator == "euler") cfg.integrator = Integrator::euler;
        else throw UsageError("--integrator: expected rk4 or euler");
    }
    cfg.validate();
}

harness::ExperimentConfig load_or_default(const std::string& path, harness::ExperimentKind kind) {
    if (path.empty()) return harness::ExperimentConfig::defaults(kind);
    auto cfg = harness::read_config(path);
    if (cfg.kind != kind)
        throw UsageError("config kind '" + harness::to_string(cfg.kind) + "' does not match this subcommand");
    return cfg;
}

void print_outputs(const harness::ExperimentOutput& out) {
    for (const auto& f : out.files) std::cerr << "wrote " << f.string() << '\n';
    std::cout << out.summary.dump(2) << '\n';
}

int cmd_gen(const GenOptions& o) {
    GeneratorConfig g = o.gen;
    g.dist_mode = parse_dist_mode(o.dist_mode);
    std::optional<EvalProblem> p;
    if (o.env == "toy") p = toy_3state();
    else if (o.env == "baird") p = baird();
    else if (o.env == "random") p = random_mdp(g);
    else if (o.env == "singular") {
        auto sp = singular_problem(g);
        std::cerr << "singular problem from generator seed " << sp.seed << '\n';
        p = std::move(sp.problem);
    } else
        throw UsageError("gen: unknown environment '" + o.env + "' (toy, baird, random, singular)");
    io::write_problem(o.out, *p);
    std::cerr << "wrote " << o.out << '\n';
    return 0;
}

int dispatch(int argc, char** argv) {
    CLI::App app{"R-GTD off-policy evaluation lab"};
    app.require_subcommand(1);

    GenOptions gen;
    auto* g = app.add_subcommand("gen", "Write an environment to a problem file");
    g->add_option("env", gen.env, "toy | baird | random | singular")->required();
    g->add_option("--out", gen.out, "Output problem file")->required();
    g->add_option("--seed", gen.gen.seed, "Generator seed");
    g->add_option("--n-states", gen.gen.n_states);
    g->add_option("--n-actions", gen.gen.n_actions);
    g->add_option("--gamma", gen.gen.gamma);
    g->add_option("--n-features", gen.gen.n_features);
    g->add_option("--threshold", gen.gen.reward_sparsify_threshold, "Reward sparsification threshold");
    g->add_option("--dist-mode", gen.dist_mode, "uniform | stationary | random");
    g->add_option("--support", gen.gen.transition_support, "Next states per (s,a); 0 = all");

    std::string solve_file;
    double solve_c = 1.0;
    auto* s = app.add_subcommand("solve", "Print the closed-form report for a problem file");
    s->add_option("problem", solve_file)->required();
    s->add_option("--c", solve_c, "Regularization coefficient");

    RunOptions run_o;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--out", run_o.out, "Output directory");
        sub->add_option("--threads", run_o.threads, "Worker threads (RGTD_THREADS caps this)");
    };
    auto* r = app.add_subcommand("run", "Run an experiment config");
    r->add_option("config", run_o.config)->required();
    r->add_option("--iters", run_o.iters);
    r->add_option("--seed", run_o.seed, "Seed base");
    add_common(r);

    auto* sw = app.add_subcommand("sweep", "Expansion residuals and prediction-error bounds over a c grid");
    sw->add_option("config", run_o.config);
    sw->add_option("--problem", run_o.problem, "Problem file (default: bundled problems)");
    sw->add_option("--c-grid", run_o.c_grid)->expected(3, -1);
    add_common(sw);

    auto* od = app.add_subcommand("ode", "Integrate the primal-dual flow and print certificates");
    od->add_option("config", run_o.config);
    od->add_option("--problem", run_o.problem, "Problem file (default: bundled problems)");
    od->add_option("--dt", run_o.dt);
    od->add_option("--steps", run_o.steps);
    od->add_option("--integrator", run_o.integrator, "rk4 | euler");
    add_common(od);

    auto* toy = app.add_subcommand("toy", "Closed-form R-GTD path of the 3-state toy over c");
    toy->add_option("--out", run_o.out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    if (*g) return cmd_gen(gen);
    if (*s) {
        std::cout << harness::solve_report(io::read_problem(solve_file), solve_c).dump(2) << '\n';
        return 0;
    }
    harness::ExperimentConfig cfg;
    if (*r) cfg = harness::read_config(run_o.config);
    else if (*sw) cfg = load_or_default(run_o.config, harness::ExperimentKind::expansion_sweep);
    else if (*od) cfg = load_or_default(run_o.config, harness::ExperimentKind::ode_check);
    else cfg = harness::ExperimentConfig::defaults(harness::ExperimentKind::toy_trajectory);
    apply_overrides(cfg, run_o);
    print_outputs(harness::run_experiment(cfg));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const rgtd::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
