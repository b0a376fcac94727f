#include "rgtd/harness.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

using namespace rgtd;
using namespace rgtd::harness;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream is(text);
    for (std::string l; std::getline(is, l);) out.push_back(l);
    return out;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::vector<VariantRuns> toy_runs(unsigned threads) {
    const EvalProblem toy = toy_3state();
    const auto variants = expand_variants({Algorithm::rgtd, Algorithm::gtd2}, {1.0, 0.2});
    return run_variants("toy", toy, variants, 3, 10, 300, 100, StepSchedule::paper_default(), Vector::Zero(2),
                        toy.theta_star(), threads);
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("rgtd_harness_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST(Variants, RgtdExpandsPerCInAscendingOrder) {
    const auto v = expand_variants({Algorithm::gtd2, Algorithm::rgtd, Algorithm::td0}, {1.0, 0.2, 0.4});
    ASSERT_EQ(v.size(), 5u);
    EXPECT_EQ(v[0].algorithm, Algorithm::gtd2);
    EXPECT_EQ(v[1].c, 0.2);
    EXPECT_EQ(v[3].c, 1.0);
    EXPECT_EQ(v[4].algorithm, Algorithm::td0);
}

TEST(TrajectoriesCsv, SchemaAndRowCount) {
    const auto all = toy_runs(1);
    const auto ls = lines(trajectories_csv(all));
    ASSERT_FALSE(ls.empty());
    EXPECT_EQ(ls[0], "experiment,algorithm,c,seed,iter,error,diverged");
    EXPECT_EQ(ls.size(), 1u + 3 * 3 * 4);
    const auto first = split(ls[1]);
    ASSERT_EQ(first.size(), 7u);
    EXPECT_EQ(first[0], "toy");
    EXPECT_EQ(first[1], "rgtd");
    EXPECT_EQ(first[2], "0.20000000000000001");
    EXPECT_EQ(first[3], "10");
    EXPECT_EQ(first[4], "0");
    const auto last = split(ls.back());
    ASSERT_EQ(last.size(), 7u);
    EXPECT_EQ(last[1], "gtd2");
    EXPECT_EQ(last[2], "");
    EXPECT_EQ(last[3], "12");
    EXPECT_EQ(last[4], "300");
    EXPECT_EQ(last[6], "0");
}

TEST(StatisticsCsv, SchemaAndMedians) {
    const auto all = toy_runs(1);
    const auto ls = lines(statistics_csv(all));
    EXPECT_EQ(ls[0], "experiment,algorithm,c,iter,median,q1,q3,lo_whisker,hi_whisker,n_outliers");
    EXPECT_EQ(ls.size(), 1u + 3 * 4);
    // Median of three runs is the middle value.
    std::vector<double> finals;
    for (const auto& t : all[0].runs) finals.push_back(t.errors.back());
    std::sort(finals.begin(), finals.end());
    const auto row = split(ls[4]);
    EXPECT_EQ(row[3], "300");
    EXPECT_EQ(std::stod(row[4]), finals[1]);
}

TEST(RunVariants, ThreadCountDoesNotChangeResults) {
    EXPECT_EQ(trajectories_csv(toy_runs(1)), trajectories_csv(toy_runs(3)));
}

TEST(RunVariants, FirstExceptionPropagates) {
    EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                     if (i == 4) throw NumericalError("boom");
                 }),
                 NumericalError);
}

TEST(Fmt, RoundTripsAndSpecials) {
    EXPECT_EQ(std::stod(fmt(0.1)), 0.1);
    EXPECT_EQ(fmt(std::numeric_limits<double>::infinity()), "inf");
    EXPECT_EQ(fmt(std::nan("")), "nan");
}

TEST(ToyCsv, PathAndLimitRow) {
    const auto rows = toy_trajectory();
    ASSERT_EQ(rows.size(), 101u);
    EXPECT_DOUBLE_EQ(rows.front().c, 0.1);
    EXPECT_EQ(rows[99].c, 1e4);
    EXPECT_TRUE(std::isinf(rows.back().c));
    EXPECT_TRUE(rows.front().below_c0);
    EXPECT_FALSE(rows[99].below_c0);
    // Approaches the limit.
    EXPECT_LT((rows[99].phi_theta - rows.back().phi_theta).norm(), 1e-3);
    const auto ls = lines(toy_csv(rows));
    EXPECT_EQ(ls[0], "c,phi_theta_1,phi_theta_2,phi_theta_3,below_c0");
    EXPECT_EQ(split(ls.back())[0], "inf");
}

TEST(Config, DefaultsAndOverrides) {
    const auto j = io::Json::parse(R"({"kind": "singular_main", "c": [0.5], "iters": 1000, "n_runs": 4,
        "generator": {"n_states": 30, "seed": 7}, "schedule": {"kind": "constant", "alpha": 0.01}})");
    const ExperimentConfig c = config_from_json(j);
    EXPECT_EQ(c.kind, ExperimentKind::singular_main);
    EXPECT_EQ(c.c_values, std::vector<double>{0.5});
    EXPECT_EQ(c.iters, 1000);
    EXPECT_EQ(c.n_runs, 4);
    EXPECT_EQ(c.generator.n_states, 30);
    EXPECT_EQ(c.generator.n_actions, 10);
    EXPECT_EQ(c.generator.seed, 7u);
    EXPECT_EQ(c.generator.transition_support, 1);
    EXPECT_EQ(c.theta0_mode, Theta0Mode::null_direction);
    EXPECT_EQ(c.schedule.kind(), StepSchedule::Kind::constant);
    EXPECT_EQ(c.algorithms.size(), 2u);
}

TEST(Config, ErrorsNameTheField) {
    auto expect_field = [](const char* text, const std::string& field) {
        try {
            config_from_json(io::Json::parse(text));
            FAIL() << "expected UsageError for " << text;
        } catch (const UsageError& e) {
            EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
        }
    };
    expect_field(R"({"kind": "nope"})", "config.kind");
    expect_field(R"({})", "config.kind");
    expect_field(R"({"kind": "baird", "n_runs": 0})", "config.n_runs");
    expect_field(R"({"kind": "baird", "iters": "many"})", "config.iters");
    expect_field(R"({"kind": "baird", "c": [1.0, -2.0]})", "config.c");
    expect_field(R"({"kind": "baird", "algorithms": []})", "config.algorithms");
    expect_field(R"({"kind": "expansion_sweep", "c_grid": [10, 100]})", "config.c_grid");
    expect_field(R"({"kind": "ode_check", "integrator": "leapfrog"})", "config.integrator");
}

TEST(Experiments, ToyWritesCsv) {
    ExperimentConfig cfg = ExperimentConfig::defaults(ExperimentKind::toy_trajectory);
    cfg.out = scratch("toy");
    const auto out = run_experiment(cfg);
    ASSERT_EQ(out.files.size(), 1u);
    EXPECT_EQ(lines(io::read_text(out.files[0])).size(), 102u);
    fs::remove_all(cfg.out);
}

TEST(Experiments, OdeOnProblemFile) {
    const fs::path dir = scratch("ode");
    io::write_problem(dir / "toy.json", toy_3state());
    ExperimentConfig cfg = ExperimentConfig::defaults(ExperimentKind::ode_check);
    cfg.out = dir / "out";
    cfg.problem_file = dir / "toy.json";
    cfg.steps = 50;
    const auto out = run_experiment(cfg);
    const auto ls = lines(io::read_text(out.files[0]));
    EXPECT_EQ(ls[0], "problem,c,t,dist_to_equilibrium");
    EXPECT_EQ(ls.size(), 1u + 3 * 51);
    const auto certs = io::Json::parse(io::read_text(out.files[1]));
    ASSERT_EQ(certs.size(), 3u);
    for (const auto& c : certs) {
        EXPECT_TRUE(c["hurwitz"].get<bool>());
        EXPECT_TRUE(c["full_row_rank"].get<bool>());
    }
    fs::remove_all(dir);
}

TEST(Experiments, LearnerOnProblemFile) {
    const fs::path dir = scratch("learner");
    io::write_problem(dir / "toy.json", toy_3state());
    ExperimentConfig cfg = ExperimentConfig::defaults(ExperimentKind::nonsingular_random);
    cfg.out = dir / "out";
    cfg.problem_file = dir / "toy.json";
    cfg.iters = 200;
    cfg.n_runs = 2;
    const auto out = run_experiment(cfg);
    EXPECT_EQ(lines(io::read_text(out.files[0])).size(), 1u + 4 * 2 * 3);
    EXPECT_EQ(out.summary["variants"].size(), 4u);
    fs::remove_all(dir);
}

TEST(SolveReport, ToyFields) {
    const auto j = solve_report(toy_3state(), 10.0);
    EXPECT_TRUE(j["fim_singular"].get<bool>());
    EXPECT_EQ(j["gtd2_null_dimension"].get<int>(), 1);
    EXPECT_TRUE(j["k"].is_null());
    EXPECT_TRUE(j["bound"]["holds"].get<bool>());
    for (const auto& r : j["kkt_residuals"]) EXPECT_LT(r.get<double>(), 1e-10);
}

TEST(Config, BundledConfigsParse) {
    int n = 0;
    for (const auto& entry : fs::directory_iterator(RGTD_CONFIG_DIR)) {
        if (entry.path().extension() != ".json") continue;
        const ExperimentConfig c = read_config(entry.path());
        EXPECT_EQ(c.name, entry.path().stem().string());
        ++n;
    }
    EXPECT_EQ(n, 6);
}
