#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "oracles.hpp"
#include "support.hpp"
#include "timex/errors.hpp"
#include "timex/evaluation.hpp"
#include "timex/perturbation.hpp"

using namespace tix;

namespace {

GroundTruth five_of_ten() {
    GroundTruth t;
    t.timesteps = 4;
    for (std::size_t j = 0; j < 10; ++j) {
        t.feature_names.push_back("x" + std::to_string(j + 1));
        t.relevant.push_back(j < 5);
        t.windows.push_back({2, 3});
        t.window_ordering.push_back(j < 2);
        t.feature_ordering.push_back(j < 5);
    }
    return t;
}

FeatureReport important(const std::string& name, Window w, bool feature_ordering, bool window_ordering) {
    FeatureReport f;
    f.feature = name;
    f.important = true;
    f.importance_score = 1.0;
    f.window = w;
    f.feature_ordering = OrderingResult{0.01, feature_ordering};
    f.window_ordering = OrderingResult{0.01, window_ordering};
    return f;
}

}  // namespace

TEST_CASE("scoring a report") {
    const auto truth = five_of_ten();
    AnalysisReport r;
    for (std::size_t j = 0; j < 4; ++j) r.features.push_back(important(truth.feature_names[j], {2, 3}, true, j == 0));
    r.features.push_back(important("x9", {1, 1}, true, true));
    for (const std::string name : {"x5", "x6", "x7", "x8", "x10"}) {
        FeatureReport f;
        f.feature = name;
        r.features.push_back(f);
    }
    const auto s = score_report(r, truth);
    CHECK(s.feature.power == 0.8);
    CHECK(s.feature.fdr == 0.2);
    CHECK(s.timestep.tp == 8);
    CHECK(s.timestep.fp == 1);
    CHECK(s.timestep.fn == 2);
    // x9 is irrelevant: its ordering flags are false positives
    CHECK(s.feature_ordering.tp == 4);
    CHECK(s.feature_ordering.fp == 1);
    CHECK(s.feature_ordering.fn == 1);
    CHECK(s.window_ordering.tp == 1);
    CHECK(s.window_ordering.fp == 1);
    CHECK(s.window_ordering.fn == 1);

    const auto empty = EvalMetrics::from_counts(0, 0, 0);
    CHECK(empty.power == 0.0);
    CHECK(empty.fdr == 0.0);

    r.features.pop_back();
    CHECK_THROWS_AS(score_report(r, truth), InvalidArgument);
}

TEST_CASE("score_report agrees with a set-based confusion oracle") {
    std::mt19937_64 rng(17);
    for (int n = 0; n < 1000; ++n) {
        const auto [report, truth] = oracle::random_case(rng);
        REQUIRE(oracle::matches(score_report(report, truth), oracle::confusion(report, truth)));
    }
}

TEST_CASE("top-n selection") {
    const std::vector<double> s{0.5, 0.0, 0.9, 0.5, 0.1};
    CHECK(select_top_n(s, 2) == std::vector<std::size_t>{0, 2});
    CHECK(select_top_n(s, 3) == std::vector<std::size_t>{0, 2, 3});
    CHECK(select_top_n(s, 10) == std::vector<std::size_t>{0, 2, 3, 4});
    CHECK(select_top_n(s, 0).empty());
    CHECK(select_top_n(std::vector<double>{0, 0}, 2).empty());
    CHECK(select_top_n(std::vector<double>{-1, 0, 2}, 2) == std::vector<std::size_t>{0, 2});
}

TEST_CASE("methods by name") {
    for (Method m : {Method::time, Method::time_n, Method::perm, Method::perm_f}) {
        CHECK(method_from_string(to_string(m)) == m);
    }
    CHECK(method_from_string("time_n") == Method::time_n);
    CHECK(method_from_string("perm-f") == Method::perm_f);
    CHECK_THROWS_AS(method_from_string("lime"), InvalidArgument);
    CHECK(has_ordering(Method::time));
    CHECK_FALSE(has_ordering(Method::perm));
}

TEST_CASE("tabular permutation baseline") {
    const auto ds = test_support::normal_dataset(300, 2, 8, 1);
    SUBCASE("constant model") {
        const auto cells = perm_baseline(make_constant_model({2, 8, Task::regression}, 3.0), ds,
                                         LossKind::quadratic(), 10, 4);
        for (double s : cells.scores) CHECK(s == 0.0);
        for (double p : cells.p_values) CHECK(p == 1.0);
        CHECK(perm_fdr(cells, 0.1).features == std::vector<bool>{false, false});
        CHECK(perm_feature_scores(cells) == std::vector<double>{0.0, 0.0});
    }
    SUBCASE("single-cell model") {
        auto fn = [](std::span<const double> x) { return x[4]; };
        const auto target = test_support::with_model_targets(ds, fn);
        const auto model = make_in_process_model({2, 8, Task::regression}, fn);
        const auto cells = perm_baseline(model, target, LossKind::quadratic(), 10, 4);
        for (std::size_t j = 0; j < 2; ++j) {
            for (std::size_t k = 1; k <= 8; ++k) {
                if (j == 0 && k == 5) {
                    CHECK(cells.score(j, k) > 1.0);
                    CHECK(cells.p(j, k) == 1.0 / 11.0);
                } else {
                    CHECK(cells.score(j, k) == 0.0);
                }
            }
        }
        CHECK(perm_feature_scores(cells)[0] == cells.score(0, 5));
        // 16 cells with P = 10: the floor 1/11 is above q / 16, so nothing can be rejected
        CHECK(perm_fdr(cells, 0.1).features == std::vector<bool>{false, false});
        const auto fine = perm_baseline(model, target, LossKind::quadratic(), 200, 4);
        const auto fdr = perm_fdr(fine, 0.1);
        CHECK(fdr.features == std::vector<bool>{true, false});
        CHECK(fdr.timesteps[0][4]);
        CHECK(std::count(fdr.timesteps[0].begin(), fdr.timesteps[0].end(), true) == 1);
        CHECK(perm_baseline(model, target, LossKind::quadratic(), 10, 4, 3).scores == cells.scores);
    }
}

TEST_CASE("with one timestep the cell test is the overall test") {
    const auto ds = test_support::normal_dataset(200, 3, 1, 6);
    auto fn = [](std::span<const double> x) { return x[0] + 0.3 * x[1]; };
    const auto target = test_support::with_model_targets(ds, fn);
    const auto model = make_in_process_model({3, 1, Task::regression}, fn);
    AnalysisConfig cfg;
    cfg.permutations = 20;
    cfg.seed = 8;
    const auto report = analyze(model, target, cfg);
    const auto cells = perm_baseline(model, target, LossKind::quadratic(), 20, 8);
    for (std::size_t j = 0; j < 3; ++j) {
        const auto& f = report.feature("f" + std::to_string(j + 1));
        CHECK(cells.score(j, 1) == f.importance_score);
        CHECK(cells.p(j, 1) == f.p_overall);
    }
}

TEST_CASE("PERM and TIME-n explanations") {
    const auto truth = five_of_ten();
    CellScores cells;
    cells.features = 10;
    cells.timesteps = 4;
    cells.scores.assign(40, 0.0);
    cells.p_values.assign(40, 1.0);
    // feature 0 mean of non-zero cells 2, feature 7 mean 3 with a zero cell excluded
    cells.scores[0 * 4 + 1] = 1.0;
    cells.scores[0 * 4 + 2] = 3.0;
    cells.scores[7 * 4 + 0] = 3.0;
    const auto fs = perm_feature_scores(cells);
    CHECK(fs[0] == 2.0);
    CHECK(fs[7] == 3.0);
    const auto e = perm_top_n(cells, truth);
    CHECK(e.features[0]);
    CHECK(e.features[7]);
    CHECK(std::count(e.features.begin(), e.features.end(), true) == 2);
    CHECK(e.timesteps[0][1]);
    CHECK(e.timesteps[0][2]);
    CHECK(e.timesteps[7][0]);

    AnalysisReport r;
    auto a = important("x1", {1, 4}, true, true);
    a.importance_score = 5.0;
    auto b = important("x2", {2, 3}, false, false);
    b.importance_score = 2.0;
    r.features = {a, b};
    for (std::size_t j = 2; j < 10; ++j) {
        FeatureReport f;
        f.feature = truth.feature_names[j];
        r.features.push_back(f);
    }
    // n = 10 relevant cells: all six cells of x1 and x2 fit
    const auto t = time_top_n(r, truth);
    CHECK(t.features[0]);
    CHECK(t.features[1]);
    CHECK(t.feature_ordering[0]);
    CHECK(t.window_ordering[0]);
    CHECK(std::count(t.timesteps[0].begin(), t.timesteps[0].end(), true) == 4);
    CHECK(std::count(t.timesteps[1].begin(), t.timesteps[1].end(), true) == 2);
}

TEST_CASE("additive model importance matches twice the covariance difference") {
    // f = g_W + g_rest on one feature; Y = f + noise. Under derangements the
    // expected score given the data is exactly 2 [cov(Y, g_W) - cov(g_W, g_rest)]
    // with sample (n - 1) covariances.
    const std::size_t m = 6400, l = 6;
    auto ds = test_support::normal_dataset(m, 1, l, 31);
    auto g_w = [](std::span<const double> x) { return x[1] + 0.5 * x[2] * x[2]; };
    auto g_rest = [](std::span<const double> x) { return 0.7 * x[0] + x[4] + 0.3 * x[3] * x[5]; };
    std::mt19937_64 noise_rng(2);
    std::normal_distribution<double> noise(0.0, 0.5);
    std::vector<double> y, a, b;
    for (std::size_t i = 0; i < m; ++i) {
        const auto x = ds.instance(i);
        a.push_back(g_w(x));
        b.push_back(g_rest(x));
        y.push_back(a.back() + b.back() + noise(noise_rng));
    }
    ds = ds.with_targets(y, Task::regression);
    auto cov = [m](const std::vector<double>& u, const std::vector<double>& v) {
        double mu = 0, mv = 0;
        for (std::size_t i = 0; i < m; ++i) mu += u[i], mv += v[i];
        mu /= m, mv /= m;
        double s = 0;
        for (std::size_t i = 0; i < m; ++i) s += (u[i] - mu) * (v[i] - mv);
        return s / static_cast<double>(m - 1);
    };
    const double expected = 2.0 * (cov(y, a) - cov(a, b));

    ModelPool pool(make_in_process_model({1, l, Task::regression},
                                         [&](std::span<const double> x) { return g_w(x) + g_rest(x); }));
    LossEvaluator ev(pool, ds, LossKind::quadratic());
    const auto r = window_importance(ev, 0, {2, 3}, 50, {5, 0, StreamKind::importance});
    double mean = 0, sq = 0;
    for (double loss : r.round_losses) mean += loss - r.baseline;
    mean /= 50;
    for (double loss : r.round_losses) sq += (loss - r.baseline - mean) * (loss - r.baseline - mean);
    const double se = std::sqrt(sq / 49.0) / std::sqrt(50.0);
    CHECK(std::abs(r.score - expected) <= 3.0 * se);
}

TEST_CASE("suite runs, is deterministic and writes a fixed CSV shape") {
    SuiteConfig cfg;
    cfg.replicates = 2;
    cfg.seed = 3;
    cfg.benchmark.instances = 200;
    cfg.benchmark.features = 4;
    cfg.benchmark.timesteps = 5;
    cfg.benchmark.relevant = 2;
    cfg.analysis.permutations = 10;
    const auto a = run_suite(cfg);
    CHECK(a.failed == 0);
    CHECK(a.summary.size() == 4);
    const auto csv = suite_to_csv(a, false);
    cfg.parallelism = 2;
    CHECK(suite_to_csv(run_suite(cfg), false) == csv);

    std::istringstream lines(csv);
    std::string line;
    std::vector<std::string> rows;
    while (std::getline(lines, line)) rows.push_back(line);
    REQUIRE(rows.size() == 5);
    CHECK(rows[0].rfind("method,feature_power,feature_fdr,timestep_power", 0) == 0);
    CHECK(rows[1].rfind("TIME,", 0) == 0);
    CHECK(rows[3].find("PERM,") == 0);
    CHECK(rows[3].find(",NA,NA,NA,NA,NA") != std::string::npos);
    for (const auto& row : rows) CHECK(std::count(row.begin(), row.end(), ',') == 9);
    CHECK(suite_to_csv(a, true).find(",NA\n") == std::string::npos);

    CHECK(replicate_seed(3, 0) != replicate_seed(3, 1));
    CHECK(a.replicates[1].seed == replicate_seed(3, 1));

    SuiteConfig broken = cfg;
    broken.benchmark.relevant = 9;
    const auto failed = run_suite(broken);
    CHECK(failed.failed == 2);
    CHECK_FALSE(failed.replicates[0].error.empty());
}
