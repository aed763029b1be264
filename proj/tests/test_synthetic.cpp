#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <numeric>

#include "support.hpp"
#include "timex/errors.hpp"
#include "timex/perturbation.hpp"
#include "timex/synthetic.hpp"

using namespace tix;

namespace {

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("generation is deterministic and well formed") {
    const auto a = generate_dataset(200, 8, 12, 4, 0.5, 0.5);
    const auto b = generate_dataset(200, 8, 12, 4, 0.5, 0.5);
    CHECK(a.dataset == b.dataset);
    CHECK(a.dataset != generate_dataset(200, 8, 12, 5, 0.5, 0.5).dataset);
    CHECK(a.dataset.feature_meta()[0].name == "x1");
    CHECK(a.dataset.feature_meta()[7].name == "x8");

    std::size_t categorical = 0;
    for (std::size_t j = 0; j < 8; ++j) {
        const auto& spec = a.features[j];
        CHECK(spec.window.valid_for(12));
        CHECK(spec.window.width() >= 2);
        for (const auto* chain : {&spec.in_chain, &spec.out_chain}) {
            CHECK_NOTHROW(chain->validate());
            for (const auto& row : chain->transitions) {
                CHECK(std::accumulate(row.begin(), row.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
            }
        }
        if (spec.kind == FeatureKind::categorical) {
            ++categorical;
            CHECK(a.dataset.feature_meta()[j].kind == FeatureKind::categorical);
            for (std::size_t i = 0; i < 200; ++i) {
                for (double v : a.dataset.series(i, j)) CHECK(v == std::round(v));
            }
        }
    }
    CHECK(categorical == 4);

    const auto one = generate_dataset(10, 2, 1, 1);
    CHECK(one.features[0].window == Window{1, 1});
    CHECK_THROWS_AS(generate_dataset(1, 2, 3, 1), InvalidArgument);
    CHECK_THROWS_AS(generate_dataset(10, 2, 3, 1, 1.5), InvalidArgument);
}

TEST_CASE("ground truth construction") {
    const auto gen = generate_dataset(500, 10, 20, 7);
    const auto built = build_ground_truth(gen.dataset, gen.features, 5, 7);
    const auto& spec = built.model;
    CHECK(built.truth.num_relevant() == 5);
    CHECK(spec.beta == 0.0);
    for (std::size_t j = 0; j < 10; ++j) {
        const auto& fn = spec.functions[j];
        CHECK(fn.window == gen.features[j].window);
        CHECK(std::abs(fn.alpha) <= 1.0);
        CHECK(built.truth.window_ordering[j] == (spec.relevant[j] && fn.ordering_sensitive()));
        // standardized over the dataset
        double mean = 0.0, sq = 0.0;
        for (std::size_t i = 0; i < 500; ++i) {
            const double v = fn(gen.dataset.series(i, j));
            mean += v;
            sq += v * v;
        }
        mean /= 500.0;
        CHECK(std::abs(mean) < 1e-9);
        CHECK(std::abs(sq / 500.0 - mean * mean - 1.0) < 1e-9);
    }
    for (std::size_t i = 0; i < 500; ++i) CHECK(built.targets[i] == spec.score(gen.dataset.instance(i)));

    const auto again = build_ground_truth(gen.dataset, gen.features, 5, 7);
    CHECK(again.targets == built.targets);
    CHECK(model_spec_to_json(again.model) == model_spec_to_json(built.model));

    const auto none = build_ground_truth(gen.dataset, gen.features, 0, 7);
    for (double y : none.targets) CHECK(y == 0.0);
    CHECK_THROWS_AS(build_ground_truth(gen.dataset, gen.features, 11, 7), InvalidArgument);
}

TEST_CASE("classification labels split at the median score") {
    const auto gen = generate_dataset(301, 6, 10, 2);
    GroundTruthOptions options;
    options.task = Task::classification;
    const auto built = build_ground_truth(gen.dataset, gen.features, 3, 2, options);
    CHECK(std::count(built.targets.begin(), built.targets.end(), 1.0) == 151);
    CHECK(std::count(built.targets.begin(), built.targets.end(), 0.0) == 150);
    const auto ds = gen.dataset.with_targets(built.targets, Task::classification);
    CHECK(model_metric(built.model, ds, TuningMetric::accuracy, 0.0) == 1.0);
    for (std::size_t i = 0; i < 301; ++i) {
        const double s = built.model.score(ds.instance(i));
        CHECK((s > built.model.threshold) == (built.targets[i] == 1.0));
        CHECK(built.model.output(ds.instance(i)) == built.targets[i]);
    }
}

TEST_CASE("average of identity is perfectly correlated with the raw window mean") {
    const auto ds = test_support::normal_dataset(400, 1, 8, 3);
    auto spec = test_support::regression_spec(8, {test_support::function({2, 6}, Aggregator::average, 1.0)});
    test_support::fit_standardizers(spec, ds);
    std::vector<double> g, mean;
    for (std::size_t i = 0; i < 400; ++i) {
        g.push_back(spec.score(ds.instance(i)));
        const auto s = ds.series(i, 0);
        mean.push_back(std::accumulate(s.begin() + 1, s.begin() + 6, 0.0) / 5.0);
    }
    CHECK(correlation(g, mean) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("aggregators under reordering of the window") {
    const std::vector<double> series{5, 1, 2, 3, 4, 9};
    const std::vector<double> shuffled{5, 4, 2, 1, 3, 9};
    auto fn = [](Aggregator agg, Interaction inter = Interaction::identity) {
        FeatureFunctionSpec f;
        f.window = {2, 5};
        f.aggregator = agg;
        f.interaction = inter;
        if (agg == Aggregator::monotonic_weighted_average) f.weights = {0.1, 0.2, 0.3, 0.4};
        if (agg == Aggregator::random_weighted_average) f.weights = {0.5, 0.1, 0.15, 0.25};
        return f;
    };
    CHECK(fn(Aggregator::average).raw(series) == 2.5);
    CHECK(fn(Aggregator::average).raw(shuffled) == 2.5);
    CHECK(fn(Aggregator::max).raw(series) == 4.0);
    CHECK(fn(Aggregator::max).raw(shuffled) == 4.0);
    CHECK(fn(Aggregator::monotonic_weighted_average).raw(series) == doctest::Approx(3.0));
    CHECK(fn(Aggregator::monotonic_weighted_average).raw(shuffled) != doctest::Approx(3.0));
    CHECK(fn(Aggregator::random_weighted_average).raw(series) != fn(Aggregator::random_weighted_average).raw(shuffled));
    CHECK(fn(Aggregator::average, Interaction::square).raw(series) == 6.25);
    const std::vector<double> negative{0, -1, -2, -3, -4, 0};
    CHECK(fn(Aggregator::average, Interaction::absolute_value).raw(negative) == 2.5);

    // order-free aggregators are bit-identical under any timestep permutation
    std::mt19937_64 rng(4);
    std::normal_distribution<double> normal;
    for (int n = 0; n < 500; ++n) {
        std::vector<double> x(6);
        for (double& v : x) v = normal(rng);
        auto y = x;
        std::shuffle(y.begin() + 1, y.begin() + 5, rng);
        CHECK(fn(Aggregator::average).raw(x) == fn(Aggregator::average).raw(y));
        CHECK(fn(Aggregator::max).raw(x) == fn(Aggregator::max).raw(y));
    }
}

TEST_CASE("beta mixes in irrelevant features only") {
    const auto gen = generate_dataset(200, 6, 8, 8);
    auto spec = build_ground_truth(gen.dataset, gen.features, 3, 8).model;
    for (std::size_t i = 0; i < 200; ++i) {
        const auto x = gen.dataset.instance(i);
        const auto [a, b] = spec.parts(x);
        CHECK(spec.score(x) == a);
        spec.beta = 0.7;
        CHECK(spec.score(x) == doctest::Approx(a + 0.7 * b).epsilon(1e-14));
        spec.beta = 0.0;
    }

    // an irrelevant feature of a beta = 0 model has exactly zero importance
    ModelPool pool(make_synthetic_model(spec));
    const auto ds = gen.dataset.with_targets(build_ground_truth(gen.dataset, gen.features, 3, 8).targets,
                                             Task::regression);
    LossEvaluator ev(pool, ds, LossKind::quadratic());
    for (std::size_t j = 0; j < 6; ++j) {
        const auto r = window_importance(ev, j, Window::full(8), 5, {1, j, StreamKind::importance});
        if (spec.relevant[j]) CHECK(r.score > 0.0);
        else CHECK(r.score == 0.0);
    }
}

TEST_CASE("hard and soft classification outputs") {
    auto spec = test_support::regression_spec(2, {test_support::function({1, 2}, Aggregator::average, 1.0)});
    spec.task = Task::classification;
    spec.threshold = 0.0;
    const std::vector<double> up{1, 1};
    const std::vector<double> down{-1, -1};
    const std::vector<double> zero{0, 0};
    CHECK(spec.output(up) == 1.0);
    CHECK(spec.output(down) == 0.0);
    CHECK(spec.output(zero) == 0.5);
    spec.link_scale = 2.0;
    CHECK(spec.output(up) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));
    CHECK(spec.output(down) == doctest::Approx(1.0 / (1.0 + std::exp(2.0))));
}

TEST_CASE("tuning beta") {
    BenchmarkConfig cfg;
    cfg.instances = 1000;
    cfg.seed = 12;
    const auto bench = make_benchmark(cfg);
    const double acc = model_metric(bench.model, bench.dataset, TuningMetric::accuracy, bench.model.beta);
    CHECK(acc >= 0.895);
    CHECK(acc <= 0.905);
    CHECK(bench.model.beta > 0.0);
    CHECK(std::isfinite(bench.model.link_scale));
    CHECK(bench.truth.num_relevant() == 5);

    auto raw = bench.model;
    raw.beta = 0.0;
    CHECK(tune_beta(raw, bench.dataset, {TuningMetric::accuracy, 1.0}) == 0.0);
    CHECK_THROWS_AS(tune_beta(raw, bench.dataset, {TuningMetric::accuracy, 1.01}), TuningError);
    CHECK_THROWS_AS(tune_beta(raw, bench.dataset, {TuningMetric::accuracy, 0.9}, -1.0), InvalidArgument);

    BenchmarkConfig reg = cfg;
    reg.task = Task::regression;
    reg.target_metric = 0.8;
    const auto rb = make_benchmark(reg);
    const double r2 = model_metric(rb.model, rb.dataset, TuningMetric::r_squared, rb.model.beta);
    CHECK(std::abs(r2 - 0.8) <= 0.005);
    CHECK(model_metric(rb.model, rb.dataset, TuningMetric::r_squared, 0.0) == doctest::Approx(1.0));

    // an exact target with zero tolerance is generally unreachable on a
    // finite sample and must be reported, not silently approximated
    try {
        tune_beta(raw, bench.dataset, {TuningMetric::accuracy, 0.9005}, 0.0);
    } catch (const TuningError& e) {
        CHECK(std::string(e.what()).find("trace") != std::string::npos);
    }
}

TEST_CASE("link scale calibration") {
    auto spec = test_support::regression_spec(2, {test_support::function({1, 2}, Aggregator::average, 1.0)});
    const TemporalDataset flat(3, 1, 2, {1, 1, 1, 1, 1, 1}, {0, 0, 0}, Task::regression,
                               {{"f1", FeatureKind::continuous}});
    CHECK(calibrate_link_scale(spec, flat) == 1.0);
    const TemporalDataset two(2, 1, 2, {1, 1, -1, -1}, {0, 0}, Task::regression, {{"f1", FeatureKind::continuous}});
    CHECK(calibrate_link_scale(spec, two) == 2.0);
}

TEST_CASE("model spec and ground truth JSON") {
    BenchmarkConfig cfg;
    cfg.instances = 300;
    cfg.seed = 3;
    const auto bench = make_benchmark(cfg);
    const auto text = model_spec_to_json(bench.model);
    const auto back = model_spec_from_json(text);
    CHECK(model_spec_to_json(back) == text);
    for (std::size_t i = 0; i < 300; ++i) {
        CHECK(back.output(bench.dataset.instance(i)) == bench.model.output(bench.dataset.instance(i)));
    }

    auto hard = bench.model;
    hard.link_scale = std::numeric_limits<double>::infinity();
    CHECK(std::isinf(model_spec_from_json(model_spec_to_json(hard)).link_scale));

    const auto truth = ground_truth_from_json(ground_truth_to_json(bench.model));
    CHECK(truth.relevant == bench.truth.relevant);
    CHECK(truth.windows == bench.truth.windows);
    CHECK(truth.window_ordering == bench.truth.window_ordering);
    CHECK(truth.feature_ordering == bench.truth.feature_ordering);
    CHECK(truth.feature_names == bench.truth.feature_names);

    CHECK_THROWS_AS(model_spec_from_json("{}"), FormatError);
    CHECK_THROWS_AS(model_spec_from_json("[1, 2"), FormatError);
}
