#pragma once

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "timex/dataset.hpp"
#include "timex/model.hpp"
#include "timex/synthetic.hpp"

namespace test_support {

// M x D x L dataset of i.i.d. standard normals with zero targets.
inline tix::TemporalDataset normal_dataset(std::size_t m, std::size_t d, std::size_t l, std::uint64_t seed,
                                           tix::Task task = tix::Task::regression) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::vector<double> values(m * d * l);
    for (double& v : values) v = normal(rng);
    std::vector<double> targets(m, 0.0);
    if (task == tix::Task::classification) {
        for (std::size_t i = 0; i < m; ++i) targets[i] = static_cast<double>(i % 2);
    }
    std::vector<tix::FeatureMeta> meta;
    for (std::size_t j = 0; j < d; ++j) meta.push_back({"f" + std::to_string(j + 1), tix::FeatureKind::continuous});
    return {m, d, l, std::move(values), std::move(targets), task, std::move(meta)};
}

// Targets replaced by fn(instance).
template <typename Fn>
tix::TemporalDataset with_model_targets(const tix::TemporalDataset& ds, Fn fn) {
    std::vector<double> y;
    for (std::size_t i = 0; i < ds.num_instances(); ++i) y.push_back(fn(ds.instance(i)));
    return ds.with_targets(std::move(y), tix::Task::regression);
}

// Fits mean and population sd of every feature function on `ds`.
inline void fit_standardizers(tix::SyntheticModelSpec& spec, const tix::TemporalDataset& ds) {
    for (std::size_t j = 0; j < spec.num_features(); ++j) {
        auto& fn = spec.functions[j];
        fn.mean = 0.0;
        fn.sd = 1.0;
        double sum = 0.0;
        double sq = 0.0;
        for (std::size_t i = 0; i < ds.num_instances(); ++i) {
            const double v = fn.raw(ds.series(i, j));
            sum += v;
            sq += v * v;
        }
        const double n = static_cast<double>(ds.num_instances());
        fn.mean = sum / n;
        const double var = sq / n - fn.mean * fn.mean;
        fn.sd = var > 0.0 ? std::sqrt(var) : 1.0;
    }
}

// Regression spec over features f1..fD with the given functions; features
// with alpha 0 are irrelevant.
inline tix::SyntheticModelSpec regression_spec(std::size_t l, std::vector<tix::FeatureFunctionSpec> functions) {
    tix::SyntheticModelSpec spec;
    spec.timesteps = l;
    spec.task = tix::Task::regression;
    for (std::size_t j = 0; j < functions.size(); ++j) {
        spec.feature_names.push_back("f" + std::to_string(j + 1));
        spec.relevant.push_back(functions[j].alpha != 0.0);
    }
    spec.functions = std::move(functions);
    return spec;
}

inline tix::FeatureFunctionSpec function(tix::Window w, tix::Aggregator agg, double alpha,
                                         std::vector<double> weights = {}) {
    tix::FeatureFunctionSpec f;
    f.window = w;
    f.aggregator = agg;
    f.alpha = alpha;
    f.weights = std::move(weights);
    return f;
}

inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("timex_test_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace test_support
