#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "timex/dataset.hpp"
#include "timex/model.hpp"
#include "timex/stats.hpp"
#include "timex/window_search.hpp"

namespace tix {

// A node of a feature-group hierarchy. Members are feature names; subgroups
// nest. The leaves of the whole hierarchy must partition the feature set.
struct FeatureGroup {
    std::string name;
    std::vector<std::string> features;
    std::vector<FeatureGroup> subgroups;
};

struct AnalysisConfig {
    double gamma = 0.99;             // window localization parameter
    double q = 0.1;                  // FDR level applied within every family
    std::size_t permutations = 50;   // rounds per p-value
    std::uint64_t seed = 0;
    std::optional<LossKind> loss;    // defaults to the loss matching the dataset task
    std::size_t batch_size = 256;
    std::size_t parallelism = 1;
    std::vector<FeatureGroup> feature_groups;

    // Throws ConfigError when a field is out of range.
    void validate() const;
};

struct OrderingResult {
    double p = 1.0;
    bool important = false;
};

struct FeatureReport {
    std::string feature;
    std::size_t index = 0;
    bool important = false;
    std::optional<double> importance_score;  // I(f, j, [1, L]); absent when untested
    std::optional<double> p_overall;
    std::optional<Window> window;
    std::optional<double> window_score;
    std::optional<double> p_window;
    std::optional<OrderingResult> feature_ordering;
    std::optional<OrderingResult> window_ordering;
    std::optional<WindowSearchResult> search;
    TestNode trace;
};

struct GroupReport {
    std::string name;
    std::optional<double> p_value;
    Decision decision = Decision::untested;
};

struct AnalysisReport {
    AnalysisConfig config;
    LossKind loss;
    std::size_t timesteps = 0;
    double baseline_mean_loss = 0.0;
    // Important features by descending score (then name), followed by the
    // rest by name.
    std::vector<FeatureReport> features;
    std::vector<GroupReport> groups;
    std::vector<TestNode> tree;
    std::uint64_t model_evaluations = 0;
    double wall_seconds = 0.0;

    const FeatureReport& feature(const std::string& name) const;
};

// Full analysis: overall importance of every feature (or feature group),
// then, under hierarchical FDR control, window localization, window
// importance and the two ordering tests for each important feature.
// Reports are bit-identical for equal seeds whatever the parallelism.
AnalysisReport analyze(ModelPool& pool, const TemporalDataset& dataset, const AnalysisConfig& config);
AnalysisReport analyze(const ModelHandle& model, const TemporalDataset& dataset, const AnalysisConfig& config);

// analyze() with a mandatory group hierarchy.
AnalysisReport analyze_with_groups(const ModelHandle& model, const TemporalDataset& dataset,
                                   const AnalysisConfig& config);

// Substream unit for jointly permuting a set of features: the feature index
// itself for a single feature, a tagged hash of the sorted indices otherwise.
std::uint64_t feature_set_unit(std::vector<std::size_t> features);

}  // namespace tix
