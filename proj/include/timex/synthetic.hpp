#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "timex/dataset.hpp"
#include "timex/model.hpp"

namespace tix {

// Markov chain whose states emit Gaussian values (continuous) or a fixed
// integer (categorical).
struct MarkovChainSpec {
    FeatureKind kind = FeatureKind::continuous;
    std::vector<double> means;   // continuous: per-state emission mean
    std::vector<double> sds;     // continuous: per-state emission sd, > 0
    std::vector<double> values;  // categorical: per-state integer value
    std::vector<std::vector<double>> transitions;
    std::vector<double> initial;

    std::size_t num_states() const { return transitions.size(); }
    // Throws InvalidArgument when the chain is malformed.
    void validate() const;
};

struct FeatureGenSpec {
    Window window;
    MarkovChainSpec in_chain;
    MarkovChainSpec out_chain;
    FeatureKind kind = FeatureKind::continuous;
    bool trend = false;  // values are the running sum of the emitted samples
};

enum class Aggregator { max, average, monotonic_weighted_average, random_weighted_average };
enum class Interaction { identity, absolute_value, square };

std::string to_string(Aggregator a);
std::string to_string(Interaction i);
Aggregator aggregator_from_string(const std::string& text);
Interaction interaction_from_string(const std::string& text);

inline constexpr Aggregator kAllAggregators[] = {Aggregator::max, Aggregator::average,
                                                 Aggregator::monotonic_weighted_average,
                                                 Aggregator::random_weighted_average};

// g_j = standardize(interaction(aggregate(x_j[window]))).
struct FeatureFunctionSpec {
    Window window;
    Aggregator aggregator = Aggregator::average;
    std::vector<double> weights;  // weighted kinds only; one per window timestep, sum 1
    Interaction interaction = Interaction::identity;
    double mean = 0.0;
    double sd = 1.0;
    double alpha = 0.0;

    bool ordering_sensitive() const {
        return aggregator == Aggregator::monotonic_weighted_average ||
               aggregator == Aggregator::random_weighted_average;
    }
    // interaction(aggregate(.)) of a length-L series, before standardization.
    double raw(std::span<const double> series) const;
    double operator()(std::span<const double> series) const { return (raw(series) - mean) / sd; }
};

struct SyntheticModelSpec {
    std::size_t timesteps = 0;
    Task task = Task::regression;
    std::vector<std::string> feature_names;
    std::vector<bool> relevant;  // per feature
    std::vector<FeatureFunctionSpec> functions;  // per feature
    double beta = 0.0;
    double threshold = 0.0;
    // Logistic link scale for classification; infinity gives hard 0/1 outputs.
    double link_scale = std::numeric_limits<double>::infinity();

    std::size_t num_features() const { return feature_names.size(); }
    ModelInfo info() const { return {num_features(), timesteps, task}; }
    void validate() const;

    // sum_R alpha_j g_j + beta * sum_R' alpha_j g_j for one D x L instance.
    double score(std::span<const double> instance) const;
    // score() for regression, the link probability for classification.
    double output(std::span<const double> instance) const;
    // Relevant and irrelevant parts of score(), kept apart for tuning.
    std::pair<double, double> parts(std::span<const double> instance) const;
};

struct GroundTruth {
    std::vector<std::string> feature_names;
    std::vector<bool> relevant;
    std::vector<Window> windows;
    // True iff the aggregator is a weighted kind.
    std::vector<bool> window_ordering;
    // True iff the feature is relevant and its window is shorter than L.
    std::vector<bool> feature_ordering;
    std::size_t timesteps = 0;

    std::size_t num_features() const { return feature_names.size(); }
    std::size_t num_relevant() const;
    std::size_t num_relevant_timesteps() const;
};

GroundTruth ground_truth_of(const SyntheticModelSpec& spec);

struct GeneratedData {
    TemporalDataset dataset;  // targets are zero until a ground truth is built
    std::vector<FeatureGenSpec> features;
};

// Random Markov-chain dataset. Features are named x1 ... xD.
GeneratedData generate_dataset(std::size_t num_instances, std::size_t num_features, std::size_t sequence_length,
                               std::uint64_t seed, double fraction_categorical = 0.3,
                               double fraction_trend = 0.5);

struct GroundTruthOptions {
    Task task = Task::regression;
    std::vector<Aggregator> aggregators{std::begin(kAllAggregators), std::end(kAllAggregators)};
};

struct GroundTruthBuild {
    std::vector<double> targets;
    SyntheticModelSpec model;  // beta = 0
    GroundTruth truth;
};

// Draws the relevant set and a feature function for every feature, fits the
// standardizers on `dataset` and computes targets. Classification labels the
// top ceil(M/2) instances by y as positive (ties broken by index) and puts
// the threshold halfway between the two classes.
GroundTruthBuild build_ground_truth(const TemporalDataset& dataset, const std::vector<FeatureGenSpec>& gen,
                                    std::size_t num_relevant, std::uint64_t seed,
                                    const GroundTruthOptions& options = {});

// In-process, thread-safe model computing spec.output().
ModelHandle make_synthetic_model(const SyntheticModelSpec& spec);

enum class TuningMetric { accuracy, r_squared };

struct TuningTarget {
    TuningMetric metric = TuningMetric::r_squared;
    double value = 0.9;
};

std::string to_string(TuningMetric m);

// Accuracy (score above threshold vs label) or R^2 of the model's score
// against the dataset targets, with beta overridden.
double model_metric(const SyntheticModelSpec& spec, const TemporalDataset& dataset, TuningMetric metric,
                    double beta);

// Smallest-effort bisection for the beta that brings the metric within
// `tolerance` of the target. Throws TuningError when the target is out of
// reach, the metric is not monotone over the evaluated points, or the
// bracket collapses without meeting the tolerance.
double tune_beta(const SyntheticModelSpec& spec, const TemporalDataset& dataset, const TuningTarget& target,
                 double tolerance = 0.005);

// 2 / sd of the score over the dataset (1 when the score is constant).
double calibrate_link_scale(const SyntheticModelSpec& spec, const TemporalDataset& dataset);

struct BenchmarkConfig {
    std::size_t instances = 1000;
    std::size_t features = 10;
    std::size_t timesteps = 20;
    std::size_t relevant = 5;
    Task task = Task::classification;
    double target_metric = 0.9;  // accuracy (classification) or R^2 (regression)
    std::uint64_t seed = 0;
    double fraction_categorical = 0.3;
    double fraction_trend = 0.5;
    double tolerance = 0.005;
    std::vector<Aggregator> aggregators{std::begin(kAllAggregators), std::end(kAllAggregators)};
};

struct Benchmark {
    TemporalDataset dataset;  // with targets
    std::vector<FeatureGenSpec> generators;
    SyntheticModelSpec model;  // tuned beta, calibrated link
    GroundTruth truth;
};

// generate_dataset + build_ground_truth + tune_beta + calibrate_link_scale.
Benchmark make_benchmark(const BenchmarkConfig& config);

std::string model_spec_to_json(const SyntheticModelSpec& spec);
SyntheticModelSpec model_spec_from_json(const std::string& text);
SyntheticModelSpec load_model_spec(const std::filesystem::path& path);

// Ground-truth record: relevant features, windows, aggregator and interaction
// names, alpha, beta and threshold.
std::string ground_truth_to_json(const SyntheticModelSpec& spec);
GroundTruth ground_truth_from_json(const std::string& text);

}  // namespace tix
