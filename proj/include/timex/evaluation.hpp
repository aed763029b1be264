#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "timex/pipeline.hpp"
#include "timex/synthetic.hpp"

namespace tix {

struct EvalMetrics {
    double power = 0.0;  // tp / max(1, tp + fn)
    double fdr = 0.0;    // fp / max(1, tp + fp)
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;

    static EvalMetrics from_counts(std::size_t tp, std::size_t fp, std::size_t fn);
    bool operator==(const EvalMetrics&) const = default;
};

struct EvalScores {
    EvalMetrics feature;
    EvalMetrics timestep;
    EvalMetrics feature_ordering;
    EvalMetrics window_ordering;
};

// What a method claims, indexed like the ground truth.
struct Explanation {
    std::vector<bool> features;                // identified features
    std::vector<std::vector<bool>> timesteps;  // identified (feature, timestep) cells, D x L
    std::vector<bool> feature_ordering;        // feature flagged ordering-sensitive over [1, L]
    std::vector<bool> window_ordering;         // feature flagged ordering-sensitive within its window

    static Explanation empty(std::size_t features, std::size_t timesteps);
};

// Set arithmetic of an explanation against the truth. Ordering truth covers
// relevant features only; a relevant ordering-sensitive feature that was not
// flagged (tested or not) counts as a miss.
EvalScores score_explanation(const Explanation& explanation, const GroundTruth& truth);

// Explanation of a TIME report: important features, the cells of their
// reported windows, and the ordering flags of the tests that were run.
Explanation explanation_of(const AnalysisReport& report, const GroundTruth& truth);

// score_explanation(explanation_of(report, truth), truth). Throws
// InvalidArgument when the report and truth name different features.
EvalScores score_report(const AnalysisReport& report, const GroundTruth& truth);

// Indices of the (at most n) highest non-zero scores, in ascending index
// order. Ties are broken towards the lower index.
std::vector<std::size_t> select_top_n(std::span<const double> scores, std::size_t n);

// Per-(feature, timestep) permutation scores and p-values, row-major D x L.
struct CellScores {
    std::size_t features = 0;
    std::size_t timesteps = 0;
    std::vector<double> scores;
    std::vector<double> p_values;

    double score(std::size_t j, std::size_t k) const { return scores[j * timesteps + (k - 1)]; }
    double p(std::size_t j, std::size_t k) const { return p_values[j * timesteps + (k - 1)]; }
};

// Tabular permutation baseline: window importance of every single cell [k, k].
CellScores perm_baseline(ModelPool& pool, const TemporalDataset& dataset, const LossKind& loss,
                         std::size_t permutations, std::uint64_t seed, std::size_t parallelism = 1,
                         std::size_t batch_size = 256);
CellScores perm_baseline(const ModelHandle& model, const TemporalDataset& dataset, const LossKind& loss,
                         std::size_t permutations, std::uint64_t seed, std::size_t parallelism = 1);

// Mean of the non-zero cell scores of each feature (0 when all are zero).
std::vector<double> perm_feature_scores(const CellScores& cells);

// PERM: top-n features by perm_feature_scores and top-n cells, with n taken
// from the truth.
Explanation perm_top_n(const CellScores& cells, const GroundTruth& truth);
// PERM-f: cells rejected by BH at q over all D x L p-values; a feature is
// identified when any of its cells is.
Explanation perm_fdr(const CellScores& cells, double q);
// TIME-n: TIME's important features and window cells, each cell scored with
// its feature's importance score, truncated to the n highest non-zero scores.
Explanation time_top_n(const AnalysisReport& report, const GroundTruth& truth);

enum class Method { time, time_n, perm, perm_f };

std::string to_string(Method method);
Method method_from_string(const std::string& text);
bool has_ordering(Method method);

struct SuiteConfig {
    std::size_t replicates = 3;
    BenchmarkConfig benchmark;        // its seed is replaced per replicate
    AnalysisConfig analysis;          // its seed is replaced per replicate
    std::vector<Method> methods{Method::time, Method::time_n, Method::perm, Method::perm_f};
    std::uint64_t seed = 0;
    std::size_t parallelism = 1;      // concurrent replicates
};

struct ReplicateResult {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    std::map<Method, EvalScores> scores;
    std::map<Method, double> runtime_seconds;
};

struct MethodSummary {
    Method method = Method::time;
    EvalScores mean;  // power and fdr fields are means over successful replicates
    double median_runtime_seconds = 0.0;
};

struct SuiteResult {
    std::vector<ReplicateResult> replicates;
    std::vector<MethodSummary> summary;
    std::size_t failed = 0;
};

// Seed of replicate r.
std::uint64_t replicate_seed(std::uint64_t seed, std::size_t replicate);

// For every replicate: build a benchmark, run the requested methods (TIME
// and TIME-n share one analysis, PERM and PERM-f one baseline run), and score
// them. Failed replicates are recorded and left out of the summary.
SuiteResult run_suite(const SuiteConfig& config);

// Results table, one row per method. PERM rows have NA ordering columns;
// runtimes are NA unless `include_runtime` is set.
std::string suite_to_csv(const SuiteResult& result, bool include_runtime = true);

}  // namespace tix
