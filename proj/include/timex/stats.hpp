#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tix {

// (#{r : round_losses[r] <= baseline} + 1) / (rounds + 1). Never 0; the
// smallest attainable value is 1 / (rounds + 1).
double empirical_p(double baseline_mean_loss, std::span<const double> round_losses);

// Benjamini-Hochberg step-up at level q. Returns the rejected indices in
// ascending order. Hypotheses tied with the cutoff p-value are all rejected.
std::vector<std::size_t> bh_reject(std::span<const double> p_values, double q);

enum class TestKind { group_importance, overall_importance, window_importance, feature_ordering, window_ordering };
enum class Decision { untested, rejected, accepted };

std::string to_string(TestKind kind);
std::string to_string(Decision decision);

struct TestNode {
    std::string id;
    TestKind kind = TestKind::overall_importance;
    std::size_t subject = 0;  // feature or group index the test is about
    std::optional<double> p_value;
    Decision decision = Decision::untested;
    std::uint64_t evaluations = 0;  // model evaluations spent on this test
    std::vector<TestNode> children;
};

// Fills the node's p-value (and may record evaluations). Called at most once
// per node, and only when the node's parent was rejected.
using TestRunner = std::function<double(TestNode& node)>;

// Runs fn(0) ... fn(n - 1), possibly concurrently.
using ParallelFor = std::function<void(std::size_t n, const std::function<void(std::size_t)>& fn)>;

void sequential_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// Hierarchical FDR: the top family is tested and BH-corrected at q; the child
// family of every rejected node is then tested and corrected at q, level by
// level. Children of non-rejected nodes stay untested. Tests of one level run
// through `parallel`. A throwing runner surfaces as AnalysisError naming the
// node.
void hierarchical_fdr(std::vector<TestNode>& root_family, double q, const TestRunner& runner,
                      const ParallelFor& parallel = sequential_for);

}  // namespace tix
