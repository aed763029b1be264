#include "timex/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "timex/errors.hpp"
#include "timex/parallel.hpp"

namespace tix {

namespace {

constexpr std::uint64_t kSetTag = 1ULL << 63;

struct FeatureState {
    std::optional<double> overall_score;
    std::optional<WindowSearchResult> search;
    std::optional<double> window_score;
};

struct GroupInfo {
    std::string name;
    std::vector<std::size_t> members;  // every feature below the group
};

TestNode feature_tree(const FeatureMeta& meta, std::size_t j) {
    TestNode overall{meta.name, TestKind::overall_importance, j, std::nullopt, Decision::untested, 0, {}};
    TestNode ordering{meta.name + "/feature_ordering", TestKind::feature_ordering, j, std::nullopt,
                      Decision::untested, 0, {}};
    TestNode window{meta.name + "/window", TestKind::window_importance, j, std::nullopt, Decision::untested, 0, {}};
    window.children.push_back(
        {meta.name + "/window/ordering", TestKind::window_ordering, j, std::nullopt, Decision::untested, 0, {}});
    overall.children.push_back(std::move(ordering));
    overall.children.push_back(std::move(window));
    return overall;
}

std::vector<std::size_t> collect_members(const FeatureGroup& group, const TemporalDataset& dataset,
                                         std::set<std::string>& group_names, std::vector<bool>& seen,
                                         std::vector<GroupInfo>& groups, TestNode& node) {
    if (group.name.empty()) throw ConfigError("feature group without a name");
    if (!group_names.insert(group.name).second) throw ConfigError("duplicate feature group name: " + group.name);
    if (group.features.empty() && group.subgroups.empty()) throw ConfigError("empty feature group: " + group.name);
    const std::size_t index = groups.size();
    groups.push_back({group.name, {}});
    node = TestNode{"group:" + group.name, TestKind::group_importance, index, std::nullopt, Decision::untested, 0, {}};

    std::vector<std::size_t> members;
    for (const auto& sub : group.subgroups) {
        TestNode child;
        auto sub_members = collect_members(sub, dataset, group_names, seen, groups, child);
        members.insert(members.end(), sub_members.begin(), sub_members.end());
        node.children.push_back(std::move(child));
    }
    for (const auto& name : group.features) {
        std::size_t j = 0;
        try {
            j = dataset.feature_index(name);
        } catch (const InvalidArgument&) {
            throw ConfigError("unknown feature in group " + group.name + ": " + name);
        }
        if (seen[j]) throw ConfigError("feature listed more than once in groups: " + name);
        seen[j] = true;
        members.push_back(j);
        node.children.push_back(feature_tree(dataset.feature_meta()[j], j));
    }
    std::sort(members.begin(), members.end());
    groups[index].members = members;
    return members;
}

double score_or_zero(const std::optional<double>& v) { return v.value_or(0.0); }

void collect_feature_nodes(TestNode& node, std::vector<TestNode*>& out) {
    if (node.kind == TestKind::overall_importance) {
        out.push_back(&node);
        return;
    }
    for (auto& child : node.children) collect_feature_nodes(child, out);
}

void collect_group_nodes(const TestNode& node, std::vector<const TestNode*>& out) {
    if (node.kind != TestKind::group_importance) return;
    out.push_back(&node);
    for (const auto& child : node.children) collect_group_nodes(child, out);
}

}  // namespace

void AnalysisConfig::validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
    if (!(q > 0.0 && q < 1.0)) throw ConfigError("q must lie in (0, 1)");
    if (permutations < 1) throw ConfigError("permutations must be at least 1");
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (parallelism < 1) throw ConfigError("parallelism must be at least 1");
    if (loss && loss->type == LossType::binary_cross_entropy &&
        !(loss->clamp_epsilon > 0.0 && loss->clamp_epsilon < 0.5)) {
        throw ConfigError("cross-entropy clamp epsilon must lie in (0, 0.5)");
    }
}

const FeatureReport& AnalysisReport::feature(const std::string& name) const {
    for (const auto& f : features) {
        if (f.feature == name) return f;
    }
    throw InvalidArgument("no feature named " + name + " in report");
}

std::uint64_t feature_set_unit(std::vector<std::size_t> features) {
    if (features.empty()) throw InvalidArgument("empty feature set");
    std::sort(features.begin(), features.end());
    if (features.size() == 1) return features.front();
    std::uint64_t h = mix64(features.size());
    for (std::size_t j : features) h = mix64(h ^ j);
    return h | kSetTag;
}

AnalysisReport analyze(ModelPool& pool, const TemporalDataset& dataset, const AnalysisConfig& config) {
    config.validate();
    const auto start_time = std::chrono::steady_clock::now();
    const ModelInfo info = pool.info();
    if (info.features != dataset.num_features() || info.timesteps != dataset.sequence_length()) {
        throw ConfigError("model dimensions do not match the dataset");
    }
    if (info.task != dataset.task()) throw ConfigError("model task does not match the dataset task");
    if (dataset.num_instances() < 2) throw ConfigError("analysis needs at least two instances");

    const std::size_t D = dataset.num_features();
    const std::size_t L = dataset.sequence_length();
    const std::size_t M = dataset.num_instances();
    const std::size_t P = config.permutations;
    const LossKind loss = config.loss.value_or(LossKind::for_task(dataset.task()));
    LossEvaluator evaluator(pool, dataset, loss, config.batch_size);

    // Build the test tree.
    std::vector<TestNode> roots;
    std::vector<GroupInfo> groups;
    if (config.feature_groups.empty()) {
        for (std::size_t j = 0; j < D; ++j) roots.push_back(feature_tree(dataset.feature_meta()[j], j));
    } else {
        std::set<std::string> group_names;
        std::vector<bool> seen(D, false);
        for (const auto& group : config.feature_groups) {
            TestNode node;
            collect_members(group, dataset, group_names, seen, groups, node);
            roots.push_back(std::move(node));
        }
        for (std::size_t j = 0; j < D; ++j) {
            if (!seen[j]) {
                throw ConfigError("feature groups do not cover feature " + dataset.feature_meta()[j].name);
            }
        }
    }

    std::vector<FeatureState> states(D);
    const Window full = Window::full(L);
    const std::uint64_t per_round = M;

    const TestRunner runner = [&](TestNode& node) -> double {
        const std::size_t j = node.subject;
        switch (node.kind) {
            case TestKind::group_importance: {
                const auto& members = groups.at(j).members;
                const StreamKey key{config.seed, feature_set_unit(members), StreamKind::importance};
                const auto result = window_importance(evaluator, std::span<const std::size_t>(members), full, P, key);
                node.evaluations = P * per_round;
                return empirical_p(result.baseline, result.round_losses);
            }
            case TestKind::overall_importance: {
                const StreamKey key{config.seed, j, StreamKind::importance};
                const auto result = window_importance(evaluator, j, full, P, key);
                states[j].overall_score = result.score;
                node.evaluations = P * per_round;
                return empirical_p(result.baseline, result.round_losses);
            }
            case TestKind::feature_ordering: {
                if (L < 2) return 1.0;
                const StreamKey key{config.seed, j, StreamKind::feature_ordering};
                const auto rounds = ordering_round_losses(evaluator, j, full, P, key);
                node.evaluations = P * per_round;
                return empirical_p(rounds.baseline, rounds.round_losses);
            }
            case TestKind::window_importance: {
                const StreamKey search_key{config.seed, j, StreamKind::window_search};
                auto search = find_important_window(evaluator, j, config.gamma, P, search_key);
                const StreamKey test_key{config.seed, j, StreamKind::window_test};
                const auto result = window_importance(evaluator, j, search.window, P, test_key);
                node.evaluations = (search.evaluations + 1) * P * per_round;
                states[j].search = std::move(search);
                states[j].window_score = result.score;
                return empirical_p(result.baseline, result.round_losses);
            }
            case TestKind::window_ordering: {
                const Window window = states[j].search.value().window;
                if (window.width() < 2) return 1.0;
                const StreamKey key{config.seed, j, StreamKind::window_ordering};
                const auto rounds = ordering_round_losses(evaluator, j, window, P, key);
                node.evaluations = P * per_round;
                return empirical_p(rounds.baseline, rounds.round_losses);
            }
        }
        throw InvariantError("unknown test kind");
    };

    const std::size_t workers = config.parallelism;
    const ParallelFor parallel = [workers](std::size_t n, const std::function<void(std::size_t)>& fn) {
        parallel_for(n, workers, fn);
    };

    // Baseline first so that its evaluation is not raced by the workers.
    const double baseline = evaluator.baseline_mean_loss();
    hierarchical_fdr(roots, config.q, runner, parallel);

    AnalysisReport report;
    report.config = config;
    report.loss = loss;
    report.timesteps = L;
    report.baseline_mean_loss = baseline;

    std::vector<TestNode*> feature_nodes;
    for (auto& root : roots) collect_feature_nodes(root, feature_nodes);
    std::vector<const TestNode*> group_nodes;
    for (const auto& root : roots) collect_group_nodes(root, group_nodes);
    for (const auto* g : group_nodes) {
        report.groups.push_back({groups.at(g->subject).name, g->p_value, g->decision});
    }

    for (const TestNode* node : feature_nodes) {
        const std::size_t j = node->subject;
        FeatureReport fr;
        fr.feature = dataset.feature_meta()[j].name;
        fr.index = j;
        fr.trace = *node;
        fr.p_overall = node->p_value;
        fr.importance_score = states[j].overall_score;
        fr.important = node->decision == Decision::rejected;
        if (fr.important) {
            const TestNode& ordering = node->children.at(0);
            const TestNode& window = node->children.at(1);
            fr.feature_ordering = OrderingResult{ordering.p_value.value(), ordering.decision == Decision::rejected};
            fr.search = states[j].search;
            fr.window = states[j].search.value().window;
            fr.window_score = states[j].window_score;
            fr.p_window = window.p_value;
            const TestNode& window_ordering = window.children.at(0);
            if (window.decision == Decision::rejected) {
                fr.window_ordering =
                    OrderingResult{window_ordering.p_value.value(), window_ordering.decision == Decision::rejected};
            }
        }
        report.features.push_back(std::move(fr));
    }

    std::sort(report.features.begin(), report.features.end(), [](const FeatureReport& a, const FeatureReport& b) {
        if (a.important != b.important) return a.important;
        if (a.important) {
            const double sa = score_or_zero(a.importance_score);
            const double sb = score_or_zero(b.importance_score);
            if (sa != sb) return sa > sb;
        }
        return a.feature < b.feature;
    });

    report.model_evaluations = evaluator.evaluations();
    report.tree = std::move(roots);
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
    return report;
}

AnalysisReport analyze(const ModelHandle& model, const TemporalDataset& dataset, const AnalysisConfig& config) {
    ModelPool pool(model);
    return analyze(pool, dataset, config);
}

AnalysisReport analyze_with_groups(const ModelHandle& model, const TemporalDataset& dataset,
                                   const AnalysisConfig& config) {
    if (config.feature_groups.empty()) throw ConfigError("analyze_with_groups needs a feature group tree");
    return analyze(model, dataset, config);
}

}  // namespace tix
