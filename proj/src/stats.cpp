#include "timex/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "timex/errors.hpp"

namespace tix {

double empirical_p(double baseline_mean_loss, std::span<const double> round_losses) {
    if (round_losses.empty()) throw InvalidArgument("empirical p-value needs at least one round");
    std::size_t at_or_below = 0;
    for (double loss : round_losses) {
        if (!std::isfinite(loss)) throw InvalidArgument("non-finite round loss");
        if (loss <= baseline_mean_loss) ++at_or_below;
    }
    return static_cast<double>(at_or_below + 1) / static_cast<double>(round_losses.size() + 1);
}

std::vector<std::size_t> bh_reject(std::span<const double> p_values, double q) {
    if (!(q > 0.0 && q < 1.0)) throw InvalidArgument("FDR level q must lie in (0, 1)");
    const std::size_t m = p_values.size();
    for (double p : p_values) {
        if (!(p > 0.0 && p <= 1.0)) throw InvalidArgument("p-values must lie in (0, 1]");
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
    std::optional<double> cutoff;
    for (std::size_t rank = m; rank >= 1; --rank) {
        const double p = p_values[order[rank - 1]];
        if (p <= static_cast<double>(rank) * q / static_cast<double>(m)) {
            cutoff = p;
            break;
        }
    }
    std::vector<std::size_t> rejected;
    if (!cutoff) return rejected;
    for (std::size_t i = 0; i < m; ++i) {
        if (p_values[i] <= *cutoff) rejected.push_back(i);
    }
    return rejected;
}

std::string to_string(TestKind kind) {
    switch (kind) {
        case TestKind::group_importance: return "group_importance";
        case TestKind::overall_importance: return "overall_importance";
        case TestKind::window_importance: return "window_importance";
        case TestKind::feature_ordering: return "feature_ordering";
        case TestKind::window_ordering: return "window_ordering";
    }
    return "unknown";
}

std::string to_string(Decision decision) {
    switch (decision) {
        case Decision::untested: return "untested";
        case Decision::rejected: return "rejected";
        case Decision::accepted: return "accepted";
    }
    return "unknown";
}

void sequential_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
}

void hierarchical_fdr(std::vector<TestNode>& root_family, double q, const TestRunner& runner,
                      const ParallelFor& parallel) {
    if (!(q > 0.0 && q < 1.0)) throw InvalidArgument("FDR level q must lie in (0, 1)");
    std::vector<std::vector<TestNode>*> level{&root_family};
    while (!level.empty()) {
        std::vector<TestNode*> nodes;
        for (auto* family : level) {
            for (auto& node : *family) nodes.push_back(&node);
        }
        parallel(nodes.size(), [&](std::size_t n) {
            TestNode& node = *nodes[n];
            double p = 0.0;
            try {
                p = runner(node);
            } catch (const AnalysisError&) {
                throw;
            } catch (const std::exception& e) {
                throw AnalysisError(node.id, e.what());
            }
            if (!(p > 0.0 && p <= 1.0)) throw AnalysisError(node.id, "p-value outside (0, 1]");
            node.p_value = p;
        });

        std::vector<std::vector<TestNode>*> next;
        for (auto* family : level) {
            std::vector<double> ps;
            ps.reserve(family->size());
            for (const auto& node : *family) ps.push_back(*node.p_value);
            const auto rejected = bh_reject(ps, q);
            for (auto& node : *family) node.decision = Decision::accepted;
            for (std::size_t idx : rejected) {
                TestNode& node = (*family)[idx];
                node.decision = Decision::rejected;
                if (!node.children.empty()) next.push_back(&node.children);
            }
        }
        level = std::move(next);
    }
}

}  // namespace tix
