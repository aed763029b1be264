#pragma once

#include <cstddef>
#include <optional>

#include "timex/perturbation.hpp"

namespace tix {

struct WindowSearchResult {
    Window window;
    double overall_score = 0.0;     // I(f, j, [1, L])
    // I(f, j, window) on the search rounds; only known when the window is [1, L]
    // (the pipeline scores the window on fresh rounds instead).
    std::optional<double> window_score;
    double prior_score = 0.0;       // last accepted prior window, 0 when empty
    double subsequent_score = 0.0;  // last accepted subsequent window, 0 when empty
    std::size_t evaluations = 0;    // window-importance evaluations performed
    bool degenerate = false;        // overall score <= 0, search skipped
};

// Localizes the window of feature j that carries its importance. Finds the
// largest prior window [1, k1 - 1] and then the largest subsequent window
// [k2 + 1, L] (with k2 >= k1) whose importance stays strictly below
// ((1 - gamma) / 2) * I(f, j, [1, L]), by bisection on each boundary. Empty
// prior/subsequent windows score 0. Every candidate is evaluated on the same
// rounds (the `key` substream), so comparisons between candidates are paired.
WindowSearchResult find_important_window(LossEvaluator& evaluator, std::size_t feature, double gamma,
                                         std::size_t rounds, const StreamKey& key);

// Upper bound on evaluations for sequence length L: 2 * ceil(log2 L) + 2.
std::size_t window_search_budget(std::size_t sequence_length);

}  // namespace tix
