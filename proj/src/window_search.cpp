#include "timex/window_search.hpp"

#include <bit>

#include "timex/errors.hpp"

namespace tix {

std::size_t window_search_budget(std::size_t sequence_length) {
    std::size_t ceil_log2 = 0;
    while ((std::size_t{1} << ceil_log2) < sequence_length) ++ceil_log2;
    return 2 * ceil_log2 + 2;
}

WindowSearchResult find_important_window(LossEvaluator& evaluator, std::size_t feature, double gamma,
                                         std::size_t rounds, const StreamKey& key) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidArgument("gamma must lie in (0, 1)");
    const std::size_t l = evaluator.dataset().sequence_length();
    WindowSearchResult result;
    result.window = Window::full(l);

    auto score = [&](std::size_t first, std::size_t last) {
        ++result.evaluations;
        return window_importance(evaluator, feature, Window{first, last}, rounds, key).score;
    };

    result.overall_score = score(1, l);
    if (result.overall_score <= 0.0) {
        result.degenerate = true;
        result.window_score = result.overall_score;
        return result;
    }
    if (l == 1) {
        result.window_score = result.overall_score;
        return result;
    }
    const double threshold = (1.0 - gamma) / 2.0 * result.overall_score;

    // Prior boundary b: W_P = [1, b]. b = 0 (empty) always satisfies; b = L
    // never does because I(f, j, [1, L]) exceeds the threshold.
    std::size_t lo = 0;
    std::size_t hi = l;
    while (hi - lo > 1) {
        const std::size_t mid = lo + (hi - lo) / 2;
        const double s = score(1, mid);
        if (s < threshold) {
            lo = mid;
            result.prior_score = s;
        } else {
            hi = mid;
        }
    }
    const std::size_t k1 = lo + 1;

    // Subsequent boundary c: W_S = [c, L], c in {k1 + 1, ..., L + 1}. c = L + 1
    // (empty) always satisfies; the first estimate is c = k1 + 1.
    std::size_t c_fail = k1;
    std::size_t c_ok = l + 1;
    if (k1 + 1 <= l) {
        const double s = score(k1 + 1, l);
        if (s < threshold) {
            c_ok = k1 + 1;
            result.subsequent_score = s;
        } else {
            c_fail = k1 + 1;
        }
    }
    while (c_ok - c_fail > 1) {
        const std::size_t mid = c_fail + (c_ok - c_fail) / 2;
        const double s = score(mid, l);
        if (s < threshold) {
            c_ok = mid;
            result.subsequent_score = s;
        } else {
            c_fail = mid;
        }
    }
    result.window = Window{k1, c_ok - 1};
    if (result.window == Window::full(l)) result.window_score = result.overall_score;
    return result;
}

}  // namespace tix
