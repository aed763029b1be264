#pragma once

// Independent reference implementations used by the unit tests and the
// acceptance binary.

#include <algorithm>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "timex/evaluation.hpp"
#include "timex/pipeline.hpp"
#include "timex/synthetic.hpp"

namespace oracle {

// BH by its definition: the largest k with at least k p-values <= k q / m;
// the k smallest p-values are rejected, ties kept together.
inline std::vector<std::size_t> bh(const std::vector<double>& p, double q) {
    const std::size_t m = p.size();
    std::size_t best = 0;
    for (std::size_t k = 1; k <= m; ++k) {
        std::size_t below = 0;
        for (double v : p) below += v <= static_cast<double>(k) * q / static_cast<double>(m) ? 1 : 0;
        if (below >= k) best = k;
    }
    std::vector<std::size_t> out;
    if (best == 0) return out;
    auto sorted = p;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < m; ++i) {
        if (p[i] <= sorted[best - 1]) out.push_back(i);
    }
    return out;
}

// Exhaustive subset search: the largest rejection set R (ties broken by
// preferring smaller p) such that every p in R is <= |R| q / m and R holds
// the |R| smallest p-values.
inline std::vector<std::size_t> bh_subsets(const std::vector<double>& p, double q) {
    const std::size_t m = p.size();
    std::vector<std::size_t> best;
    for (std::size_t mask = 1; mask < (std::size_t{1} << m); ++mask) {
        std::vector<std::size_t> set;
        for (std::size_t i = 0; i < m; ++i) {
            if (mask >> i & 1) set.push_back(i);
        }
        const double cut = static_cast<double>(set.size()) * q / static_cast<double>(m);
        double worst_in = 0.0;
        for (std::size_t i : set) worst_in = std::max(worst_in, p[i]);
        if (worst_in > cut) continue;
        bool closed = true;  // nothing outside is at or below the largest inside
        for (std::size_t i = 0; i < m; ++i) {
            if (!(mask >> i & 1) && p[i] <= worst_in) closed = false;
        }
        if (closed && set.size() > best.size()) best = set;
    }
    return best;
}

struct Confusion {
    std::size_t tp = 0, fp = 0, fn = 0;
};

inline Confusion count(const std::set<std::pair<std::size_t, std::size_t>>& claimed,
                       const std::set<std::pair<std::size_t, std::size_t>>& truth) {
    Confusion c;
    for (const auto& x : claimed) (truth.count(x) ? c.tp : c.fp)++;
    for (const auto& x : truth) c.fn += claimed.count(x) ? 0 : 1;
    return c;
}

// Confusion counts of a report, built from sets of (feature, timestep) pairs.
struct ReportConfusion {
    Confusion feature, timestep, feature_ordering, window_ordering;
};

inline ReportConfusion confusion(const tix::AnalysisReport& report, const tix::GroundTruth& truth) {
    using Set = std::set<std::pair<std::size_t, std::size_t>>;
    Set f_claim, f_true, t_claim, t_true, fo_claim, fo_true, wo_claim, wo_true;
    auto index_of = [&](const std::string& name) {
        return static_cast<std::size_t>(std::find(truth.feature_names.begin(), truth.feature_names.end(), name) -
                                        truth.feature_names.begin());
    };
    for (const auto& f : report.features) {
        if (!f.important) continue;
        const std::size_t j = index_of(f.feature);
        f_claim.insert({j, 0});
        if (f.window) {
            for (std::size_t k = f.window->start; k <= f.window->end; ++k) t_claim.insert({j, k});
        }
        if (f.feature_ordering && f.feature_ordering->important) fo_claim.insert({j, 0});
        if (f.window_ordering && f.window_ordering->important) wo_claim.insert({j, 0});
    }
    for (std::size_t j = 0; j < truth.num_features(); ++j) {
        if (!truth.relevant[j]) continue;
        f_true.insert({j, 0});
        for (std::size_t k = truth.windows[j].start; k <= truth.windows[j].end; ++k) t_true.insert({j, k});
        if (truth.windows[j] != tix::Window::full(truth.timesteps)) fo_true.insert({j, 0});
        if (truth.window_ordering[j]) wo_true.insert({j, 0});
    }
    return {count(f_claim, f_true), count(t_claim, t_true), count(fo_claim, fo_true), count(wo_claim, wo_true)};
}

inline tix::Window random_window(std::size_t l, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> pick(1, l);
    std::size_t a = pick(rng), b = pick(rng);
    return {std::min(a, b), std::max(a, b)};
}

// Random truth over D features named x1.. and a random report about it.
inline std::pair<tix::AnalysisReport, tix::GroundTruth> random_case(std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> dim(1, 6);
    std::bernoulli_distribution coin(0.5);
    const std::size_t d = dim(rng);
    const std::size_t l = dim(rng);
    tix::GroundTruth truth;
    truth.timesteps = l;
    tix::AnalysisReport report;
    report.timesteps = l;
    for (std::size_t j = 0; j < d; ++j) {
        const std::string name = "x" + std::to_string(j + 1);
        truth.feature_names.push_back(name);
        const bool relevant = coin(rng);
        truth.relevant.push_back(relevant);
        truth.windows.push_back(random_window(l, rng));
        truth.window_ordering.push_back(relevant && coin(rng));
        truth.feature_ordering.push_back(relevant && truth.windows.back() != tix::Window::full(l));

        tix::FeatureReport f;
        f.feature = name;
        f.index = j;
        f.important = coin(rng);
        if (f.important) {
            f.window = random_window(l, rng);
            f.importance_score = 1.0;
            f.feature_ordering = tix::OrderingResult{0.5, coin(rng)};
            if (coin(rng)) f.window_ordering = tix::OrderingResult{0.5, coin(rng)};
        }
        report.features.push_back(f);
    }
    std::shuffle(report.features.begin(), report.features.end(), rng);
    return {report, truth};
}

inline bool matches(const tix::EvalMetrics& m, const Confusion& c) {
    return m.tp == c.tp && m.fp == c.fp && m.fn == c.fn &&
           m.power == (c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn)) &&
           m.fdr == (c.tp + c.fp == 0 ? 0.0 : static_cast<double>(c.fp) / static_cast<double>(c.tp + c.fp));
}

inline bool matches(const tix::EvalScores& s, const ReportConfusion& c) {
    return matches(s.feature, c.feature) && matches(s.timestep, c.timestep) &&
           matches(s.feature_ordering, c.feature_ordering) && matches(s.window_ordering, c.window_ordering);
}

}  // namespace oracle
