#include "timex/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "timex/errors.hpp"
#include "timex/parallel.hpp"
#include "timex/perturbation.hpp"
#include "timex/stats.hpp"

namespace tix {

namespace {

EvalMetrics compare(const std::vector<bool>& identified, const std::vector<bool>& truth) {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    for (std::size_t n = 0; n < truth.size(); ++n) {
        if (identified[n] && truth[n]) ++tp;
        if (identified[n] && !truth[n]) ++fp;
        if (!identified[n] && truth[n]) ++fn;
    }
    return EvalMetrics::from_counts(tp, fp, fn);
}

std::vector<bool> flatten(const std::vector<std::vector<bool>>& cells) {
    std::vector<bool> out;
    for (const auto& row : cells) out.insert(out.end(), row.begin(), row.end());
    return out;
}

double elapsed(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

EvalMetrics EvalMetrics::from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
    EvalMetrics m;
    m.tp = tp;
    m.fp = fp;
    m.fn = fn;
    m.power = static_cast<double>(tp) / static_cast<double>(std::max<std::size_t>(1, tp + fn));
    m.fdr = static_cast<double>(fp) / static_cast<double>(std::max<std::size_t>(1, tp + fp));
    return m;
}

Explanation Explanation::empty(std::size_t features, std::size_t timesteps) {
    Explanation e;
    e.features.assign(features, false);
    e.timesteps.assign(features, std::vector<bool>(timesteps, false));
    e.feature_ordering.assign(features, false);
    e.window_ordering.assign(features, false);
    return e;
}

EvalScores score_explanation(const Explanation& explanation, const GroundTruth& truth) {
    const std::size_t D = truth.num_features();
    const std::size_t L = truth.timesteps;
    if (explanation.features.size() != D || explanation.timesteps.size() != D ||
        explanation.feature_ordering.size() != D || explanation.window_ordering.size() != D) {
        throw InvalidArgument("explanation and ground truth cover different features");
    }
    std::vector<std::vector<bool>> true_cells(D, std::vector<bool>(L, false));
    for (std::size_t j = 0; j < D; ++j) {
        if (explanation.timesteps[j].size() != L) throw InvalidArgument("explanation has the wrong sequence length");
        if (!truth.relevant[j]) continue;
        for (std::size_t k = truth.windows[j].start; k <= truth.windows[j].end; ++k) true_cells[j][k - 1] = true;
    }
    EvalScores s;
    s.feature = compare(explanation.features, truth.relevant);
    s.timestep = compare(flatten(explanation.timesteps), flatten(true_cells));
    s.feature_ordering = compare(explanation.feature_ordering, truth.feature_ordering);
    s.window_ordering = compare(explanation.window_ordering, truth.window_ordering);
    return s;
}

Explanation explanation_of(const AnalysisReport& report, const GroundTruth& truth) {
    const std::size_t D = truth.num_features();
    const std::size_t L = truth.timesteps;
    if (report.features.size() != D) throw InvalidArgument("report and ground truth cover different features");
    Explanation e = Explanation::empty(D, L);
    std::vector<bool> seen(D, false);
    for (const auto& f : report.features) {
        const auto it = std::find(truth.feature_names.begin(), truth.feature_names.end(), f.feature);
        if (it == truth.feature_names.end()) throw InvalidArgument("feature " + f.feature + " is not in the ground truth");
        const auto j = static_cast<std::size_t>(it - truth.feature_names.begin());
        if (seen[j]) throw InvalidArgument("feature " + f.feature + " appears twice in the report");
        seen[j] = true;
        if (!f.important) continue;
        e.features[j] = true;
        if (f.window) {
            if (!f.window->valid_for(L)) throw InvalidArgument("reported window does not fit the sequence length");
            for (std::size_t k = f.window->start; k <= f.window->end; ++k) e.timesteps[j][k - 1] = true;
        }
        e.feature_ordering[j] = f.feature_ordering && f.feature_ordering->important;
        e.window_ordering[j] = f.window_ordering && f.window_ordering->important;
    }
    return e;
}

EvalScores score_report(const AnalysisReport& report, const GroundTruth& truth) {
    return score_explanation(explanation_of(report, truth), truth);
}

std::vector<std::size_t> select_top_n(std::span<const double> scores, std::size_t n) {
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (scores[i] != 0.0) order.push_back(i);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    if (order.size() > n) order.resize(n);
    std::sort(order.begin(), order.end());
    return order;
}

CellScores perm_baseline(ModelPool& pool, const TemporalDataset& dataset, const LossKind& loss,
                         std::size_t permutations, std::uint64_t seed, std::size_t parallelism,
                         std::size_t batch_size) {
    if (permutations < 1) throw InvalidArgument("permutations must be at least 1");
    const std::size_t D = dataset.num_features();
    const std::size_t L = dataset.sequence_length();
    LossEvaluator evaluator(pool, dataset, loss, batch_size);
    evaluator.baseline_mean_loss();
    CellScores cells;
    cells.features = D;
    cells.timesteps = L;
    cells.scores.assign(D * L, 0.0);
    cells.p_values.assign(D * L, 1.0);
    parallel_for(D * L, std::max<std::size_t>(1, parallelism), [&](std::size_t cell) {
        const std::size_t j = cell / L;
        const std::size_t k = cell % L + 1;
        const StreamKey key{seed, cell, StreamKind::importance};
        const auto result = window_importance(evaluator, j, Window{k, k}, permutations, key);
        cells.scores[cell] = result.score;
        cells.p_values[cell] = empirical_p(result.baseline, result.round_losses);
    });
    return cells;
}

CellScores perm_baseline(const ModelHandle& model, const TemporalDataset& dataset, const LossKind& loss,
                         std::size_t permutations, std::uint64_t seed, std::size_t parallelism) {
    ModelPool pool(model);
    return perm_baseline(pool, dataset, loss, permutations, seed, parallelism);
}

std::vector<double> perm_feature_scores(const CellScores& cells) {
    std::vector<double> out(cells.features, 0.0);
    for (std::size_t j = 0; j < cells.features; ++j) {
        double total = 0.0;
        std::size_t count = 0;
        for (std::size_t k = 1; k <= cells.timesteps; ++k) {
            const double s = cells.score(j, k);
            if (s != 0.0) {
                total += s;
                ++count;
            }
        }
        out[j] = count == 0 ? 0.0 : total / static_cast<double>(count);
    }
    return out;
}

Explanation perm_top_n(const CellScores& cells, const GroundTruth& truth) {
    if (cells.features != truth.num_features() || cells.timesteps != truth.timesteps) {
        throw InvalidArgument("cell scores and ground truth differ in shape");
    }
    Explanation e = Explanation::empty(cells.features, cells.timesteps);
    const auto feature_scores = perm_feature_scores(cells);
    for (std::size_t j : select_top_n(feature_scores, truth.num_relevant())) e.features[j] = true;
    for (std::size_t cell : select_top_n(cells.scores, truth.num_relevant_timesteps())) {
        e.timesteps[cell / cells.timesteps][cell % cells.timesteps] = true;
    }
    return e;
}

Explanation perm_fdr(const CellScores& cells, double q) {
    Explanation e = Explanation::empty(cells.features, cells.timesteps);
    for (std::size_t cell : bh_reject(cells.p_values, q)) {
        const std::size_t j = cell / cells.timesteps;
        e.timesteps[j][cell % cells.timesteps] = true;
        e.features[j] = true;
    }
    return e;
}

Explanation time_top_n(const AnalysisReport& report, const GroundTruth& truth) {
    const Explanation full = explanation_of(report, truth);
    const std::size_t D = truth.num_features();
    const std::size_t L = truth.timesteps;
    std::vector<double> feature_scores(D, 0.0);
    std::vector<double> cell_scores(D * L, 0.0);
    for (const auto& f : report.features) {
        if (!f.important) continue;
        const auto j = static_cast<std::size_t>(
            std::find(truth.feature_names.begin(), truth.feature_names.end(), f.feature) - truth.feature_names.begin());
        const double s = f.importance_score.value_or(0.0);
        feature_scores[j] = s;
        for (std::size_t k = 1; k <= L; ++k) {
            if (full.timesteps[j][k - 1]) cell_scores[j * L + (k - 1)] = s;
        }
    }
    Explanation e = Explanation::empty(D, L);
    for (std::size_t j : select_top_n(feature_scores, truth.num_relevant())) {
        e.features[j] = true;
        e.feature_ordering[j] = full.feature_ordering[j];
        e.window_ordering[j] = full.window_ordering[j];
    }
    for (std::size_t cell : select_top_n(cell_scores, truth.num_relevant_timesteps())) {
        e.timesteps[cell / L][cell % L] = true;
    }
    return e;
}

std::string to_string(Method method) {
    switch (method) {
        case Method::time: return "TIME";
        case Method::time_n: return "TIME-n";
        case Method::perm: return "PERM";
        case Method::perm_f: return "PERM-f";
    }
    return "unknown";
}

Method method_from_string(const std::string& text) {
    std::string upper;
    for (char c : text) upper.push_back(static_cast<char>(c == '_' ? '-' : std::toupper(static_cast<unsigned char>(c))));
    if (upper == "TIME") return Method::time;
    if (upper == "TIME-N") return Method::time_n;
    if (upper == "PERM") return Method::perm;
    if (upper == "PERM-F") return Method::perm_f;
    throw InvalidArgument("unknown method '" + text + "'");
}

bool has_ordering(Method method) { return method == Method::time || method == Method::time_n; }

std::uint64_t replicate_seed(std::uint64_t seed, std::size_t replicate) {
    return substream_seed({seed, replicate, StreamKind::replicate}, 0);
}

SuiteResult run_suite(const SuiteConfig& config) {
    if (config.methods.empty()) throw InvalidArgument("no methods requested");
    config.analysis.validate();
    auto wants = [&](Method m) {
        return std::find(config.methods.begin(), config.methods.end(), m) != config.methods.end();
    };
    const bool run_time = wants(Method::time) || wants(Method::time_n);
    const bool run_perm = wants(Method::perm) || wants(Method::perm_f);

    SuiteResult result;
    result.replicates.resize(config.replicates);
    parallel_for(config.replicates, std::max<std::size_t>(1, config.parallelism), [&](std::size_t r) {
        ReplicateResult& rep = result.replicates[r];
        rep.index = r;
        rep.seed = replicate_seed(config.seed, r);
        try {
            BenchmarkConfig bench = config.benchmark;
            bench.seed = rep.seed;
            const Benchmark benchmark = make_benchmark(bench);
            const ModelHandle model = make_synthetic_model(benchmark.model);
            AnalysisConfig analysis = config.analysis;
            analysis.seed = rep.seed;
            analysis.parallelism = 1;
            if (run_time) {
                const auto start = std::chrono::steady_clock::now();
                const AnalysisReport report = analyze(model, benchmark.dataset, analysis);
                const double seconds = elapsed(start);
                if (wants(Method::time)) {
                    rep.scores[Method::time] = score_report(report, benchmark.truth);
                    rep.runtime_seconds[Method::time] = seconds;
                }
                if (wants(Method::time_n)) {
                    rep.scores[Method::time_n] =
                        score_explanation(time_top_n(report, benchmark.truth), benchmark.truth);
                    rep.runtime_seconds[Method::time_n] = seconds;
                }
            }
            if (run_perm) {
                const LossKind loss = analysis.loss.value_or(LossKind::for_task(benchmark.dataset.task()));
                const auto start = std::chrono::steady_clock::now();
                const CellScores cells = perm_baseline(model, benchmark.dataset, loss, analysis.permutations,
                                                       rep.seed, 1);
                const double seconds = elapsed(start);
                if (wants(Method::perm)) {
                    rep.scores[Method::perm] = score_explanation(perm_top_n(cells, benchmark.truth), benchmark.truth);
                    rep.runtime_seconds[Method::perm] = seconds;
                }
                if (wants(Method::perm_f)) {
                    rep.scores[Method::perm_f] =
                        score_explanation(perm_fdr(cells, analysis.q), benchmark.truth);
                    rep.runtime_seconds[Method::perm_f] = seconds;
                }
            }
            rep.ok = true;
        } catch (const std::exception& e) {
            rep.ok = false;
            rep.error = e.what();
            rep.scores.clear();
            rep.runtime_seconds.clear();
        }
    });

    for (const auto& rep : result.replicates) {
        if (!rep.ok) ++result.failed;
    }
    for (Method m : config.methods) {
        MethodSummary summary;
        summary.method = m;
        std::vector<double> runtimes;
        std::size_t n = 0;
        auto accumulate = [](EvalMetrics& into, const EvalMetrics& from) {
            into.power += from.power;
            into.fdr += from.fdr;
            into.tp += from.tp;
            into.fp += from.fp;
            into.fn += from.fn;
        };
        for (const auto& rep : result.replicates) {
            if (!rep.ok) continue;
            const EvalScores& s = rep.scores.at(m);
            accumulate(summary.mean.feature, s.feature);
            accumulate(summary.mean.timestep, s.timestep);
            accumulate(summary.mean.feature_ordering, s.feature_ordering);
            accumulate(summary.mean.window_ordering, s.window_ordering);
            runtimes.push_back(rep.runtime_seconds.at(m));
            ++n;
        }
        if (n > 0) {
            for (EvalMetrics* metric : {&summary.mean.feature, &summary.mean.timestep,
                                        &summary.mean.feature_ordering, &summary.mean.window_ordering}) {
                metric->power /= static_cast<double>(n);
                metric->fdr /= static_cast<double>(n);
            }
        }
        summary.median_runtime_seconds = median(runtimes);
        result.summary.push_back(summary);
    }
    return result;
}

std::string suite_to_csv(const SuiteResult& result, bool include_runtime) {
    std::ostringstream out;
    out << "method,feature_power,feature_fdr,timestep_power,timestep_fdr,feature_ordering_power,"
           "feature_ordering_fdr,window_ordering_power,window_ordering_fdr,median_runtime_seconds\n";
    for (const auto& s : result.summary) {
        out << to_string(s.method) << ',' << format_number(s.mean.feature.power) << ','
            << format_number(s.mean.feature.fdr) << ',' << format_number(s.mean.timestep.power) << ','
            << format_number(s.mean.timestep.fdr) << ',';
        if (has_ordering(s.method)) {
            out << format_number(s.mean.feature_ordering.power) << ',' << format_number(s.mean.feature_ordering.fdr)
                << ',' << format_number(s.mean.window_ordering.power) << ','
                << format_number(s.mean.window_ordering.fdr) << ',';
        } else {
            out << "NA,NA,NA,NA,";
        }
        out << (include_runtime ? format_number(s.median_runtime_seconds) : std::string("NA")) << '\n';
    }
    return out.str();
}

}  // namespace tix
