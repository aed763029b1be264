#include "timex/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "timex/errors.hpp"
#include "timex/rng.hpp"

namespace tix {

using nlohmann::ordered_json;

namespace {

constexpr int kMaxFunctionDraws = 16;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

std::size_t uniform_index(Rng& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

std::size_t draw_state(const std::vector<double>& probabilities, Rng& rng) {
    const double u = uniform(rng, 0.0, 1.0);
    double cumulative = 0.0;
    for (std::size_t s = 0; s < probabilities.size(); ++s) {
        cumulative += probabilities[s];
        if (u < cumulative) return s;
    }
    return probabilities.size() - 1;
}

MarkovChainSpec draw_chain(FeatureKind kind, Rng& rng) {
    MarkovChainSpec chain;
    chain.kind = kind;
    const std::size_t states = uniform_index(rng, 2, 5);
    if (kind == FeatureKind::continuous) {
        for (std::size_t s = 0; s < states; ++s) {
            chain.means.push_back(uniform(rng, -1.0, 1.0));
            chain.sds.push_back(uniform(rng, 0.1, 1.0));
        }
    } else {
        // Distinct integers so that no chain is constant.
        std::vector<double> pool(10);
        std::iota(pool.begin(), pool.end(), 0.0);
        std::shuffle(pool.begin(), pool.end(), rng);
        chain.values.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(states));
    }
    for (std::size_t s = 0; s < states; ++s) {
        std::vector<double> row(states);
        double total = 0.0;
        for (double& p : row) {
            p = uniform(rng, 0.0, 1.0);
            total += p;
        }
        if (!(total > 0.0)) {
            std::fill(row.begin(), row.end(), 1.0);
            total = static_cast<double>(states);
        }
        for (double& p : row) p /= total;
        chain.transitions.push_back(std::move(row));
    }
    chain.initial.assign(states, 1.0 / static_cast<double>(states));
    return chain;
}

double emit(const MarkovChainSpec& chain, std::size_t state, Rng& rng) {
    if (chain.kind == FeatureKind::categorical) return chain.values[state];
    return chain.means[state] + chain.sds[state] * std::normal_distribution<double>(0.0, 1.0)(rng);
}

std::vector<double> make_weights(Aggregator aggregator, std::size_t width, Rng& rng) {
    std::vector<double> w;
    if (aggregator == Aggregator::monotonic_weighted_average) {
        for (std::size_t n = 0; n < width; ++n) w.push_back(static_cast<double>(n + 1));
    } else if (aggregator == Aggregator::random_weighted_average) {
        for (std::size_t n = 0; n < width; ++n) w.push_back(uniform(rng, 0.0, 1.0));
    } else {
        return w;
    }
    double total = 0.0;
    for (double v : w) total += v;
    if (!(total > 0.0)) {
        std::fill(w.begin(), w.end(), 1.0);
        total = static_cast<double>(width);
    }
    for (double& v : w) v /= total;
    return w;
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

ordered_json window_json(const Window& w) { return {{"start", w.start}, {"end", w.end}}; }

Window window_from_json(const ordered_json& doc) {
    return {doc.at("start").get<std::size_t>(), doc.at("end").get<std::size_t>()};
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

struct Parts {
    std::vector<double> relevant;
    std::vector<double> irrelevant;
};

Parts score_parts(const SyntheticModelSpec& spec, const TemporalDataset& dataset) {
    Parts parts;
    parts.relevant.reserve(dataset.num_instances());
    parts.irrelevant.reserve(dataset.num_instances());
    for (std::size_t i = 0; i < dataset.num_instances(); ++i) {
        const auto [a, b] = spec.parts(dataset.instance(i));
        parts.relevant.push_back(a);
        parts.irrelevant.push_back(b);
    }
    return parts;
}

double metric_from_parts(const Parts& parts, const SyntheticModelSpec& spec, const TemporalDataset& dataset,
                         TuningMetric metric, double beta) {
    const auto& y = dataset.targets();
    const std::size_t m = y.size();
    if (metric == TuningMetric::accuracy) {
        std::size_t correct = 0;
        for (std::size_t i = 0; i < m; ++i) {
            const double f = parts.relevant[i] + beta * parts.irrelevant[i];
            const bool positive = f > spec.threshold;
            if (positive == (y[i] > 0.5)) ++correct;
        }
        return static_cast<double>(correct) / static_cast<double>(m);
    }
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(m);
    double ss_tot = 0.0;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double f = parts.relevant[i] + beta * parts.irrelevant[i];
        ss_res += (y[i] - f) * (y[i] - f);
        ss_tot += (y[i] - mean) * (y[i] - mean);
    }
    if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity();
    return 1.0 - ss_res / ss_tot;
}

}  // namespace

void MarkovChainSpec::validate() const {
    const std::size_t n = num_states();
    if (n < 2 || n > 5) throw InvalidArgument("a chain needs between 2 and 5 states");
    if (initial.size() != n) throw InvalidArgument("initial distribution has the wrong size");
    if (kind == FeatureKind::continuous) {
        if (means.size() != n || sds.size() != n) throw InvalidArgument("emission parameters have the wrong size");
        for (double sd : sds) {
            if (!(sd > 0.0)) throw InvalidArgument("emission sd must be positive");
        }
    } else {
        if (values.size() != n) throw InvalidArgument("categorical values have the wrong size");
        for (double v : values) {
            if (v != std::round(v)) throw InvalidArgument("categorical values must be integers");
        }
    }
    auto check_row = [](const std::vector<double>& row) {
        double total = 0.0;
        for (double p : row) {
            if (!(p >= 0.0)) throw InvalidArgument("negative probability");
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-12) throw InvalidArgument("probabilities do not sum to 1");
    };
    for (const auto& row : transitions) {
        if (row.size() != n) throw InvalidArgument("transition row has the wrong size");
        check_row(row);
    }
    check_row(initial);
}

std::string to_string(Aggregator a) {
    switch (a) {
        case Aggregator::max: return "max";
        case Aggregator::average: return "average";
        case Aggregator::monotonic_weighted_average: return "monotonic_weighted_average";
        case Aggregator::random_weighted_average: return "random_weighted_average";
    }
    return "unknown";
}

std::string to_string(Interaction i) {
    switch (i) {
        case Interaction::identity: return "identity";
        case Interaction::absolute_value: return "absolute_value";
        case Interaction::square: return "square";
    }
    return "unknown";
}

Aggregator aggregator_from_string(const std::string& text) {
    for (Aggregator a : kAllAggregators) {
        if (to_string(a) == text) return a;
    }
    throw FormatError("unknown aggregator '" + text + "'");
}

Interaction interaction_from_string(const std::string& text) {
    for (Interaction i : {Interaction::identity, Interaction::absolute_value, Interaction::square}) {
        if (to_string(i) == text) return i;
    }
    throw FormatError("unknown interaction '" + text + "'");
}

std::string to_string(TuningMetric m) { return m == TuningMetric::accuracy ? "accuracy" : "r_squared"; }

double FeatureFunctionSpec::raw(std::span<const double> series) const {
    const auto values = series.subspan(window.start - 1, window.width());
    double a = 0.0;
    switch (aggregator) {
        case Aggregator::max:
            a = *std::max_element(values.begin(), values.end());
            break;
        case Aggregator::average: {
            // Summed in sorted order so that reordering the window leaves the
            // result bit-identical.
            thread_local std::vector<double> sorted;
            sorted.assign(values.begin(), values.end());
            std::sort(sorted.begin(), sorted.end());
            for (double v : sorted) a += v;
            a /= static_cast<double>(values.size());
            break;
        }
        case Aggregator::monotonic_weighted_average:
        case Aggregator::random_weighted_average:
            for (std::size_t n = 0; n < values.size(); ++n) a += weights[n] * values[n];
            break;
    }
    switch (interaction) {
        case Interaction::identity: return a;
        case Interaction::absolute_value: return std::abs(a);
        case Interaction::square: return a * a;
    }
    return a;
}

void SyntheticModelSpec::validate() const {
    const std::size_t d = num_features();
    if (d == 0 || timesteps == 0) throw InvalidArgument("synthetic model needs features and timesteps");
    if (relevant.size() != d || functions.size() != d) throw InvalidArgument("per-feature fields have the wrong size");
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw InvalidArgument("beta must be finite and non-negative");
    if (!(link_scale > 0.0)) throw InvalidArgument("link scale must be positive");
    for (const auto& fn : functions) {
        check_window(fn.window, timesteps);
        if (!(fn.sd > 0.0)) throw InvalidArgument("standardizer sd must be positive");
        if (fn.ordering_sensitive()) {
            if (fn.weights.size() != fn.window.width()) throw InvalidArgument("weight vector has the wrong size");
            double total = 0.0;
            for (double w : fn.weights) {
                if (!(w >= 0.0)) throw InvalidArgument("weights must be non-negative");
                total += w;
            }
            if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("weights must sum to 1");
        }
    }
}

std::pair<double, double> SyntheticModelSpec::parts(std::span<const double> instance) const {
    double a = 0.0;
    double b = 0.0;
    for (std::size_t j = 0; j < functions.size(); ++j) {
        const auto series = instance.subspan(j * timesteps, timesteps);
        if (relevant[j]) {
            a += functions[j].alpha * functions[j](series);
        } else {
            b += functions[j].alpha * functions[j](series);
        }
    }
    return {a, b};
}

double SyntheticModelSpec::score(std::span<const double> instance) const {
    double a = 0.0;
    double b = 0.0;
    for (std::size_t j = 0; j < functions.size(); ++j) {
        const auto series = instance.subspan(j * timesteps, timesteps);
        if (relevant[j]) {
            a += functions[j].alpha * functions[j](series);
        } else if (beta != 0.0) {
            b += functions[j].alpha * functions[j](series);
        }
    }
    return a + beta * b;
}

double SyntheticModelSpec::output(std::span<const double> instance) const {
    const double f = score(instance);
    if (task == Task::regression) return f;
    if (std::isinf(link_scale)) {
        if (f > threshold) return 1.0;
        if (f < threshold) return 0.0;
        return 0.5;
    }
    return sigmoid(link_scale * (f - threshold));
}

std::size_t GroundTruth::num_relevant() const {
    return static_cast<std::size_t>(std::count(relevant.begin(), relevant.end(), true));
}

std::size_t GroundTruth::num_relevant_timesteps() const {
    std::size_t n = 0;
    for (std::size_t j = 0; j < relevant.size(); ++j) {
        if (relevant[j]) n += windows[j].width();
    }
    return n;
}

GroundTruth ground_truth_of(const SyntheticModelSpec& spec) {
    GroundTruth truth;
    truth.feature_names = spec.feature_names;
    truth.relevant = spec.relevant;
    truth.timesteps = spec.timesteps;
    for (std::size_t j = 0; j < spec.num_features(); ++j) {
        const auto& fn = spec.functions[j];
        truth.windows.push_back(fn.window);
        truth.window_ordering.push_back(spec.relevant[j] && fn.ordering_sensitive());
        truth.feature_ordering.push_back(spec.relevant[j] && fn.window != Window::full(spec.timesteps));
    }
    return truth;
}

GeneratedData generate_dataset(std::size_t num_instances, std::size_t num_features, std::size_t sequence_length,
                               std::uint64_t seed, double fraction_categorical, double fraction_trend) {
    if (num_instances < 2) throw InvalidArgument("need at least two instances");
    if (num_features < 1 || sequence_length < 1) throw InvalidArgument("need at least one feature and timestep");
    if (!(fraction_categorical >= 0.0 && fraction_categorical <= 1.0)) {
        throw InvalidArgument("fraction_categorical must lie in [0, 1]");
    }
    if (!(fraction_trend >= 0.0 && fraction_trend <= 1.0)) throw InvalidArgument("fraction_trend must lie in [0, 1]");

    const std::size_t M = num_instances;
    const std::size_t D = num_features;
    const std::size_t L = sequence_length;

    Rng layout = round_stream({seed, 0, StreamKind::generation}, 0);
    std::vector<std::size_t> order(D);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), layout);
    const auto n_categorical = static_cast<std::size_t>(std::llround(fraction_categorical * static_cast<double>(D)));
    std::vector<FeatureKind> kinds(D, FeatureKind::continuous);
    for (std::size_t n = 0; n < n_categorical; ++n) kinds[order[n]] = FeatureKind::categorical;
    std::vector<std::size_t> continuous(order.begin() + static_cast<std::ptrdiff_t>(n_categorical), order.end());
    std::sort(continuous.begin(), continuous.end());
    std::shuffle(continuous.begin(), continuous.end(), layout);
    const auto n_trend =
        static_cast<std::size_t>(std::llround(fraction_trend * static_cast<double>(continuous.size())));
    std::vector<bool> trend(D, false);
    for (std::size_t n = 0; n < n_trend; ++n) trend[continuous[n]] = true;

    std::vector<FeatureGenSpec> specs(D);
    std::vector<double> values(M * D * L);
    std::vector<FeatureMeta> meta;
    for (std::size_t j = 0; j < D; ++j) {
        Rng rng = round_stream({seed, j + 1, StreamKind::generation}, 0);
        auto& spec = specs[j];
        spec.kind = kinds[j];
        spec.trend = trend[j];
        if (L == 1) {
            spec.window = {1, 1};
        } else {
            const std::size_t k1 = uniform_index(rng, 1, L - 1);
            spec.window = {k1, uniform_index(rng, k1 + 1, L)};
        }
        spec.in_chain = draw_chain(spec.kind, rng);
        spec.out_chain = draw_chain(spec.kind, rng);
        meta.push_back({"x" + std::to_string(j + 1), spec.kind});

        Rng walk = round_stream({seed, j + 1, StreamKind::generation}, 1);
        for (std::size_t i = 0; i < M; ++i) {
            double* x = values.data() + i * D * L + j * L;
            bool out_started = false;
            std::size_t out_state = 0;
            std::size_t in_state = 0;
            double running = 0.0;
            for (std::size_t t = 1; t <= L; ++t) {
                double s = 0.0;
                if (spec.window.contains(t)) {
                    in_state = t == spec.window.start ? draw_state(spec.in_chain.initial, walk)
                                                      : draw_state(spec.in_chain.transitions[in_state], walk);
                    s = emit(spec.in_chain, in_state, walk);
                } else {
                    out_state = out_started ? draw_state(spec.out_chain.transitions[out_state], walk)
                                            : draw_state(spec.out_chain.initial, walk);
                    out_started = true;
                    s = emit(spec.out_chain, out_state, walk);
                }
                if (spec.trend) {
                    running += s;
                    s = running;
                }
                x[t - 1] = s;
            }
        }
    }
    TemporalDataset dataset(M, D, L, std::move(values), std::vector<double>(M, 0.0), Task::regression,
                            std::move(meta));
    return {std::move(dataset), std::move(specs)};
}

GroundTruthBuild build_ground_truth(const TemporalDataset& dataset, const std::vector<FeatureGenSpec>& gen,
                                    std::size_t num_relevant, std::uint64_t seed,
                                    const GroundTruthOptions& options) {
    const std::size_t M = dataset.num_instances();
    const std::size_t D = dataset.num_features();
    const std::size_t L = dataset.sequence_length();
    if (gen.size() != D) throw InvalidArgument("one generator spec per feature is required");
    if (num_relevant > D) throw InvalidArgument("more relevant features than features");
    if (options.aggregators.empty()) throw InvalidArgument("no aggregator kinds to draw from");

    Rng rng = round_stream({seed, 0, StreamKind::ground_truth}, 0);
    std::vector<std::size_t> order(D);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    GroundTruthBuild out;
    auto& spec = out.model;
    spec.timesteps = L;
    spec.task = options.task;
    spec.relevant.assign(D, false);
    for (std::size_t n = 0; n < num_relevant; ++n) spec.relevant[order[n]] = true;
    for (const auto& m : dataset.feature_meta()) spec.feature_names.push_back(m.name);

    std::vector<std::vector<double>> g(D);
    for (std::size_t j = 0; j < D; ++j) {
        FeatureFunctionSpec fn;
        fn.window = gen[j].window;
        check_window(fn.window, L);
        std::vector<double> raw(M);
        bool ok = false;
        for (int attempt = 0; attempt < kMaxFunctionDraws && !ok; ++attempt) {
            fn.aggregator = options.aggregators[uniform_index(rng, 0, options.aggregators.size() - 1)];
            fn.interaction = static_cast<Interaction>(uniform_index(rng, 0, 2));
            fn.weights = make_weights(fn.aggregator, fn.window.width(), rng);
            fn.mean = 0.0;
            fn.sd = 1.0;
            double mean = 0.0;
            for (std::size_t i = 0; i < M; ++i) {
                raw[i] = fn.raw(dataset.series(i, j));
                mean += raw[i];
            }
            mean /= static_cast<double>(M);
            double var = 0.0;
            for (double v : raw) var += (v - mean) * (v - mean);
            var /= static_cast<double>(M);
            const double sd = std::sqrt(var);
            if (sd > 1e-12 * std::max(1.0, std::abs(mean))) {
                fn.mean = mean;
                fn.sd = sd;
                ok = true;
            }
        }
        if (!ok) throw GenerationError("feature function of " + spec.feature_names[j] + " has zero variance");
        fn.alpha = uniform(rng, -1.0, 1.0);
        g[j].resize(M);
        for (std::size_t i = 0; i < M; ++i) g[j][i] = fn(dataset.series(i, j));
        spec.functions.push_back(std::move(fn));
    }

    std::vector<double> y(M);
    for (std::size_t i = 0; i < M; ++i) y[i] = spec.parts(dataset.instance(i)).first;

    if (options.task == Task::classification) {
        std::vector<std::size_t> rank(M);
        std::iota(rank.begin(), rank.end(), std::size_t{0});
        std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) { return y[a] > y[b]; });
        const std::size_t positives = (M + 1) / 2;
        std::vector<double> labels(M, 0.0);
        for (std::size_t n = 0; n < positives; ++n) labels[rank[n]] = 1.0;
        spec.threshold = positives < M ? 0.5 * (y[rank[positives - 1]] + y[rank[positives]]) : y[rank.back()];
        out.targets = std::move(labels);
    } else {
        out.targets = std::move(y);
    }
    out.truth = ground_truth_of(spec);
    return out;
}

ModelHandle make_synthetic_model(const SyntheticModelSpec& spec) {
    spec.validate();
    auto shared = std::make_shared<const SyntheticModelSpec>(spec);
    return make_in_process_model(spec.info(),
                                 [shared](std::span<const double> instance) { return shared->output(instance); });
}

double model_metric(const SyntheticModelSpec& spec, const TemporalDataset& dataset, TuningMetric metric,
                    double beta) {
    return metric_from_parts(score_parts(spec, dataset), spec, dataset, metric, beta);
}

double tune_beta(const SyntheticModelSpec& spec, const TemporalDataset& dataset, const TuningTarget& target,
                 double tolerance) {
    if (!(tolerance >= 0.0)) throw InvalidArgument("tolerance must be non-negative");
    const Parts parts = score_parts(spec, dataset);
    std::vector<std::pair<double, double>> trace;
    auto metric = [&](double beta) {
        const double v = metric_from_parts(parts, spec, dataset, target.metric, beta);
        trace.emplace_back(beta, v);
        return v;
    };
    auto fail = [&](const std::string& why) {
        std::ostringstream msg;
        msg << why << "; trace (beta, " << to_string(target.metric) << "):";
        for (const auto& [b, v] : trace) msg << " (" << b << ", " << v << ")";
        throw TuningError(msg.str());
    };
    auto check_monotone = [&] {
        auto sorted = trace;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t n = 1; n < sorted.size(); ++n) {
            if (sorted[n].second > sorted[n - 1].second + tolerance) fail("metric is not monotone in beta");
        }
    };

    const double at_zero = metric(0.0);
    if (std::abs(at_zero - target.value) <= tolerance) return 0.0;
    if (at_zero < target.value) fail("target metric is out of reach even at beta = 0");

    double lo = 0.0;
    double hi = 1.0;
    for (int n = 0;; ++n) {
        const double v = metric(hi);
        if (std::abs(v - target.value) <= tolerance) {
            check_monotone();
            return hi;
        }
        if (v < target.value) break;
        lo = hi;
        hi *= 2.0;
        if (n > 60) fail("no beta brings the metric below the target");
    }
    for (int n = 0; n < 200; ++n) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double v = metric(mid);
        if (std::abs(v - target.value) <= tolerance) {
            check_monotone();
            return mid;
        }
        if (v > target.value) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    check_monotone();
    fail("bracket collapsed without meeting the tolerance");
    return 0.0;
}

double calibrate_link_scale(const SyntheticModelSpec& spec, const TemporalDataset& dataset) {
    const std::size_t m = dataset.num_instances();
    std::vector<double> f(m);
    double mean = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        f[i] = spec.score(dataset.instance(i));
        mean += f[i];
    }
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (double v : f) var += (v - mean) * (v - mean);
    var /= static_cast<double>(m);
    const double sd = std::sqrt(var);
    return sd > 0.0 ? 2.0 / sd : 1.0;
}

Benchmark make_benchmark(const BenchmarkConfig& config) {
    auto generated = generate_dataset(config.instances, config.features, config.timesteps, config.seed,
                                      config.fraction_categorical, config.fraction_trend);
    GroundTruthOptions options;
    options.task = config.task;
    options.aggregators = config.aggregators;
    auto built = build_ground_truth(generated.dataset, generated.features, config.relevant, config.seed, options);
    TemporalDataset dataset = generated.dataset.with_targets(std::move(built.targets), config.task);
    SyntheticModelSpec model = std::move(built.model);
    const TuningMetric metric = config.task == Task::classification ? TuningMetric::accuracy : TuningMetric::r_squared;
    model.beta = tune_beta(model, dataset, {metric, config.target_metric}, config.tolerance);
    if (config.task == Task::classification) model.link_scale = calibrate_link_scale(model, dataset);
    return {std::move(dataset), std::move(generated.features), std::move(model), std::move(built.truth)};
}

std::string model_spec_to_json(const SyntheticModelSpec& spec) {
    ordered_json features = ordered_json::array();
    for (std::size_t j = 0; j < spec.num_features(); ++j) {
        const auto& fn = spec.functions[j];
        features.push_back({{"name", spec.feature_names[j]},
                            {"relevant", static_cast<bool>(spec.relevant[j])},
                            {"window", window_json(fn.window)},
                            {"aggregator", to_string(fn.aggregator)},
                            {"weights", fn.weights},
                            {"interaction", to_string(fn.interaction)},
                            {"mean", fn.mean},
                            {"sd", fn.sd},
                            {"alpha", fn.alpha}});
    }
    ordered_json doc{{"type", "synthetic_model"},
                     {"task", to_string(spec.task)},
                     {"timesteps", spec.timesteps},
                     {"beta", spec.beta},
                     {"threshold", spec.threshold},
                     {"link_scale", std::isinf(spec.link_scale) ? ordered_json(nullptr) : ordered_json(spec.link_scale)},
                     {"features", std::move(features)}};
    return doc.dump(2) + "\n";
}

SyntheticModelSpec model_spec_from_json(const std::string& text) {
    SyntheticModelSpec spec;
    try {
        const auto doc = ordered_json::parse(text);
        if (doc.value("type", "") != "synthetic_model") throw FormatError("not a synthetic model spec");
        spec.task = task_from_string(doc.at("task").get<std::string>());
        spec.timesteps = doc.at("timesteps").get<std::size_t>();
        spec.beta = doc.at("beta").get<double>();
        spec.threshold = doc.value("threshold", 0.0);
        if (doc.contains("link_scale") && !doc.at("link_scale").is_null()) {
            spec.link_scale = doc.at("link_scale").get<double>();
        }
        for (const auto& f : doc.at("features")) {
            spec.feature_names.push_back(f.at("name").get<std::string>());
            spec.relevant.push_back(f.at("relevant").get<bool>());
            FeatureFunctionSpec fn;
            fn.window = window_from_json(f.at("window"));
            fn.aggregator = aggregator_from_string(f.at("aggregator").get<std::string>());
            fn.weights = f.value("weights", std::vector<double>{});
            fn.interaction = interaction_from_string(f.at("interaction").get<std::string>());
            fn.mean = f.at("mean").get<double>();
            fn.sd = f.at("sd").get<double>();
            fn.alpha = f.at("alpha").get<double>();
            spec.functions.push_back(std::move(fn));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed synthetic model spec: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw FormatError(std::string("malformed synthetic model spec: ") + e.what());
    }
    try {
        spec.validate();
    } catch (const InvalidArgument& e) {
        throw FormatError(std::string("invalid synthetic model spec: ") + e.what());
    }
    return spec;
}

SyntheticModelSpec load_model_spec(const std::filesystem::path& path) { return model_spec_from_json(read_file(path)); }

std::string ground_truth_to_json(const SyntheticModelSpec& spec) {
    const GroundTruth truth = ground_truth_of(spec);
    ordered_json relevant = ordered_json::array();
    ordered_json features = ordered_json::array();
    for (std::size_t j = 0; j < spec.num_features(); ++j) {
        if (truth.relevant[j]) relevant.push_back(spec.feature_names[j]);
        const auto& fn = spec.functions[j];
        features.push_back({{"name", spec.feature_names[j]},
                            {"relevant", static_cast<bool>(truth.relevant[j])},
                            {"window", window_json(fn.window)},
                            {"aggregator", to_string(fn.aggregator)},
                            {"interaction", to_string(fn.interaction)},
                            {"alpha", fn.alpha},
                            {"window_ordering", static_cast<bool>(truth.window_ordering[j])},
                            {"feature_ordering", static_cast<bool>(truth.feature_ordering[j])}});
    }
    ordered_json doc{{"relevant", std::move(relevant)},
                     {"timesteps", spec.timesteps},
                     {"beta", spec.beta},
                     {"threshold", spec.threshold},
                     {"features", std::move(features)}};
    return doc.dump(2) + "\n";
}

GroundTruth ground_truth_from_json(const std::string& text) {
    GroundTruth truth;
    try {
        const auto doc = ordered_json::parse(text);
        truth.timesteps = doc.at("timesteps").get<std::size_t>();
        for (const auto& f : doc.at("features")) {
            truth.feature_names.push_back(f.at("name").get<std::string>());
            const bool relevant = f.at("relevant").get<bool>();
            const Window window = window_from_json(f.at("window"));
            check_window(window, truth.timesteps);
            truth.relevant.push_back(relevant);
            truth.windows.push_back(window);
            truth.window_ordering.push_back(f.at("window_ordering").get<bool>());
            truth.feature_ordering.push_back(f.at("feature_ordering").get<bool>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed ground truth: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw FormatError(std::string("malformed ground truth: ") + e.what());
    }
    return truth;
}

}  // namespace tix
