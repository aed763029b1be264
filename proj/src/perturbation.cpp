#include "timex/perturbation.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "timex/errors.hpp"

namespace tix {

InstancePermutation InstancePermutation::inverse() const {
    InstancePermutation inv;
    inv.mapping.resize(mapping.size());
    for (std::size_t i = 0; i < mapping.size(); ++i) inv.mapping[mapping[i]] = i;
    return inv;
}

bool TimestepPermutation::is_identity() const {
    for (std::size_t n = 0; n < order.size(); ++n) {
        if (order[n] != window.start + n) return false;
    }
    return true;
}

TimestepPermutation TimestepPermutation::inverse() const {
    TimestepPermutation inv{window, std::vector<std::size_t>(order.size())};
    for (std::size_t n = 0; n < order.size(); ++n) inv.order[order[n] - window.start] = window.start + n;
    return inv;
}

InstancePermutation draw_instance_permutation(std::size_t num_instances, Rng& rng) {
    if (num_instances < 2) throw InvalidArgument("a derangement needs at least two instances");
    InstancePermutation perm;
    perm.mapping.resize(num_instances);
    std::iota(perm.mapping.begin(), perm.mapping.end(), std::size_t{0});
    std::shuffle(perm.mapping.begin(), perm.mapping.end(), rng);
    std::uniform_int_distribution<std::size_t> other(0, num_instances - 2);
    bool fixed = true;
    while (fixed) {
        fixed = false;
        for (std::size_t i = 0; i < num_instances; ++i) {
            if (perm.mapping[i] != i) continue;
            fixed = true;
            std::size_t j = other(rng);
            if (j >= i) ++j;
            std::swap(perm.mapping[i], perm.mapping[j]);
        }
    }
    return perm;
}

TimestepPermutation draw_timestep_permutation(const Window& window, Rng& rng, bool reject_identity) {
    TimestepPermutation tperm{window, std::vector<std::size_t>(window.width())};
    if (reject_identity && window.width() < 2) {
        throw InvalidArgument("cannot draw a non-identity ordering of a single timestep");
    }
    do {
        std::iota(tperm.order.begin(), tperm.order.end(), window.start);
        std::shuffle(tperm.order.begin(), tperm.order.end(), rng);
    } while (reject_identity && tperm.is_identity());
    return tperm;
}

PerturbedView::PerturbedView(const TemporalDataset& dataset, CrossInstanceEdit edit)
    : dataset_(&dataset) {
    check_window(edit.window, dataset.sequence_length());
    for (std::size_t j : edit.features) {
        if (j >= dataset.num_features()) throw InvalidArgument("feature index out of range");
    }
    if (edit.permutation.mapping.size() != dataset.num_instances()) {
        throw InvalidArgument("instance permutation length differs from M");
    }
    edit_ = std::move(edit);
}

PerturbedView::PerturbedView(const TemporalDataset& dataset, OrderingEdit edit) : dataset_(&dataset) {
    check_window(edit.permutation.window, dataset.sequence_length());
    if (edit.feature >= dataset.num_features()) throw InvalidArgument("feature index out of range");
    if (edit.permutation.order.size() != edit.permutation.window.width()) {
        throw InvalidArgument("timestep permutation does not cover its window");
    }
    std::vector<char> seen(edit.permutation.window.width(), 0);
    for (std::size_t t : edit.permutation.order) {
        if (!edit.permutation.window.contains(t) || seen[t - edit.permutation.window.start]++) {
            throw InvalidArgument("timestep order is not a permutation of its window");
        }
    }
    edit_ = std::move(edit);
}

void PerturbedView::fill(std::size_t i, std::span<double> dst) const {
    const auto src = dataset_->instance(i);
    std::copy(src.begin(), src.end(), dst.begin());
    const std::size_t l = dataset_->sequence_length();
    if (const auto* cross = std::get_if<CrossInstanceEdit>(&edit_)) {
        const auto donor = dataset_->instance(cross->permutation.mapping[i]);
        const std::size_t first = cross->window.start - 1;
        const std::size_t last = cross->window.end;
        for (std::size_t j : cross->features) {
            std::copy(donor.begin() + static_cast<std::ptrdiff_t>(j * l + first),
                      donor.begin() + static_cast<std::ptrdiff_t>(j * l + last),
                      dst.begin() + static_cast<std::ptrdiff_t>(j * l + first));
        }
    } else if (const auto* ord = std::get_if<OrderingEdit>(&edit_)) {
        const auto& p = ord->permutation;
        const std::size_t base = ord->feature * l;
        for (std::size_t n = 0; n < p.order.size(); ++n) {
            dst[base + p.window.start - 1 + n] = src[base + p.order[n] - 1];
        }
    }
}

std::vector<double> PerturbedView::materialize() const {
    std::vector<double> out(dataset_->values().size());
    const std::size_t size = dataset_->instance_size();
    for (std::size_t i = 0; i < dataset_->num_instances(); ++i) {
        fill(i, std::span<double>(out.data() + i * size, size));
    }
    return out;
}

PerturbedView perturb_window_across_instances(const TemporalDataset& dataset, std::size_t feature,
                                              const Window& window, const InstancePermutation& perm) {
    return PerturbedView(dataset, CrossInstanceEdit{{feature}, window, perm});
}

PerturbedView perturb_ordering_within_window(const TemporalDataset& dataset, std::size_t feature,
                                             const TimestepPermutation& tperm) {
    return PerturbedView(dataset, OrderingEdit{feature, tperm});
}

LossEvaluator::LossEvaluator(ModelPool& pool, const TemporalDataset& dataset, LossKind loss,
                             std::size_t batch_size)
    : pool_(pool), dataset_(dataset), loss_(loss), batch_size_(batch_size) {
    if (batch_size_ == 0) throw InvalidArgument("batch size must be positive");
    const ModelInfo info = pool_.info();
    if (info.features != dataset.num_features() || info.timesteps != dataset.sequence_length()) {
        throw InvalidArgument("model dims (" + std::to_string(info.features) + ", " +
                              std::to_string(info.timesteps) + ") do not match dataset (" +
                              std::to_string(dataset.num_features()) + ", " +
                              std::to_string(dataset.sequence_length()) + ")");
    }
}

std::vector<double> LossEvaluator::outputs(const PerturbedView& view) {
    const std::size_t m = dataset_.num_instances();
    std::vector<double> out;
    out.reserve(m);
    PredictBatch batch(dataset_.num_features(), dataset_.sequence_length());
    batch.reserve(std::min(batch_size_, m));
    for (std::size_t first = 0; first < m; first += batch_size_) {
        const std::size_t last = std::min(m, first + batch_size_);
        batch.clear();
        batch.set_id(next_batch_id_.fetch_add(1));
        for (std::size_t i = first; i < last; ++i) view.fill(i, batch.append());
        const auto part = pool_.predict(batch);
        out.insert(out.end(), part.begin(), part.end());
    }
    evaluations_.fetch_add(m);
    return out;
}

double LossEvaluator::baseline_mean_loss() {
    std::call_once(baseline_once_, [this] {
        baseline_outputs_ = outputs(PerturbedView(dataset_));
        double sum = 0.0;
        for (std::size_t i = 0; i < baseline_outputs_.size(); ++i) {
            sum += compute_loss(loss_, dataset_.targets()[i], baseline_outputs_[i]);
        }
        baseline_ = sum / static_cast<double>(dataset_.num_instances());
    });
    return baseline_;
}

const std::vector<double>& LossEvaluator::baseline_outputs() {
    baseline_mean_loss();
    return baseline_outputs_;
}

double LossEvaluator::mean_loss(const PerturbedView& view, std::vector<double>* per_instance) {
    const auto out = outputs(view);
    if (per_instance) per_instance->resize(out.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double l = compute_loss(loss_, dataset_.targets()[i], out[i]);
        if (per_instance) (*per_instance)[i] = l;
        sum += l;
    }
    return sum / static_cast<double>(dataset_.num_instances());
}

WindowImportance window_importance(LossEvaluator& evaluator, std::span<const std::size_t> features,
                                   const Window& window, std::size_t rounds, const StreamKey& key) {
    if (rounds == 0) throw InvalidArgument("at least one permutation round is required");
    const auto& ds = evaluator.dataset();
    WindowImportance result;
    result.baseline = evaluator.baseline_mean_loss();
    result.round_losses.reserve(rounds);
    double delta_sum = 0.0;
    for (std::size_t r = 0; r < rounds; ++r) {
        Rng rng = round_stream(key, r);
        CrossInstanceEdit edit{{features.begin(), features.end()}, window,
                               draw_instance_permutation(ds.num_instances(), rng)};
        const double loss = evaluator.mean_loss(PerturbedView(ds, std::move(edit)));
        result.round_losses.push_back(loss);
        delta_sum += loss - result.baseline;
    }
    result.score = delta_sum / static_cast<double>(rounds);
    return result;
}

WindowImportance window_importance(LossEvaluator& evaluator, std::size_t feature, const Window& window,
                                   std::size_t rounds, const StreamKey& key) {
    const std::size_t features[] = {feature};
    return window_importance(evaluator, std::span<const std::size_t>(features), window, rounds, key);
}

OrderingRounds ordering_round_losses(LossEvaluator& evaluator, std::size_t feature, const Window& window,
                                     std::size_t rounds, const StreamKey& key) {
    if (rounds == 0) throw InvalidArgument("at least one permutation round is required");
    if (window.width() < 2) throw InvalidArgument("ordering of a single timestep is vacuous");
    const auto& ds = evaluator.dataset();
    OrderingRounds result;
    result.baseline = evaluator.baseline_mean_loss();
    result.round_losses.reserve(rounds);
    for (std::size_t r = 0; r < rounds; ++r) {
        Rng rng = round_stream(key, r);
        OrderingEdit edit{feature, draw_timestep_permutation(window, rng, true)};
        result.round_losses.push_back(evaluator.mean_loss(PerturbedView(ds, std::move(edit))));
    }
    return result;
}

}  // namespace tix
