#pragma once

#include <atomic>
#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "timex/dataset.hpp"
#include "timex/model.hpp"
#include "timex/rng.hpp"

namespace tix {

// Derangement of the instances: instance i receives values from mapping[i].
// Indices are 0-based.
struct InstancePermutation {
    std::vector<std::size_t> mapping;

    InstancePermutation inverse() const;
};

// Reordering of the timesteps of one window, shared by every instance:
// position start + n receives the value at timestep order[n]. Timesteps are
// 1-based.
struct TimestepPermutation {
    Window window;
    std::vector<std::size_t> order;

    bool is_identity() const;
    TimestepPermutation inverse() const;
};

// Uniform permutation with fixed points swapped away (each fixed point is
// exchanged with a uniformly chosen other index until none remain).
InstancePermutation draw_instance_permutation(std::size_t num_instances, Rng& rng);

// Uniform shuffle of the window's timesteps; identity draws are redrawn when
// `reject_identity` is set (requires width >= 2).
TimestepPermutation draw_timestep_permutation(const Window& window, Rng& rng, bool reject_identity);

struct CrossInstanceEdit {
    std::vector<std::size_t> features;
    Window window;
    InstancePermutation permutation;
};

struct OrderingEdit {
    std::size_t feature = 0;
    TimestepPermutation permutation;
};

// Lazily perturbed copy of a dataset. The source dataset is never modified.
class PerturbedView {
public:
    explicit PerturbedView(const TemporalDataset& dataset) : dataset_(&dataset) {}
    PerturbedView(const TemporalDataset& dataset, CrossInstanceEdit edit);
    PerturbedView(const TemporalDataset& dataset, OrderingEdit edit);

    const TemporalDataset& dataset() const { return *dataset_; }
    // Writes the perturbed D x L matrix of instance i into dst.
    void fill(std::size_t i, std::span<double> dst) const;
    // Full perturbed M x D x L tensor.
    std::vector<double> materialize() const;

private:
    const TemporalDataset* dataset_;
    std::variant<std::monostate, CrossInstanceEdit, OrderingEdit> edit_;
};

// Cells of feature j inside `window` come from instance perm[i].
PerturbedView perturb_window_across_instances(const TemporalDataset& dataset, std::size_t feature,
                                              const Window& window, const InstancePermutation& perm);
PerturbedView perturb_ordering_within_window(const TemporalDataset& dataset, std::size_t feature,
                                             const TimestepPermutation& tperm);

// Evaluates mean losses of a model over (perturbed versions of) one dataset.
// Thread-safe; the baseline is computed once on first use.
class LossEvaluator {
public:
    LossEvaluator(ModelPool& pool, const TemporalDataset& dataset, LossKind loss,
                  std::size_t batch_size = 256);

    const TemporalDataset& dataset() const { return dataset_; }
    const LossKind& loss() const { return loss_; }

    // (1/M) sum_i L[y_i, f(X_i)].
    double baseline_mean_loss();
    const std::vector<double>& baseline_outputs();

    // Mean loss over all instances of `view`. Summation order is fixed
    // (instance order), so identical outputs give a bit-identical mean.
    double mean_loss(const PerturbedView& view, std::vector<double>* per_instance = nullptr);

    std::uint64_t evaluations() const { return evaluations_.load(); }

private:
    std::vector<double> outputs(const PerturbedView& view);

    ModelPool& pool_;
    const TemporalDataset& dataset_;
    LossKind loss_;
    std::size_t batch_size_;
    std::once_flag baseline_once_;
    std::vector<double> baseline_outputs_;
    double baseline_ = 0.0;
    std::atomic<std::uint64_t> evaluations_{0};
    std::atomic<std::uint64_t> next_batch_id_{1};
};

struct WindowImportance {
    double score = 0.0;                // mean over rounds of (round loss - baseline)
    std::vector<double> round_losses;  // mean perturbed loss per round
    double baseline = 0.0;
};

// Importance of jointly permuting `features` over `window` across instances,
// estimated from `rounds` permutation rounds. Round r draws its permutation
// from round_stream(key, r).
WindowImportance window_importance(LossEvaluator& evaluator, std::span<const std::size_t> features,
                                   const Window& window, std::size_t rounds, const StreamKey& key);
WindowImportance window_importance(LossEvaluator& evaluator, std::size_t feature, const Window& window,
                                   std::size_t rounds, const StreamKey& key);

struct OrderingRounds {
    std::vector<double> round_losses;
    double baseline = 0.0;
};

// Mean losses after reordering feature j inside `window`, one fresh
// non-identity timestep permutation per round. Requires width >= 2.
OrderingRounds ordering_round_losses(LossEvaluator& evaluator, std::size_t feature, const Window& window,
                                     std::size_t rounds, const StreamKey& key);

}  // namespace tix
