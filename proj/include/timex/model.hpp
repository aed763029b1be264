#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "timex/dataset.hpp"

namespace tix {

struct ModelInfo {
    std::size_t features = 0;
    std::size_t timesteps = 0;
    Task task = Task::regression;

    bool operator==(const ModelInfo&) const = default;
};

// A batch of D x L instance matrices stored contiguously (feature-major rows,
// as in TemporalDataset).
class PredictBatch {
public:
    PredictBatch(std::size_t features, std::size_t timesteps, std::uint64_t id = 0)
        : features_(features), timesteps_(timesteps), id_(id) {}

    std::size_t features() const { return features_; }
    std::size_t timesteps() const { return timesteps_; }
    std::size_t instance_size() const { return features_ * timesteps_; }
    std::size_t size() const { return instance_size() == 0 ? 0 : values_.size() / instance_size(); }
    bool empty() const { return values_.empty(); }
    std::uint64_t id() const { return id_; }
    void set_id(std::uint64_t id) { id_ = id; }

    void reserve(std::size_t instances) { values_.reserve(instances * instance_size()); }
    void clear() { values_.clear(); }
    void add(std::span<const double> instance);
    // Appends an instance slot and returns it for in-place filling.
    std::span<double> append();

    std::span<const double> instance(std::size_t b) const {
        return {values_.data() + b * instance_size(), instance_size()};
    }
    const std::vector<double>& values() const { return values_; }

private:
    std::size_t features_;
    std::size_t timesteps_;
    std::uint64_t id_;
    std::vector<double> values_;
};

enum class ModelBackend { in_process, external_subprocess };

// Black-box model. Implementations must be deterministic: the same instance
// always yields the same output regardless of the batch it arrives in.
class Model {
public:
    virtual ~Model() = default;
    virtual ModelInfo info() const = 0;
    virtual ModelBackend backend() const = 0;
    virtual std::vector<double> predict(const PredictBatch& batch) = 0;
    // Whether predict may be called from several threads at once.
    virtual bool thread_safe() const { return false; }
    virtual void shutdown() {}
};

// Shared handle to a model. predict() validates dimensions on the way in and
// output count, finiteness and (for classification) range on the way out.
class ModelHandle {
public:
    ModelHandle() = default;
    explicit ModelHandle(std::shared_ptr<Model> model);

    bool valid() const { return model_ != nullptr; }
    ModelBackend backend() const { return model_->backend(); }
    ModelInfo declared_dims() const { return model_->info(); }
    bool thread_safe() const { return model_->thread_safe(); }

    std::vector<double> predict(const PredictBatch& batch) const;
    void shutdown() const { model_->shutdown(); }

    Model& get() const { return *model_; }

private:
    std::shared_ptr<Model> model_;
};

using InstanceFunction = std::function<double(std::span<const double> instance)>;

// Wraps a pure per-instance callable. The callable sees the D x L matrix of one
// instance and must be safe to call concurrently.
ModelHandle make_in_process_model(ModelInfo info, InstanceFunction fn);

ModelHandle make_constant_model(ModelInfo info, double value);

// Hands out model handles to concurrent analysis tasks. A single thread-safe
// handle is shared without locking; otherwise each call waits for a free handle
// so that one handle never serves two requests at once.
class ModelPool {
public:
    explicit ModelPool(ModelHandle handle);
    explicit ModelPool(std::vector<ModelHandle> handles);

    ModelInfo info() const { return handles_.front().declared_dims(); }
    std::vector<double> predict(const PredictBatch& batch);

private:
    std::vector<ModelHandle> handles_;
    std::vector<bool> busy_;
    bool shared_ = false;
    std::mutex mutex_;
    std::condition_variable released_;
};

}  // namespace tix
