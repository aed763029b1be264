#include "timex/model.hpp"

#include <cmath>
#include <string>

#include "timex/errors.hpp"

namespace tix {

void PredictBatch::add(std::span<const double> instance) {
    if (instance.size() != instance_size()) {
        throw InvalidArgument("instance has " + std::to_string(instance.size()) +
                              " cells, batch expects " + std::to_string(instance_size()));
    }
    values_.insert(values_.end(), instance.begin(), instance.end());
}

std::span<double> PredictBatch::append() {
    const std::size_t offset = values_.size();
    values_.resize(offset + instance_size());
    return {values_.data() + offset, instance_size()};
}

ModelHandle::ModelHandle(std::shared_ptr<Model> model) : model_(std::move(model)) {
    if (!model_) throw InvalidArgument("null model");
}

std::vector<double> ModelHandle::predict(const PredictBatch& batch) const {
    const ModelInfo info = model_->info();
    if (batch.features() != info.features || batch.timesteps() != info.timesteps) {
        throw InvalidArgument("batch dims (" + std::to_string(batch.features()) + ", " +
                              std::to_string(batch.timesteps()) + ") do not match model dims (" +
                              std::to_string(info.features) + ", " +
                              std::to_string(info.timesteps) + ")");
    }
    if (batch.empty()) return {};
    auto outputs = model_->predict(batch);
    if (outputs.size() != batch.size()) {
        throw ProtocolError("model returned " + std::to_string(outputs.size()) + " outputs for " +
                            std::to_string(batch.size()) + " instances");
    }
    for (double v : outputs) {
        if (!std::isfinite(v)) throw ProtocolError("model returned a non-finite output");
        if (info.task == Task::classification && (v < 0.0 || v > 1.0)) {
            throw ProtocolError("classification output " + std::to_string(v) + " outside [0, 1]");
        }
    }
    return outputs;
}

namespace {

class CallableModel final : public Model {
public:
    CallableModel(ModelInfo info, InstanceFunction fn) : info_(info), fn_(std::move(fn)) {}

    ModelInfo info() const override { return info_; }
    ModelBackend backend() const override { return ModelBackend::in_process; }
    bool thread_safe() const override { return true; }

    std::vector<double> predict(const PredictBatch& batch) override {
        std::vector<double> out(batch.size());
        for (std::size_t b = 0; b < batch.size(); ++b) out[b] = fn_(batch.instance(b));
        return out;
    }

private:
    ModelInfo info_;
    InstanceFunction fn_;
};

}  // namespace

ModelHandle make_in_process_model(ModelInfo info, InstanceFunction fn) {
    return ModelHandle(std::make_shared<CallableModel>(info, std::move(fn)));
}

ModelHandle make_constant_model(ModelInfo info, double value) {
    return make_in_process_model(info, [value](std::span<const double>) { return value; });
}

ModelPool::ModelPool(ModelHandle handle) : ModelPool(std::vector<ModelHandle>{std::move(handle)}) {}

ModelPool::ModelPool(std::vector<ModelHandle> handles) : handles_(std::move(handles)) {
    if (handles_.empty()) throw InvalidArgument("model pool needs at least one handle");
    const ModelInfo first = handles_.front().declared_dims();
    for (const auto& h : handles_) {
        if (!(h.declared_dims() == first)) throw InvalidArgument("pooled models disagree on dims");
    }
    busy_.assign(handles_.size(), false);
    shared_ = handles_.size() == 1 && handles_.front().thread_safe();
}

std::vector<double> ModelPool::predict(const PredictBatch& batch) {
    if (shared_) return handles_.front().predict(batch);
    std::size_t slot = 0;
    {
        std::unique_lock lock(mutex_);
        released_.wait(lock, [&] {
            for (slot = 0; slot < busy_.size(); ++slot) {
                if (!busy_[slot]) return true;
            }
            return false;
        });
        busy_[slot] = true;
    }
    struct Release {
        ModelPool* pool;
        std::size_t slot;
        ~Release() {
            {
                std::lock_guard lock(pool->mutex_);
                pool->busy_[slot] = false;
            }
            pool->released_.notify_one();
        }
    } release{this, slot};
    return handles_[slot].predict(batch);
}

}  // namespace tix
