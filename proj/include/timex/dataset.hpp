#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace tix {

enum class Task : std::uint8_t { regression = 0, classification = 1 };
enum class FeatureKind { continuous, categorical };

struct FeatureMeta {
    std::string name;
    FeatureKind kind = FeatureKind::continuous;

    bool operator==(const FeatureMeta&) const = default;
};

std::string to_string(Task task);
Task task_from_string(const std::string& text);
std::string to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(const std::string& text);

// Contiguous inclusive range of timesteps, 1-based as everywhere in the
// public API.
struct Window {
    std::size_t start = 1;
    std::size_t end = 1;

    std::size_t width() const { return end - start + 1; }
    bool contains(std::size_t timestep) const { return timestep >= start && timestep <= end; }
    bool valid_for(std::size_t sequence_length) const {
        return start >= 1 && start <= end && end <= sequence_length;
    }
    static Window full(std::size_t sequence_length) { return {1, sequence_length}; }

    bool operator==(const Window&) const = default;
};

// Throws InvalidArgument unless 1 <= start <= end <= L.
void check_window(const Window& window, std::size_t sequence_length);

// M x D x L tensor of feature values with one target per instance.
// Values are stored instance-major, then feature, then timestep. The object
// is immutable once constructed and can be shared across threads.
class TemporalDataset {
public:
    TemporalDataset(std::size_t num_instances, std::size_t num_features,
                    std::size_t sequence_length, std::vector<double> values,
                    std::vector<double> targets, Task task,
                    std::vector<FeatureMeta> feature_meta);

    std::size_t num_instances() const { return num_instances_; }
    std::size_t num_features() const { return num_features_; }
    std::size_t sequence_length() const { return sequence_length_; }
    std::size_t instance_size() const { return num_features_ * sequence_length_; }
    Task task() const { return task_; }

    const std::vector<double>& values() const { return values_; }
    const std::vector<double>& targets() const { return targets_; }
    const std::vector<FeatureMeta>& feature_meta() const { return feature_meta_; }

    // 0-based instance index; the D x L matrix of that instance.
    std::span<const double> instance(std::size_t i) const {
        return {values_.data() + i * instance_size(), instance_size()};
    }
    // 0-based instance and feature; the length-L series.
    std::span<const double> series(std::size_t i, std::size_t j) const {
        return {values_.data() + i * instance_size() + j * sequence_length_, sequence_length_};
    }
    // 0-based instance and feature, 1-based timestep.
    double at(std::size_t i, std::size_t j, std::size_t timestep) const {
        return values_[i * instance_size() + j * sequence_length_ + (timestep - 1)];
    }

    // Index of the feature with this name; throws InvalidArgument when absent.
    std::size_t feature_index(const std::string& name) const;

    // Copy of the dataset restricted to the first `count` instances.
    TemporalDataset head(std::size_t count) const;
    // Same inputs with new targets (and possibly a different task).
    TemporalDataset with_targets(std::vector<double> targets, Task task) const;

    bool operator==(const TemporalDataset&) const = default;

private:
    std::size_t num_instances_;
    std::size_t num_features_;
    std::size_t sequence_length_;
    std::vector<double> values_;
    std::vector<double> targets_;
    Task task_;
    std::vector<FeatureMeta> feature_meta_;
};

enum class LossType { quadratic, binary_cross_entropy };

struct LossKind {
    LossType type = LossType::quadratic;
    // Probabilities are clamped to [eps, 1 - eps] before taking logs.
    double clamp_epsilon = 1e-12;

    static LossKind quadratic() { return {LossType::quadratic, 1e-12}; }
    static LossKind binary_cross_entropy(double eps = 1e-12) {
        return {LossType::binary_cross_entropy, eps};
    }
    static LossKind for_task(Task task) {
        return task == Task::classification ? binary_cross_entropy() : quadratic();
    }

    bool operator==(const LossKind&) const = default;
};

std::string to_string(LossType type);

double compute_loss(const LossKind& kind, double target, double output);

enum class DatasetFormat { binary, csv_long };

// Binary "TDS1" file, or for csv_long a directory holding values.csv,
// targets.csv and an optional meta.json ({"task":..., "features":[...]}).
TemporalDataset load_dataset(const std::filesystem::path& path, DatasetFormat format);
void save_dataset(const TemporalDataset& dataset, const std::filesystem::path& path,
                  DatasetFormat format);

}  // namespace tix
