#include "timex/dataset.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "timex/errors.hpp"

namespace tix {

std::string to_string(Task task) {
    return task == Task::classification ? "classification" : "regression";
}

Task task_from_string(const std::string& text) {
    if (text == "regression" || text == "reg") return Task::regression;
    if (text == "classification" || text == "cls") return Task::classification;
    throw InvalidArgument("unknown task '" + text + "'");
}

std::string to_string(FeatureKind kind) {
    return kind == FeatureKind::categorical ? "categorical" : "continuous";
}

FeatureKind feature_kind_from_string(const std::string& text) {
    if (text == "continuous") return FeatureKind::continuous;
    if (text == "categorical") return FeatureKind::categorical;
    throw FormatError("unknown feature kind '" + text + "'");
}

std::string to_string(LossType type) {
    return type == LossType::binary_cross_entropy ? "binary_cross_entropy" : "quadratic";
}

void check_window(const Window& window, std::size_t sequence_length) {
    if (!window.valid_for(sequence_length)) {
        throw InvalidArgument("window [" + std::to_string(window.start) + ", " +
                              std::to_string(window.end) + "] is not valid for L=" +
                              std::to_string(sequence_length));
    }
}

TemporalDataset::TemporalDataset(std::size_t num_instances, std::size_t num_features,
                                 std::size_t sequence_length, std::vector<double> values,
                                 std::vector<double> targets, Task task,
                                 std::vector<FeatureMeta> feature_meta)
    : num_instances_(num_instances),
      num_features_(num_features),
      sequence_length_(sequence_length),
      values_(std::move(values)),
      targets_(std::move(targets)),
      task_(task),
      feature_meta_(std::move(feature_meta)) {
    if (num_instances_ < 2) {
        throw InvariantError("dataset needs at least two instances, got " +
                             std::to_string(num_instances_));
    }
    if (num_features_ == 0 || sequence_length_ == 0) {
        throw InvariantError("dataset needs D >= 1 and L >= 1");
    }
    if (values_.size() != num_instances_ * num_features_ * sequence_length_) {
        throw InvariantError("value tensor has " + std::to_string(values_.size()) +
                             " entries, expected M*D*L = " +
                             std::to_string(num_instances_ * num_features_ * sequence_length_));
    }
    if (targets_.size() != num_instances_) {
        throw InvariantError("expected " + std::to_string(num_instances_) + " targets, got " +
                             std::to_string(targets_.size()));
    }
    if (feature_meta_.size() != num_features_) {
        throw InvariantError("feature metadata length differs from D");
    }
    for (std::size_t n = 0; n < values_.size(); ++n) {
        if (!std::isfinite(values_[n])) {
            throw InvariantError("non-finite value at flat index " + std::to_string(n));
        }
    }
    for (std::size_t i = 0; i < targets_.size(); ++i) {
        const double t = targets_[i];
        if (!std::isfinite(t)) {
            throw InvariantError("non-finite target for instance " + std::to_string(i + 1));
        }
        if (task_ == Task::classification && t != 0.0 && t != 1.0) {
            throw InvariantError("classification target of instance " + std::to_string(i + 1) +
                                 " is not 0 or 1");
        }
    }
}

std::size_t TemporalDataset::feature_index(const std::string& name) const {
    for (std::size_t j = 0; j < feature_meta_.size(); ++j) {
        if (feature_meta_[j].name == name) return j;
    }
    throw InvalidArgument("unknown feature '" + name + "'");
}

TemporalDataset TemporalDataset::head(std::size_t count) const {
    if (count > num_instances_) throw InvalidArgument("head() beyond dataset size");
    std::vector<double> values(values_.begin(),
                               values_.begin() + static_cast<std::ptrdiff_t>(count * instance_size()));
    std::vector<double> targets(targets_.begin(), targets_.begin() + static_cast<std::ptrdiff_t>(count));
    return {count, num_features_, sequence_length_, std::move(values), std::move(targets), task_,
            feature_meta_};
}

TemporalDataset TemporalDataset::with_targets(std::vector<double> targets, Task task) const {
    return {num_instances_, num_features_, sequence_length_, values_, std::move(targets), task,
            feature_meta_};
}

double compute_loss(const LossKind& kind, double target, double output) {
    if (!std::isfinite(target) || !std::isfinite(output)) {
        throw InvalidArgument("loss inputs must be finite");
    }
    if (kind.type == LossType::quadratic) {
        const double d = target - output;
        return d * d;
    }
    const double eps = kind.clamp_epsilon;
    const double p = std::clamp(output, eps, 1.0 - eps);
    return -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
}

namespace {

constexpr std::array<char, 4> kMagic{'T', 'D', 'S', '1'};

template <typename T>
void write_le(std::ostream& out, T value) {
    std::array<unsigned char, sizeof(T)> bytes{};
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const char* what) {
    std::array<unsigned char, sizeof(T)> bytes{};
    in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T));
    if (!in) throw FormatError(std::string("truncated TDS1 file while reading ") + what);
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

nlohmann::json features_json(const std::vector<FeatureMeta>& meta) {
    nlohmann::json features = nlohmann::json::array();
    for (const auto& f : meta) features.push_back({{"name", f.name}, {"kind", to_string(f.kind)}});
    return features;
}

std::vector<FeatureMeta> features_from_json(const nlohmann::json& doc) {
    std::vector<FeatureMeta> meta;
    if (!doc.contains("features") || !doc["features"].is_array()) {
        throw FormatError("metadata lacks a 'features' array");
    }
    for (const auto& f : doc["features"]) {
        meta.push_back({f.at("name").get<std::string>(),
                        feature_kind_from_string(f.at("kind").get<std::string>())});
    }
    return meta;
}

TemporalDataset load_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::array<char, 4> magic{};
    in.read(magic.data(), 4);
    if (!in || magic != kMagic) throw FormatError(path.string() + ": bad magic bytes, expected TDS1");
    const auto m = read_le<std::uint32_t>(in, "M");
    const auto d = read_le<std::uint32_t>(in, "D");
    const auto l = read_le<std::uint32_t>(in, "L");
    const auto task_byte = read_le<std::uint8_t>(in, "task");
    if (task_byte > 1) throw FormatError("task byte must be 0 or 1, got " + std::to_string(task_byte));
    std::vector<double> targets(m);
    for (auto& t : targets) t = read_le<double>(in, "targets");
    std::vector<double> values(std::size_t{m} * d * l);
    for (auto& v : values) v = read_le<double>(in, "values");
    const auto meta_len = read_le<std::uint32_t>(in, "metadata length");
    std::string meta_text(meta_len, '\0');
    in.read(meta_text.data(), meta_len);
    if (!in) throw FormatError("truncated TDS1 metadata");
    std::vector<FeatureMeta> meta;
    try {
        meta = features_from_json(nlohmann::json::parse(meta_text));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad TDS1 metadata: ") + e.what());
    }
    try {
        return {m, d, l, std::move(values), std::move(targets), static_cast<Task>(task_byte),
                std::move(meta)};
    } catch (const InvariantError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void save_binary(const TemporalDataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(kMagic.data(), 4);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.num_instances()));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.num_features()));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.sequence_length()));
    write_le<std::uint8_t>(out, static_cast<std::uint8_t>(ds.task()));
    for (double t : ds.targets()) write_le<double>(out, t);
    for (double v : ds.values()) write_le<double>(out, v);
    const std::string meta = nlohmann::json{{"features", features_json(ds.feature_meta())}}.dump();
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
    out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

template <typename T>
T parse_number(const std::string& text, const std::string& where) {
    T value{};
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) throw FormatError(where + ": cannot parse '" + text + "'");
    return value;
}

std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return {buf.data(), ptr};
}

TemporalDataset load_csv_long(const std::filesystem::path& dir) {
    Task task = Task::regression;
    std::vector<FeatureMeta> meta;
    const auto meta_path = dir / "meta.json";
    if (std::filesystem::exists(meta_path)) {
        std::ifstream in(meta_path);
        try {
            const auto doc = nlohmann::json::parse(in);
            if (doc.contains("task")) task = task_from_string(doc["task"].get<std::string>());
            meta = features_from_json(doc);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("meta.json: " + std::string(e.what()));
        } catch (const InvalidArgument& e) {
            throw FormatError("meta.json: " + std::string(e.what()));
        }
    }

    std::ifstream values_in(dir / "values.csv");
    if (!values_in) throw IoError("cannot open " + (dir / "values.csv").string());
    std::string line;
    std::getline(values_in, line);
    if (strip_cr(line) != "instance,feature,timestep,value") {
        throw FormatError("values.csv: header must be 'instance,feature,timestep,value'");
    }
    struct Cell {
        std::size_t instance, feature, timestep;
        double value;
    };
    std::vector<Cell> cells;
    std::map<std::string, std::size_t> feature_ids;
    for (std::size_t j = 0; j < meta.size(); ++j) feature_ids[meta[j].name] = j;
    const bool meta_given = !meta.empty();
    std::size_t max_instance = 0;
    std::size_t max_timestep = 0;
    std::size_t row = 1;
    while (std::getline(values_in, line)) {
        ++row;
        line = strip_cr(line);
        if (line.empty()) continue;
        const auto parts = split_csv(line);
        const std::string where = "values.csv row " + std::to_string(row);
        if (parts.size() != 4) throw FormatError(where + ": expected 4 columns");
        const auto instance = parse_number<std::size_t>(parts[0], where);
        const auto timestep = parse_number<std::size_t>(parts[2], where);
        const auto value = parse_number<double>(parts[3], where);
        if (instance == 0 || timestep == 0) throw FormatError(where + ": indices are 1-based");
        if (!std::isfinite(value)) throw FormatError(where + ": non-finite value");
        auto it = feature_ids.find(parts[1]);
        if (it == feature_ids.end()) {
            if (meta_given) throw FormatError(where + ": unknown feature '" + parts[1] + "'");
            it = feature_ids.emplace(parts[1], meta.size()).first;
            meta.push_back({parts[1], FeatureKind::continuous});
        }
        cells.push_back({instance, it->second, timestep, value});
        max_instance = std::max(max_instance, instance);
        max_timestep = std::max(max_timestep, timestep);
    }

    std::ifstream targets_in(dir / "targets.csv");
    if (!targets_in) throw IoError("cannot open " + (dir / "targets.csv").string());
    std::getline(targets_in, line);
    if (strip_cr(line) != "instance,target") {
        throw FormatError("targets.csv: header must be 'instance,target'");
    }
    std::map<std::size_t, double> target_rows;
    row = 1;
    while (std::getline(targets_in, line)) {
        ++row;
        line = strip_cr(line);
        if (line.empty()) continue;
        const auto parts = split_csv(line);
        const std::string where = "targets.csv row " + std::to_string(row);
        if (parts.size() != 2) throw FormatError(where + ": expected 2 columns");
        const auto instance = parse_number<std::size_t>(parts[0], where);
        if (instance == 0) throw FormatError(where + ": indices are 1-based");
        target_rows[instance] = parse_number<double>(parts[1], where);
        max_instance = std::max(max_instance, instance);
    }

    const std::size_t m = max_instance;
    const std::size_t d = meta.size();
    const std::size_t l = max_timestep;
    std::vector<double> values(m * d * l, 0.0);
    std::vector<char> seen(values.size(), 0);
    for (const auto& c : cells) {
        const std::size_t flat = (c.instance - 1) * d * l + c.feature * l + (c.timestep - 1);
        if (seen[flat]) {
            throw FormatError("values.csv: duplicate cell (" + std::to_string(c.instance) + ", " +
                              meta[c.feature].name + ", " + std::to_string(c.timestep) + ")");
        }
        seen[flat] = 1;
        values[flat] = c.value;
    }
    for (std::size_t flat = 0; flat < seen.size(); ++flat) {
        if (!seen[flat]) {
            const std::size_t i = flat / (d * l) + 1;
            const std::size_t j = (flat / l) % d;
            const std::size_t k = flat % l + 1;
            throw FormatError("values.csv: missing cell (instance " + std::to_string(i) +
                              ", feature " + meta[j].name + ", timestep " + std::to_string(k) + ")");
        }
    }
    std::vector<double> targets(m);
    for (std::size_t i = 1; i <= m; ++i) {
        const auto it = target_rows.find(i);
        if (it == target_rows.end()) {
            throw FormatError("targets.csv: missing target for instance " + std::to_string(i));
        }
        targets[i - 1] = it->second;
    }
    try {
        return {m, d, l, std::move(values), std::move(targets), task, std::move(meta)};
    } catch (const InvariantError& e) {
        throw FormatError(dir.string() + ": " + e.what());
    }
}

void save_csv_long(const TemporalDataset& ds, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    std::ofstream values_out(dir / "values.csv", std::ios::trunc);
    std::ofstream targets_out(dir / "targets.csv", std::ios::trunc);
    std::ofstream meta_out(dir / "meta.json", std::ios::trunc);
    if (!values_out || !targets_out || !meta_out) throw IoError("cannot write into " + dir.string());
    values_out << "instance,feature,timestep,value\n";
    for (std::size_t i = 0; i < ds.num_instances(); ++i) {
        for (std::size_t j = 0; j < ds.num_features(); ++j) {
            const auto s = ds.series(i, j);
            for (std::size_t k = 0; k < s.size(); ++k) {
                values_out << (i + 1) << ',' << ds.feature_meta()[j].name << ',' << (k + 1) << ','
                           << format_double(s[k]) << '\n';
            }
        }
    }
    targets_out << "instance,target\n";
    for (std::size_t i = 0; i < ds.num_instances(); ++i) {
        targets_out << (i + 1) << ',' << format_double(ds.targets()[i]) << '\n';
    }
    meta_out << nlohmann::json{{"task", to_string(ds.task())},
                               {"features", features_json(ds.feature_meta())}}
                    .dump(2)
             << '\n';
    if (!values_out || !targets_out || !meta_out) throw IoError("write failed in " + dir.string());
}

}  // namespace

TemporalDataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
    if (path.empty()) throw IoError("empty dataset path");
    return format == DatasetFormat::binary ? load_binary(path) : load_csv_long(path);
}

void save_dataset(const TemporalDataset& dataset, const std::filesystem::path& path,
                  DatasetFormat format) {
    if (path.empty()) throw IoError("empty dataset path");
    if (format == DatasetFormat::binary) {
        save_binary(dataset, path);
    } else {
        save_csv_long(dataset, path);
    }
}

}  // namespace tix
