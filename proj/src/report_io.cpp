#include "timex/report_io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "timex/errors.hpp"

namespace tix {

using nlohmann::ordered_json;

namespace {

ordered_json optional_number(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

ordered_json ordering_json(const std::optional<OrderingResult>& r) {
    if (!r) return nullptr;
    return ordered_json{{"p", r->p}, {"important", r->important}};
}

ordered_json group_json(const FeatureGroup& g) {
    ordered_json doc{{"name", g.name}, {"features", g.features}};
    if (!g.subgroups.empty()) {
        ordered_json subs = ordered_json::array();
        for (const auto& s : g.subgroups) subs.push_back(group_json(s));
        doc["subgroups"] = std::move(subs);
    }
    return doc;
}

FeatureGroup group_from_json(const ordered_json& doc) {
    FeatureGroup g;
    g.name = doc.at("name").get<std::string>();
    if (doc.contains("features")) g.features = doc.at("features").get<std::vector<std::string>>();
    if (doc.contains("subgroups")) {
        for (const auto& s : doc.at("subgroups")) g.subgroups.push_back(group_from_json(s));
    }
    return g;
}

ordered_json trace_json(const TestNode& node) {
    ordered_json doc{{"id", node.id},
                     {"kind", to_string(node.kind)},
                     {"p", optional_number(node.p_value)},
                     {"decision", to_string(node.decision)},
                     {"evaluations", node.evaluations}};
    if (!node.children.empty()) {
        ordered_json children = ordered_json::array();
        for (const auto& c : node.children) children.push_back(trace_json(c));
        doc["children"] = std::move(children);
    }
    return doc;
}

std::optional<double> read_optional(const ordered_json& doc, const char* key) {
    if (!doc.contains(key) || doc.at(key).is_null()) return std::nullopt;
    return doc.at(key).get<double>();
}

std::optional<OrderingResult> read_ordering(const ordered_json& doc, const char* key) {
    if (!doc.contains(key) || doc.at(key).is_null()) return std::nullopt;
    const auto& o = doc.at(key);
    return OrderingResult{o.at("p").get<double>(), o.at("important").get<bool>()};
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

LossType loss_type_from_string(const std::string& text) {
    if (text == "quadratic") return LossType::quadratic;
    if (text == "binary_cross_entropy") return LossType::binary_cross_entropy;
    throw FormatError("unknown loss type: " + text);
}

}  // namespace

std::string results_to_json(const AnalysisReport& report, bool include_timing) {
    const auto& c = report.config;
    ordered_json config{{"gamma", c.gamma},
                        {"fdr", c.q},
                        {"permutations", c.permutations},
                        {"seed", c.seed},
                        {"loss", {{"type", to_string(report.loss.type)}, {"clamp_epsilon", report.loss.clamp_epsilon}}},
                        {"batch_size", c.batch_size}};
    if (!c.feature_groups.empty()) {
        ordered_json groups = ordered_json::array();
        for (const auto& g : c.feature_groups) groups.push_back(group_json(g));
        config["feature_groups"] = std::move(groups);
    }

    ordered_json doc{{"config", std::move(config)},
                     {"baseline_loss", report.baseline_mean_loss},
                     {"timesteps", report.timesteps},
                     {"model_evaluations", report.model_evaluations}};
    if (include_timing) doc["wall_seconds"] = report.wall_seconds;

    ordered_json features = ordered_json::array();
    for (const auto& f : report.features) {
        ordered_json window = nullptr;
        if (f.window) window = ordered_json{{"start", f.window->start}, {"end", f.window->end}};
        ordered_json entry{{"name", f.feature},
                           {"important", f.important},
                           {"score", optional_number(f.importance_score)},
                           {"p_overall", optional_number(f.p_overall)},
                           {"window", std::move(window)},
                           {"window_score", optional_number(f.window_score)},
                           {"p_window", optional_number(f.p_window)},
                           {"feature_ordering", ordering_json(f.feature_ordering)},
                           {"window_ordering", ordering_json(f.window_ordering)},
                           {"trace", trace_json(f.trace)}};
        features.push_back(std::move(entry));
    }
    doc["features"] = std::move(features);

    if (!report.groups.empty()) {
        ordered_json groups = ordered_json::array();
        for (const auto& g : report.groups) {
            groups.push_back(
                {{"name", g.name}, {"p", optional_number(g.p_value)}, {"decision", to_string(g.decision)}});
        }
        doc["groups"] = std::move(groups);
    }
    return doc.dump(2) + "\n";
}

void write_results(const AnalysisReport& report, const std::filesystem::path& path, bool include_timing) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << results_to_json(report, include_timing);
    if (!out) throw IoError("failed writing " + path.string());
}

AnalysisReport results_from_json(const std::string& text) {
    AnalysisReport report;
    try {
        const auto doc = ordered_json::parse(text);
        const auto& c = doc.at("config");
        report.config.gamma = c.at("gamma").get<double>();
        report.config.q = c.at("fdr").get<double>();
        report.config.permutations = c.at("permutations").get<std::size_t>();
        report.config.seed = c.at("seed").get<std::uint64_t>();
        if (c.contains("batch_size")) report.config.batch_size = c.at("batch_size").get<std::size_t>();
        if (c.contains("loss")) {
            report.loss.type = loss_type_from_string(c.at("loss").at("type").get<std::string>());
            report.loss.clamp_epsilon = c.at("loss").value("clamp_epsilon", 1e-12);
            report.config.loss = report.loss;
        }
        if (c.contains("feature_groups")) {
            for (const auto& g : c.at("feature_groups")) report.config.feature_groups.push_back(group_from_json(g));
        }
        report.baseline_mean_loss = doc.at("baseline_loss").get<double>();
        report.timesteps = doc.value("timesteps", std::size_t{0});
        report.model_evaluations = doc.value("model_evaluations", std::uint64_t{0});
        report.wall_seconds = doc.value("wall_seconds", 0.0);
        std::size_t index = 0;
        for (const auto& f : doc.at("features")) {
            FeatureReport fr;
            fr.feature = f.at("name").get<std::string>();
            fr.index = index++;
            fr.important = f.at("important").get<bool>();
            fr.importance_score = read_optional(f, "score");
            fr.p_overall = read_optional(f, "p_overall");
            if (f.contains("window") && !f.at("window").is_null()) {
                fr.window = Window{f.at("window").at("start").get<std::size_t>(),
                                   f.at("window").at("end").get<std::size_t>()};
            }
            fr.window_score = read_optional(f, "window_score");
            fr.p_window = read_optional(f, "p_window");
            fr.feature_ordering = read_ordering(f, "feature_ordering");
            fr.window_ordering = read_ordering(f, "window_ordering");
            report.features.push_back(std::move(fr));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed results document: ") + e.what());
    }
    return report;
}

AnalysisReport read_results(const std::filesystem::path& path) { return results_from_json(read_file(path)); }

std::vector<FeatureGroup> groups_from_json(const std::string& text) {
    std::vector<FeatureGroup> groups;
    try {
        const auto doc = ordered_json::parse(text);
        if (!doc.is_array()) throw FormatError("feature groups must be a JSON array");
        for (const auto& g : doc) groups.push_back(group_from_json(g));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed feature groups: ") + e.what());
    }
    return groups;
}

std::vector<FeatureGroup> load_groups(const std::filesystem::path& path) { return groups_from_json(read_file(path)); }

}  // namespace tix
