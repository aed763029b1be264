#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "timex/pipeline.hpp"

namespace tix {

// Results document. Timing is left out unless `include_timing` is set so that
// equal-seed runs produce byte-identical files.
std::string results_to_json(const AnalysisReport& report, bool include_timing = false);
void write_results(const AnalysisReport& report, const std::filesystem::path& path, bool include_timing = false);

// Parses a results document back. Fields that only live in memory (search
// diagnostics, traces, group tree) are left empty; unknown fields are ignored.
AnalysisReport results_from_json(const std::string& text);
AnalysisReport read_results(const std::filesystem::path& path);

// Feature-group hierarchy: [{"name":..,"features":[..],"subgroups":[..]}, ...]
std::vector<FeatureGroup> groups_from_json(const std::string& text);
std::vector<FeatureGroup> load_groups(const std::filesystem::path& path);

}  // namespace tix
