#pragma once

#include <string>

#include "timex/pipeline.hpp"

namespace tix {

// Standalone SVG: one row per important feature (highest score first), one
// column per timestep. Cells of the reported window are filled with opacity
// proportional to the feature's score relative to the largest one; rows whose
// window ordering is significant get a diagonal hatch. Includes row labels
// and a colour bar.
std::string render_heatmap_svg(const AnalysisReport& report);

}  // namespace tix
