#include "timex/heatmap.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace tix {

namespace {

constexpr int kCell = 24;
constexpr int kLabelWidth = 140;
constexpr int kTop = 40;
constexpr int kBarWidth = 16;

std::string escape(const std::string& text) {
    std::string out;
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

}  // namespace

std::string render_heatmap_svg(const AnalysisReport& report) {
    std::vector<const FeatureReport*> rows;
    for (const auto& f : report.features) {
        if (f.important) rows.push_back(&f);
    }
    std::stable_sort(rows.begin(), rows.end(), [](const FeatureReport* a, const FeatureReport* b) {
        return a->importance_score.value_or(0.0) > b->importance_score.value_or(0.0);
    });
    double top = 0.0;
    for (const auto* f : rows) top = std::max(top, f->importance_score.value_or(0.0));

    std::size_t L = report.timesteps;
    for (const auto* f : rows) {
        if (f->window) L = std::max(L, f->window->end);
    }
    const int grid_width = static_cast<int>(L) * kCell;
    const int grid_height = static_cast<int>(std::max<std::size_t>(rows.size(), 1)) * kCell;
    const int width = kLabelWidth + grid_width + 90;
    const int height = kTop + grid_height + 50;

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
        << "<defs>\n"
        << "<pattern id=\"hatch\" patternUnits=\"userSpaceOnUse\" width=\"6\" height=\"6\" "
           "patternTransform=\"rotate(45)\"><line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"6\" stroke=\"#000\" "
           "stroke-width=\"1.5\"/></pattern>\n"
        << "<linearGradient id=\"scale\" x1=\"0\" y1=\"1\" x2=\"0\" y2=\"0\">"
           "<stop offset=\"0\" stop-color=\"#08519c\" stop-opacity=\"0\"/>"
           "<stop offset=\"1\" stop-color=\"#08519c\" stop-opacity=\"1\"/></linearGradient>\n"
        << "</defs>\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";

    for (std::size_t k = 1; k <= L; ++k) {
        svg << "<text class=\"timestep\" x=\"" << kLabelWidth + static_cast<int>(k - 1) * kCell + kCell / 2
            << "\" y=\"" << kTop - 8 << "\" text-anchor=\"middle\">" << k << "</text>\n";
    }

    if (rows.empty()) {
        svg << "<text class=\"empty\" x=\"" << kLabelWidth << "\" y=\"" << kTop + kCell / 2 + 4
            << "\">no important features</text>\n";
    }

    for (std::size_t r = 0; r < rows.size(); ++r) {
        const FeatureReport& f = *rows[r];
        const int y = kTop + static_cast<int>(r) * kCell;
        const double score = f.importance_score.value_or(0.0);
        const double shade = top > 0.0 ? std::clamp(score / top, 0.0, 1.0) : 1.0;
        svg << "<g class=\"feature-row\" data-feature=\"" << escape(f.feature) << "\">\n"
            << "<text class=\"label\" x=\"" << kLabelWidth - 6 << "\" y=\"" << y + kCell / 2 + 4
            << "\" text-anchor=\"end\">" << escape(f.feature) << "</text>\n";
        for (std::size_t k = 1; k <= L; ++k) {
            const int x = kLabelWidth + static_cast<int>(k - 1) * kCell;
            const bool inside = f.window && f.window->contains(k);
            if (inside) {
                svg << "<rect class=\"cell\" x=\"" << x << "\" y=\"" << y << "\" width=\"" << kCell
                    << "\" height=\"" << kCell << "\" fill=\"#08519c\" fill-opacity=\"" << num(shade)
                    << "\" stroke=\"#cccccc\"/>\n";
            } else {
                svg << "<rect class=\"blank\" x=\"" << x << "\" y=\"" << y << "\" width=\"" << kCell
                    << "\" height=\"" << kCell << "\" fill=\"none\" stroke=\"#eeeeee\"/>\n";
            }
        }
        if (f.window && f.window_ordering && f.window_ordering->important) {
            svg << "<rect class=\"hatch\" x=\"" << kLabelWidth + static_cast<int>(f.window->start - 1) * kCell
                << "\" y=\"" << y << "\" width=\"" << static_cast<int>(f.window->width()) * kCell
                << "\" height=\"" << kCell << "\" fill=\"url(#hatch)\"/>\n";
        }
        svg << "</g>\n";
    }

    const int bar_x = kLabelWidth + grid_width + 24;
    svg << "<rect class=\"colorbar\" x=\"" << bar_x << "\" y=\"" << kTop << "\" width=\"" << kBarWidth
        << "\" height=\"" << grid_height << "\" fill=\"url(#scale)\" stroke=\"#999999\"/>\n"
        << "<text x=\"" << bar_x + kBarWidth + 4 << "\" y=\"" << kTop + 10 << "\">" << num(top) << "</text>\n"
        << "<text x=\"" << bar_x + kBarWidth + 4 << "\" y=\"" << kTop + grid_height << "\">0</text>\n"
        << "<text x=\"" << kLabelWidth << "\" y=\"" << kTop + grid_height + 30
        << "\">importance score; hatched windows are ordering-sensitive</text>\n"
        << "</svg>\n";
    return svg.str();
}

}  // namespace tix
