#pragma once

#include <string>
#include <vector>

#include "refnet/image.hpp"

namespace refnet {

struct PlotSeries {
    std::string label;
    std::vector<double> values;
};

/// Minimal raster charts written as PPM files (loss curves, per-category
/// bars). Batch-tool output only, no interactive UI.
void write_line_chart(const std::string& path, const std::vector<PlotSeries>& series,
                      const std::string& title, int width = 720, int height = 420);

void write_bar_chart(const std::string& path,
                     const std::vector<std::pair<std::string, double>>& bars,
                     const std::string& title, int width = 720, int height = 420);

} // namespace refnet
