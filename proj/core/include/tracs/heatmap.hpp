#pragma once

#include <filesystem>

#include "tracs/metrics.hpp"

namespace tracs {

// Renders the counts as an RGB PNG, one square cell per (gold, predicted)
// pair, rows top to bottom in vocabulary order. Darker blue means a larger
// share of the row's documents. A 1-pixel grey grid separates the cells.
void write_confusion_heatmap(const std::filesystem::path& path, const ConfusionMatrix& matrix,
                             int cell_pixels = 48);

}  // namespace tracs
