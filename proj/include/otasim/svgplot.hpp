#pragma once

#include <string>
#include <vector>

#include "otasim/pipeline.hpp"

namespace otasim::svg {

enum class PlotKind { sensors, snr_matrix, drift };

/// Static SVG of an experiment table: one series per group, mean line with
/// +-1 std error bars per cell. Output bytes are deterministic for a given
/// row list.
std::string render_plot(const std::vector<pipeline::SweepRow>& rows, PlotKind kind);

/// CSV -> SVG file; the CSV must follow the csvio column contract.
void emit_plot(const std::string& csv_path, PlotKind kind, const std::string& out_path);

}  // namespace otasim::svg
