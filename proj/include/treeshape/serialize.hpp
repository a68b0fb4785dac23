#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "treeshape/irrigation.hpp"
#include "treeshape/measure.hpp"
#include "treeshape/shape_optimizer.hpp"
#include "treeshape/sunlight.hpp"

namespace treeshape {

using json = nlohmann::json;

// Measures: {"d": 2, "atoms": [{"x": [..], "m": ..}]}
json measure_to_json(const DiscreteMeasure& mu);
DiscreteMeasure measure_from_json(const json& j);

// Grids: CSV (row-major, x fastest) plus a JSON header carrying the domain
// and resolution.
json grid_header_json(const GridDensity& f);
std::string grid_to_csv(const GridDensity& f);
GridDensity grid_from_csv(const json& header, const std::string& csv);

std::string plane_to_csv(const PlaneDensity& p);

json tree_to_json(const FluxAnnotatedTree& t);

json report_to_json(const OptReport& rep);
std::string trace_to_csv(const OptReport& rep);

// SVG rendering is d=2 only: tree edges stroked with width proportional to
// flux^alpha, densities as a grayscale cell raster.
std::string render_svg(const FluxAnnotatedTree& tree, double alpha);
std::string render_svg(const GridDensity& density,
                       const FluxAnnotatedTree* tree, double alpha);

// Writes via a temp file and rename, so interrupted runs never leave partial
// output behind.
void atomic_write(const std::filesystem::path& path, const std::string& data);

}  // namespace treeshape
