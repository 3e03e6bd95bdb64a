#pragma once

#include "partatlas/mesh.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace partatlas {

/// One chart to pack: solver-space UVs plus its 3D area and part id.
struct PackInput {
    const ChartMesh* mesh = nullptr;
    Eigen::MatrixX2d uv;
    double area3d = 0.0;
    int part_id = 0;
};

struct Placement {
    int chart = -1;
    int rotation = 0;      // degrees, 0 or 90
    Vec2 translation = Vec2::Zero();
    double chart_scale = 1.0;  // per-chart texel-density factor
};

struct Atlas {
    std::vector<Placement> placements;
    double padding = 0.0;
    int index = 0;
    double global_scale = 1.0;
};

struct PackResult {
    std::vector<Atlas> atlases;
    std::vector<Eigen::MatrixX2d> packed_uv;  // per chart, in [0,1]^2
    std::vector<int> atlas_of;                // per chart
    double global_scale = 1.0;
};

/// Scales charts to uniform texel density, rotates each by 0 or 90 degrees,
/// groups charts by part (balancing whole groups across atlases by 3D area),
/// and packs with a skyline bottom-left heuristic. The global scale is the
/// largest at which every atlas fits, found by bisection.
PackResult pack(const std::vector<PackInput>& charts, int n_atlases = 1,
                double padding = 2.0 / 1024);

struct AtlasImage {
    int width = 0, height = 0;
    std::vector<unsigned char> rgb;  // row-major, 3 bytes per pixel
};

/// Rasterizes each atlas: chart triangles filled with a per-part color
/// (shade varies per chart), boundary edges in black.
std::vector<AtlasImage> render_atlases(const PackResult& packed,
                                       const std::vector<PackInput>& charts, int resolution);

/// Fraction of each unit square covered by chart area, averaged over atlases.
double efficiency(const PackResult& packed, const std::vector<PackInput>& charts);

void write_png(const std::string& path, const AtlasImage& image);

}  // namespace partatlas
