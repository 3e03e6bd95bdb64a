#pragma once

#include "partatlas/mesh.hpp"

#include <Eigen/Core>

#include <vector>

namespace partatlas::oracles {

/// Independent union-find over shared edges.
std::vector<std::vector<int>> components_union_find(const Mesh& mesh,
                                                    const std::vector<int>& faces);

/// Brute-force two-pass arithmetic for the area-stretch metric: per-face
/// clipped terms, chart value, and the flat list of inclusion flags.
struct BruteChartDistortion {
    std::vector<double> stretch;  // per face, NaN when excluded
    std::vector<double> term;     // clipped symmetric terms, NaN when excluded
    double chart_value = 1.0;
};
BruteChartDistortion brute_chart_distortion(const ChartMesh& cm, const Eigen::MatrixX2d& uv,
                                            double degenerate_eps, double clip = 10.0);

/// All-pairs triangle-interior overlap using convex polygon clipping areas.
bool brute_any_overlap(const ChartMesh& cm, const Eigen::MatrixX2d& uv);

/// Intersection area of two triangles (Sutherland-Hodgman).
double tri_intersection_area(const Vec2 a[3], const Vec2 b[3]);

}  // namespace partatlas::oracles
