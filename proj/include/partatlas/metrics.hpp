#pragma once

#include "partatlas/flatten.hpp"
#include "partatlas/mesh.hpp"

#include <Eigen/Core>

#include <limits>
#include <vector>

namespace partatlas {

/// Per-triangle distortion terms are clipped to this value before averaging.
inline constexpr double kStretchClip = 10.0;

inline constexpr double kInfDistortion = std::numeric_limits<double>::infinity();

/// All quality measures of one decomposition.
struct DistortionReport {
    std::vector<double> per_chart_distortion;
    double set_distortion = 0.0;
    double overall_area_distortion = 0.0;
    double angular_metric = 0.0;
    double seam_length = 0.0;
    int flipped_faces = 0;
    int excluded_degenerate_faces = 0;
};

/// Distortion terms for one chart under a given UV assignment.
struct DistortionTerms {
    std::vector<double> term;  // per chart face; NaN marks an excluded degenerate face
    int included = 0;
    int excluded_degenerate = 0;
    int flipped = 0;
    double chart_value = 1.0;  // mean of clipped terms; 1.0 when every face is degenerate
    bool all_degenerate = false;
};

/// Ratio normalizer and clipped per-face terms. `degenerate_eps` is the 3D
/// area threshold below which a face is excluded from the means (callers
/// derive it from the parent mesh bounding box).
DistortionTerms distortion_terms(const ChartMesh& cm, const Eigen::MatrixX2d& uv,
                                 double degenerate_eps);

/// Stretch of one face: its own 2D/3D area ratio over the chart mean ratio.
double face_stretch(const ChartMesh& cm, const Eigen::MatrixX2d& uv, int face,
                    double degenerate_eps);

std::vector<double> face_stretches(const ChartMesh& cm, const Eigen::MatrixX2d& uv,
                                   double degenerate_eps);

/// Mean over included faces of min(max(s, 1/s), clip); flipped faces
/// contribute the clip value. Invalid parameterizations score +infinity.
double chart_distortion(const ChartMesh& cm, const ChartParam& param, double degenerate_eps);

/// Maximum of chart_distortion over the set (the value compared against tau).
double set_distortion(const std::vector<double>& per_chart);

/// Mean of the clipped terms over all included faces across charts, each face
/// still normalized by its own chart's mean ratio.
double overall_area_distortion(const std::vector<DistortionTerms>& charts);

/// Per-chart accumulator for the angular metric: sum of |cos| between the
/// per-face tangent and bitangent, plus the number of contributing faces.
struct AngularAccum {
    double sum_abs_cos = 0.0;
    int faces = 0;
};

AngularAccum angular_accum(const ChartMesh& cm, const Eigen::MatrixX2d& uv, double degenerate_eps);

/// 1 - mean |cos| over all faces; 1.0 means perfectly conformal.
double angular_metric(const std::vector<AngularAccum>& charts);

/// Sum of the 2D lengths of the chart's boundary edges under `uv`.
double chart_boundary_length(const ChartMesh& cm, const Eigen::MatrixX2d& uv);

/// True iff the parameterization has no flipped face and no two UV triangles
/// of the chart intersect in their interiors. Triangles sharing a mesh vertex
/// or edge do not count as overlapping.
bool no_overlap(const ChartMesh& cm, const ChartParam& param);
bool no_overlap(const ChartMesh& cm, const Eigen::MatrixX2d& uv, int flipped_count);

/// Exact interior-overlap test for two UV triangles. `ia`/`ib` carry the mesh
/// vertex id of each corner; corners with equal ids are treated as the same
/// point combinatorially (shared vertices and edges never count as overlap).
bool tri_interiors_intersect(const Vec2 a[3], const Vec2 b[3], const int ia[3], const int ib[3]);

}  // namespace partatlas
