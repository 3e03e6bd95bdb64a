#pragma once

#include "partatlas/mesh.hpp"

#include <Eigen/Core>

namespace partatlas {

enum class SolverKind { abf, lscm, projection };

const char* solver_name(SolverKind s);

/// Per-chart UV assignment. One UV per chart-local vertex; boundary vertices
/// of the parent mesh may carry different UVs in different charts.
struct ChartParam {
    Eigen::MatrixX2d uv;
    std::vector<double> signed_area2d;   // per chart face, majority orientation positive
    int flipped_count = 0;
    SolverKind solver = SolverKind::lscm;
    bool converged = false;
    bool valid = false;
    std::vector<double> abf_angles;      // optimized corner angles (abf only), 3 per face
};

/// Orthographic projection onto the plane of the chart's area-weighted mean
/// normal. Cheap seed; meaningful only for near-planar charts.
ChartParam flatten_projection(const ChartMesh& chart);

/// Conformal least-squares flattening with two pinned boundary vertices (the
/// most distant pair, pinned to (0,0) and (1,0)).
ChartParam flatten_lscm(const ChartMesh& chart);

/// ABF++: optimizes per-corner angles under triangle-sum, vertex-sum and
/// sine-product reconstruction constraints (Newton on the Lagrangian with the
/// angle and triangle blocks eliminated), then reconstructs UVs by a conformal
/// fit in the optimized-angle metric. Falls back to flatten_lscm when the
/// Newton iteration breaks down.
ChartParam flatten_abf(const ChartMesh& chart, int outer_iters = 5, double grad_tol = 1e-5);

/// Dispatch on the configured solver.
ChartParam flatten_chart(const ChartMesh& chart, SolverKind solver, int abf_outer_iters = 5,
                         double abf_grad_tol = 1e-5);

}  // namespace partatlas
