#pragma once

#include "partatlas/mesh.hpp"

#include <vector>

namespace partatlas {

/// Decimated chart. Boundary vertices are never collapsed, so every original
/// boundary vertex appears with an identical position.
struct SimplifiedChart {
    ChartMesh mesh;
    std::vector<int> boundary_vertices;         // local ids in `mesh`
    std::vector<std::vector<int>> face_origin;  // per simplified face: input chart face ids
    int collapses = 0;
};

/// Quadric edge collapse restricted to interior edges (no edge touching a
/// boundary vertex is ever collapsed). Collapses are ordered by quadric error
/// normalized by the squared bounding-box diagonal and stop once the cheapest
/// exceeds `error_threshold`, after `max_iters` accepted collapses, or when no
/// legal collapse remains. Collapses that would flip a face normal by more
/// than 90 degrees or break manifoldness are skipped.
SimplifiedChart simplify_boundary_locked(const ChartMesh& chart, double error_threshold = 1e-4,
                                         int max_iters = 1000);

}  // namespace partatlas
