#pragma once

#include "partatlas/flatten.hpp"
#include "partatlas/mesh.hpp"
#include "partatlas/metrics.hpp"
#include "partatlas/part_tree.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace partatlas {

/// A chart with its cached evaluation. `param` is present only when the chart
/// was flattened at full resolution (surrogate evaluations cache dist and the
/// overlap flag alone; the final pass re-flattens exactly).
struct ChartEntry {
    FaceSet faces;
    ChartParam param;
    double dist = kInfDistortion;
    bool overlap_free = false;
    bool evaluated = false;
    int part_id = -1;
};

/// A candidate decomposition: disjoint connected charts for one part.
struct ChartSet {
    std::vector<ChartEntry> charts;
    double dist = kInfDistortion;  // max over charts once evaluated

    int count() const { return static_cast<int>(charts.size()); }
    bool admissible(double tau) const {
        if (charts.empty() || !(dist <= tau)) return false;
        for (const ChartEntry& c : charts)
            if (!c.overlap_free) return false;
        return true;
    }
    void refresh_dist() {
        dist = 0.0;
        for (const ChartEntry& c : charts) dist = std::max(dist, c.dist);
    }
};

struct OrientedBox {
    Vec3 center = Vec3::Zero();
    Eigen::Matrix3d axes = Eigen::Matrix3d::Identity();  // columns, right-handed
    Vec3 half_extents = Vec3::Zero();
};

/// PCA of the exact area-weighted surface covariance; axes ordered by
/// descending eigenvalue, sign-fixed, third axis from the cross product.
/// Falls back to an axis-aligned box when the covariance is rank-deficient.
OrientedBox compute_obb(const Mesh& mesh, const FaceSet& part, const FaceGeometry& geom);

/// OBB face label 0..5 per part face: the +-axis direction most aligned with
/// the face normal, ties to the lower label.
std::vector<int> obb_labels(const Mesh& mesh, const FaceSet& part, const FaceGeometry& geom,
                            const OrientedBox& obb);

/// Candidate ladder of the Normal heuristic: one constrained clustering run on
/// face normals, cut at k = 1..min(t, |part|) clusters. Charts are connected
/// by construction; no flattening is performed here.
std::vector<ChartSet> gen_candidates_h1(const Mesh& mesh, const FaceAdjacency& adj,
                                        const Eigen::MatrixXd& unit_normal_features,
                                        const FaceSet& part, int t);

/// Evaluates one tentative chart: flattens it (implementation decided by the
/// caller: surrogate, exact, prescreen) and fills dist/overlap/param.
using ChartEvaluator = std::function<ChartEntry(const FaceSet&)>;

/// Merge heuristic: label faces by OBB side, split into uniform-label
/// components, then greedily merge adjacent components (smallest component
/// first, longest shared boundary first) while the merged chart stays under
/// tau and overlap-free. Returns nullopt when the initial component count
/// exceeds `component_cap`.
std::optional<ChartSet> gen_candidate_h2(const Mesh& mesh, const FaceAdjacency& adj,
                                         const FaceGeometry& geom, const FaceSet& part,
                                         double tau, const ChartEvaluator& evaluate,
                                         int component_cap = 500);

}  // namespace partatlas
