#pragma once

#include "partatlas/mesh.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace partatlas {

/// Per-face feature vectors, one row per face, L2-normalized.
struct FaceFeatureField {
    enum class Source { normals, external_file };

    Eigen::MatrixXd features;
    Source source = Source::normals;

    int dim() const { return static_cast<int>(features.cols()); }
    int count() const { return static_cast<int>(features.rows()); }
};

/// Face normals as features (dim 3). The normal is constant over a face, so
/// averaging `samples_per_face` point samples is the identity; the parameter
/// is accepted for interface parity and ignored. Degenerate faces inherit the
/// feature of their lowest-index edge-neighbor, or (1,0,0) if isolated.
FaceFeatureField features_from_normals(const Mesh& mesh, const FaceAdjacency& adj,
                                       const FaceGeometry& geom, int samples_per_face = 10);

/// Reads a per-face feature file. Binary layout ("PFF1"): magic, u32
/// face_count, u32 dim, face_count*dim little-endian float32. Text layout
/// ("PFT1"): one whitespace-separated row per face.
FaceFeatureField load_features(const std::string& path, const Mesh& mesh);

/// Binary hierarchy over faces. Leaves are nodes 0..F-1 (one face each);
/// merge step i creates node F+i. The root encompasses all faces.
struct PartTree {
    struct Node {
        int left = -1, right = -1;  // -1 for leaves
        int face = -1;              // leaf payload
        int count = 1;              // faces in subtree
        double merge_height = 0.0;
    };

    std::vector<Node> nodes;
    int root = -1;

    bool is_leaf(int n) const { return nodes[n].left < 0; }
    int face_count() const { return root < 0 ? 0 : nodes[root].count; }

    /// Faces of the subtree rooted at `n`, ascending.
    std::vector<int> collect_faces(int n) const;

    /// Restriction of the subtree at `node` to `faces`: nodes with empty
    /// intersection are dropped and single-child chains contracted.
    PartTree restrict_to(int node, const FaceSet& faces) const;
};

/// One agglomeration step. Cluster ids: 0..n-1 are the initial items; the
/// step at index i creates cluster n+i. `a` carries the smaller minimum item.
struct MergeStep {
    int a, b;
    double dist;
};

/// Connectivity-constrained agglomerative clustering with average-linkage
/// cosine distance (1 - dot of member means), maintained incrementally. Only
/// edge-adjacent clusters merge; ties break on the lexicographically smaller
/// (min item, min item) pair. When no adjacent pairs remain, the remaining
/// clusters merge by feature distance alone.
std::vector<MergeStep> agglomerate(const Eigen::MatrixXd& unit_features,
                                   const std::vector<std::vector<int>>& neighbors);

/// Partition of 0..n-1 after merging down to exactly k clusters. Clusters are
/// ordered by ascending minimum item; members are sorted.
std::vector<std::vector<int>> clusters_at(int n, const std::vector<MergeStep>& steps, int k);

PartTree build_tree(const Mesh& mesh, const FaceAdjacency& adj, const FaceFeatureField& field);

}  // namespace partatlas
