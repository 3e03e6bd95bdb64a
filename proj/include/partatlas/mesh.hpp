#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace partatlas {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Face = Eigen::Vector3i;

/// Relative area threshold below which a face counts as degenerate:
/// area < kDegenerateAreaFactor * bbox_diagonal^2.
inline constexpr double kDegenerateAreaFactor = 1e-12;

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Indexed triangle mesh. Faces store ordered vertex-index triples.
struct Mesh {
    std::vector<Vec3> positions;
    std::vector<Face> faces;

    int vertex_count() const { return static_cast<int>(positions.size()); }
    int face_count() const { return static_cast<int>(faces.size()); }
    double bbox_diagonal() const;
};

/// Sorted, unique face indices into a parent mesh.
class FaceSet {
public:
    FaceSet() = default;
    explicit FaceSet(std::vector<int> faces);

    const std::vector<int>& faces() const { return faces_; }
    int size() const { return static_cast<int>(faces_.size()); }
    bool empty() const { return faces_.empty(); }
    int min_face() const { return faces_.empty() ? -1 : faces_.front(); }
    bool contains(int f) const;

    auto begin() const { return faces_.begin(); }
    auto end() const { return faces_.end(); }

    static FaceSet all(const Mesh& mesh);
    static FaceSet union_of(const FaceSet& a, const FaceSet& b);

private:
    std::vector<int> faces_;
};

/// Undirected edge table and per-face neighbor lists over shared edges.
struct FaceAdjacency {
    struct EdgeRec {
        int v0, v1;              // v0 < v1
        std::vector<int> faces;  // incident faces, ascending
    };

    std::vector<EdgeRec> edges;                      // first-encounter order
    std::unordered_map<std::uint64_t, int> edge_index;
    std::vector<std::vector<int>> face_neighbors;    // sorted unique, per face

    static FaceAdjacency build(const Mesh& mesh);

    int find_edge(int a, int b) const;
    int max_edge_valence() const;

    static std::uint64_t edge_key(int a, int b) {
        if (a > b) std::swap(a, b);
        return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
    }
};

/// Per-face unit normals and 3D areas. Zero-area faces get normal (0,0,0).
struct FaceGeometry {
    std::vector<Vec3> normal;
    std::vector<double> area;
    std::vector<char> degenerate;
    double total_area = 0.0;
};

FaceGeometry face_geometry(const Mesh& mesh);

struct LoadReport {
    int dropped_repeated_index = 0;   // faces removed at load
    std::vector<int> zero_area_faces; // kept but flagged
    int vertex_count = 0;
    int face_count = 0;
};

/// Reads ASCII OBJ `v`/`f` records; polygons are fan-triangulated. Faces with
/// repeated vertex indices are dropped and counted in the report.
Mesh load_obj(const std::string& path, LoadReport* report = nullptr);

struct RepairReport {
    int split_edges = 0;
    int duplicated_vertices = 0;
    int bowtie_vertices = 0;
    bool changed() const { return split_edges > 0 || bowtie_vertices > 0; }
};

/// Splits every edge with more than two incident faces into N-1 distinct
/// edges by duplicating the shared endpoints for the demoted faces, then
/// duplicates bowtie vertices per edge-connected face wedge.
Mesh repair_non_manifold(const Mesh& mesh, RepairReport* report = nullptr);

/// Partition of `faces` into maximal edge-connected subsets, ordered by
/// ascending minimum face index.
std::vector<FaceSet> connected_components(const Mesh& mesh, const FaceAdjacency& adj,
                                          const FaceSet& faces);

enum class DiskReason {
    disk,
    empty,
    non_manifold_edge,
    closed_surface,
    pinched_boundary,
    multiple_boundary_loops,
    wrong_euler,
};

struct DiskCheck {
    bool disk = false;
    DiskReason reason = DiskReason::disk;
    int boundary_loops = 0;

    explicit operator bool() const { return disk; }
};

/// True iff the face set is a manifold disk: Euler characteristic 1 and the
/// boundary edges form exactly one simple closed loop.
DiskCheck is_disk(const Mesh& mesh, const FaceSet& faces);

/// Compact submesh of a chart. Local vertices are the vertices referenced by
/// the chart's faces, in ascending global order.
struct ChartMesh {
    std::vector<Vec3> positions;
    std::vector<Face> faces;               // local indices
    std::vector<int> vertex_global;        // local -> parent vertex
    std::vector<int> face_global;          // local -> parent face

    int vertex_count() const { return static_cast<int>(positions.size()); }
    int face_count() const { return static_cast<int>(faces.size()); }
};

ChartMesh extract_chart(const Mesh& mesh, const FaceSet& faces);

/// Local edge structure of a chart mesh.
struct ChartTopology {
    struct Edge {
        int v0, v1;   // v0 < v1, local
        int f0, f1;   // incident faces; f1 = -1 on boundary
    };
    std::vector<Edge> edges;
    std::vector<char> boundary_vertex;   // per local vertex
    int boundary_edge_count = 0;
    bool manifold = true;                // no edge with >2 incident faces

    std::vector<int> boundary_vertices() const;
};

ChartTopology build_topology(const ChartMesh& chart);

/// One chart's contribution to an OBJ file: global face ids plus one UV per
/// face corner (aligned with the parent mesh's vertex order for that face).
struct ChartUVs {
    std::vector<int> faces;
    std::vector<std::array<Vec2, 3>> corner_uv;
    int atlas = 0;
};

/// Writes `v`, `vt`, and `f v/vt` records with `usemtl chart_<k>` group
/// markers. Every face must belong to exactly one chart. With more than one
/// atlas, writes one OBJ per atlas next to `path` plus the combined file.
void save_obj(const Mesh& mesh, const std::vector<ChartUVs>& charts, int n_atlases,
              const std::string& path);

}  // namespace partatlas
