#include "partatlas/heuristics.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace partatlas {

OrientedBox compute_obb(const Mesh& mesh, const FaceSet& part, const FaceGeometry& geom) {
    OrientedBox box;
    double total_w = 0.0;
    Vec3 mean = Vec3::Zero();
    for (int f : part) {
        double w = geom.area[f];
        if (w <= 0.0) continue;
        const Face& t = mesh.faces[f];
        Vec3 c = (mesh.positions[t[0]] + mesh.positions[t[1]] + mesh.positions[t[2]]) / 3.0;
        mean += w * c;
        total_w += w;
    }
    bool fallback = total_w <= 0.0;
    if (!fallback) {
        mean /= total_w;
        // exact surface second moment (edge-midpoint rule is exact for
        // quadratics), so the axes do not depend on the tessellation
        Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
        for (int f : part) {
            double w = geom.area[f];
            if (w <= 0.0) continue;
            const Face& t = mesh.faces[f];
            const Vec3& a = mesh.positions[t[0]];
            const Vec3& b = mesh.positions[t[1]];
            const Vec3& c = mesh.positions[t[2]];
            Vec3 m01 = 0.5 * (a + b) - mean;
            Vec3 m12 = 0.5 * (b + c) - mean;
            Vec3 m20 = 0.5 * (c + a) - mean;
            cov += (w / 3.0) *
                   (m01 * m01.transpose() + m12 * m12.transpose() + m20 * m20.transpose());
        }
        cov /= total_w;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
        Eigen::Vector3d evals = es.eigenvalues();  // ascending
        // rank-deficient (all centroids collinear or coincident): the two
        // smallest eigenvalues vanish relative to the largest
        double scale = std::max(evals[2], 0.0);
        if (scale <= 0.0 || evals[1] <= 1e-12 * scale) {
            // a flat plane keeps rank 2; only rank <= 1 falls back
            if (evals[1] <= 1e-12 * scale) fallback = true;
        }
        if (!fallback) {
            Eigen::Matrix3d axes;
            axes.col(0) = es.eigenvectors().col(2);
            axes.col(1) = es.eigenvectors().col(1);
            axes.col(2) = es.eigenvectors().col(0);
            for (int i = 0; i < 2; ++i) {
                int arg = 0;
                axes.col(i).cwiseAbs().maxCoeff(&arg);
                if (axes(arg, i) < 0) axes.col(i) *= -1.0;
            }
            axes.col(2) = axes.col(0).cross(axes.col(1));
            box.axes = axes;
        }
    }
    if (fallback) box.axes = Eigen::Matrix3d::Identity();

    Vec3 lo(1e300, 1e300, 1e300), hi(-1e300, -1e300, -1e300);
    for (int f : part) {
        const Face& t = mesh.faces[f];
        for (int c = 0; c < 3; ++c) {
            Vec3 q = box.axes.transpose() * mesh.positions[t[c]];
            lo = lo.cwiseMin(q);
            hi = hi.cwiseMax(q);
        }
    }
    Vec3 mid = 0.5 * (lo + hi);
    box.center = box.axes * mid;
    box.half_extents = 0.5 * (hi - lo);
    return box;
}

std::vector<int> obb_labels(const Mesh& mesh, const FaceSet& part, const FaceGeometry& geom,
                            const OrientedBox& obb) {
    std::vector<int> labels(part.size(), 0);
    Vec3 dirs[6];
    for (int a = 0; a < 3; ++a) {
        dirs[2 * a] = obb.axes.col(a);
        dirs[2 * a + 1] = -obb.axes.col(a);
    }
    int i = 0;
    for (int f : part) {
        const Vec3& n = geom.normal[f];
        int best = 0;
        double best_dot = dirs[0].dot(n);
        for (int d = 1; d < 6; ++d) {
            double v = dirs[d].dot(n);
            if (v > best_dot) {
                best_dot = v;
                best = d;
            }
        }
        labels[i++] = best;
    }
    return labels;
}

std::vector<ChartSet> gen_candidates_h1(const Mesh& mesh, const FaceAdjacency& adj,
                                        const Eigen::MatrixXd& unit_normal_features,
                                        const FaceSet& part, int t) {
    (void)mesh;
    const int n = part.size();
    const std::vector<int>& gl = part.faces();

    std::vector<int> local_of(adj.face_neighbors.size(), -1);
    for (int i = 0; i < n; ++i) local_of[gl[i]] = i;

    Eigen::MatrixXd feats(n, unit_normal_features.cols());
    std::vector<std::vector<int>> nbs(n);
    for (int i = 0; i < n; ++i) {
        feats.row(i) = unit_normal_features.row(gl[i]);
        for (int g : adj.face_neighbors[gl[i]]) {
            int l = local_of[g];
            if (l >= 0) nbs[i].push_back(l);
        }
    }

    std::vector<MergeStep> steps = agglomerate(feats, nbs);
    const int kmax = std::min(t, n);
    std::vector<ChartSet> out;
    out.reserve(kmax);
    for (int k = 1; k <= kmax; ++k) {
        std::vector<std::vector<int>> clusters = clusters_at(n, steps, k);
        ChartSet cs;
        cs.charts.reserve(clusters.size());
        for (std::vector<int>& cluster : clusters) {
            for (int& l : cluster) l = gl[l];
            ChartEntry entry;
            entry.faces = FaceSet(std::move(cluster));
            cs.charts.push_back(std::move(entry));
        }
        out.push_back(std::move(cs));
    }
    return out;
}

namespace {

struct H2Component {
    FaceSet faces;
    ChartEntry entry;   // evaluated lazily
    bool has_entry = false;
    bool alive = true;
    int min_face = 0;
};

}  // namespace

std::optional<ChartSet> gen_candidate_h2(const Mesh& mesh, const FaceAdjacency& adj,
                                         const FaceGeometry& geom, const FaceSet& part,
                                         double tau, const ChartEvaluator& evaluate,
                                         int component_cap) {
    OrientedBox obb = compute_obb(mesh, part, geom);
    std::vector<int> labels = obb_labels(mesh, part, geom, obb);

    // connected components of uniform label
    const std::vector<int>& gl = part.faces();
    const int n = part.size();
    std::vector<int> local_of(adj.face_neighbors.size(), -1);
    for (int i = 0; i < n; ++i) local_of[gl[i]] = i;

    std::vector<int> comp_of(n, -1);
    std::vector<H2Component> comps;
    std::vector<int> stack;
    for (int i = 0; i < n; ++i) {
        if (comp_of[i] >= 0) continue;
        int id = static_cast<int>(comps.size());
        std::vector<int> members;
        stack.push_back(i);
        comp_of[i] = id;
        while (!stack.empty()) {
            int cur = stack.back();
            stack.pop_back();
            members.push_back(gl[cur]);
            for (int g : adj.face_neighbors[gl[cur]]) {
                int l = local_of[g];
                if (l >= 0 && comp_of[l] < 0 && labels[l] == labels[cur]) {
                    comp_of[l] = id;
                    stack.push_back(l);
                }
            }
        }
        H2Component c;
        c.faces = FaceSet(std::move(members));
        c.min_face = c.faces.min_face();
        comps.push_back(std::move(c));
    }
    if (static_cast<int>(comps.size()) > component_cap) return std::nullopt;

    auto comp_index_of_face = [&](int global) { return comp_of[local_of[global]]; };
    auto rebind = [&](const H2Component& c, int id) {
        for (int f : c.faces) comp_of[local_of[f]] = id;
    };

    // shared 3D boundary length with each adjacent alive component
    auto neighbors_of = [&](int id) {
        std::map<int, double> shared;  // comp -> length
        for (int f : comps[id].faces) {
            const Face& t = mesh.faces[f];
            for (int c = 0; c < 3; ++c) {
                int a = t[c], b = t[(c + 1) % 3];
                int ei = adj.find_edge(a, b);
                if (ei < 0) continue;
                for (int g : adj.edges[ei].faces) {
                    if (g == f || local_of[g] < 0) continue;
                    int other = comp_index_of_face(g);
                    if (other == id || !comps[other].alive) continue;
                    shared[other] += (mesh.positions[a] - mesh.positions[b]).norm();
                }
            }
        }
        std::vector<std::pair<int, double>> out(shared.begin(), shared.end());
        std::sort(out.begin(), out.end(), [&](const auto& x, const auto& y) {
            if (x.second != y.second) return x.second > y.second;  // longest first
            return comps[x.first].min_face < comps[y.first].min_face;
        });
        return out;
    };

    bool progress = true;
    while (progress) {
        progress = false;
        std::vector<int> order;
        for (int i = 0; i < static_cast<int>(comps.size()); ++i)
            if (comps[i].alive) order.push_back(i);
        std::sort(order.begin(), order.end(), [&](int x, int y) {
            if (comps[x].faces.size() != comps[y].faces.size())
                return comps[x].faces.size() < comps[y].faces.size();
            return comps[x].min_face < comps[y].min_face;
        });
        for (int id : order) {
            if (!comps[id].alive) continue;  // absorbed earlier in this pass
            bool merged_once = true;
            while (merged_once) {
                merged_once = false;
                for (const auto& [other, len] : neighbors_of(id)) {
                    (void)len;
                    FaceSet u = FaceSet::union_of(comps[id].faces, comps[other].faces);
                    ChartEntry entry = evaluate(u);
                    if (entry.dist <= tau && entry.overlap_free) {
                        comps[id].faces = std::move(u);
                        comps[id].min_face = comps[id].faces.min_face();
                        comps[id].entry = std::move(entry);
                        comps[id].has_entry = true;
                        comps[other].alive = false;
                        rebind(comps[id], id);
                        progress = true;
                        merged_once = true;
                        break;  // re-rank neighbors of the grown component
                    }
                }
            }
        }
    }

    ChartSet cs;
    for (H2Component& c : comps) {
        if (!c.alive) continue;
        if (!c.has_entry) {
            c.entry = evaluate(c.faces);
            c.has_entry = true;
        }
        c.entry.faces = c.faces;
        cs.charts.push_back(std::move(c.entry));
    }
    std::sort(cs.charts.begin(), cs.charts.end(),
              [](const ChartEntry& a, const ChartEntry& b) {
                  return a.faces.min_face() < b.faces.min_face();
              });
    cs.refresh_dist();
    return cs;
}

}  // namespace partatlas
