#include "partatlas/simplify.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <queue>
#include <unordered_map>
#include <unordered_set>

namespace partatlas {

namespace {

struct HeapEntry {
    double cost;
    int edge_id;
    int u, v;          // u < v
    int ver_u, ver_v;  // vertex versions at push time
};

struct HeapCmp {
    bool operator()(const HeapEntry& a, const HeapEntry& b) const {
        if (a.cost != b.cost) return a.cost > b.cost;
        return a.edge_id > b.edge_id;
    }
};

Eigen::Matrix4d plane_quadric(const Vec3& p0, const Vec3& p1, const Vec3& p2) {
    Vec3 n = (p1 - p0).cross(p2 - p0);
    double len = n.norm();
    if (len == 0.0) return Eigen::Matrix4d::Zero();
    n /= len;
    Eigen::Vector4d plane(n.x(), n.y(), n.z(), -n.dot(p0));
    return plane * plane.transpose();
}

double quadric_error(const Eigen::Matrix4d& q, const Vec3& p) {
    Eigen::Vector4d v(p.x(), p.y(), p.z(), 1.0);
    return v.dot(q * v);
}

// optimal collapse position; falls back to the best of midpoint/endpoints
Vec3 optimal_position(const Eigen::Matrix4d& q, const Vec3& pu, const Vec3& pv) {
    Eigen::Matrix3d A = q.topLeftCorner<3, 3>();
    Vec3 b = -q.topRightCorner<3, 1>();
    Eigen::FullPivLU<Eigen::Matrix3d> lu(A);
    if (lu.isInvertible()) {
        Vec3 x = lu.solve(b);
        if (x.allFinite()) return x;
    }
    Vec3 mid = 0.5 * (pu + pv);
    double em = quadric_error(q, mid), eu = quadric_error(q, pu), ev = quadric_error(q, pv);
    if (em <= eu && em <= ev) return mid;
    return eu <= ev ? pu : pv;
}

}  // namespace

SimplifiedChart simplify_boundary_locked(const ChartMesh& chart, double error_threshold,
                                         int max_iters) {
    const int nv0 = chart.vertex_count();
    const int nf0 = chart.face_count();

    SimplifiedChart out;
    ChartTopology topo = build_topology(chart);

    std::vector<Vec3> pos = chart.positions;
    std::vector<Face> faces = chart.faces;
    std::vector<char> face_alive(nf0, 1);
    std::vector<char> vert_alive(nv0, 1);
    std::vector<int> version(nv0, 0);
    std::vector<std::vector<int>> vfaces(nv0);
    for (int f = 0; f < nf0; ++f)
        for (int c = 0; c < 3; ++c) vfaces[faces[f][c]].push_back(f);
    std::vector<std::vector<int>> origin(nf0);
    for (int f = 0; f < nf0; ++f) origin[f] = {f};

    double diag = 0.0;
    {
        Vec3 lo = pos.empty() ? Vec3::Zero() : pos[0], hi = lo;
        for (const Vec3& p : pos) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        diag = (hi - lo).norm();
    }
    const double diag2 = std::max(diag * diag, 1e-300);

    std::vector<Eigen::Matrix4d> quadric(nv0, Eigen::Matrix4d::Zero());
    for (int f = 0; f < nf0; ++f) {
        const Face& t = faces[f];
        Eigen::Matrix4d q = plane_quadric(pos[t[0]], pos[t[1]], pos[t[2]]);
        for (int c = 0; c < 3; ++c) quadric[t[c]] += q;
    }

    std::unordered_map<std::uint64_t, int> edge_ids;
    int next_edge_id = 0;
    auto edge_id_of = [&](int a, int b) {
        auto [it, inserted] = edge_ids.emplace(FaceAdjacency::edge_key(a, b), next_edge_id);
        if (inserted) ++next_edge_id;
        return it->second;
    };

    std::priority_queue<HeapEntry, std::vector<HeapEntry>, HeapCmp> heap;
    auto push_edge = [&](int a, int b) {
        if (a > b) std::swap(a, b);
        if (topo.boundary_vertex[a] || topo.boundary_vertex[b]) return;
        Eigen::Matrix4d q = quadric[a] + quadric[b];
        Vec3 p = optimal_position(q, pos[a], pos[b]);
        double cost = std::max(quadric_error(q, p), 0.0) / diag2;
        heap.push({cost, edge_id_of(a, b), a, b, version[a], version[b]});
    };

    for (int f = 0; f < nf0; ++f)
        for (int c = 0; c < 3; ++c) {
            int a = faces[f][c], b = faces[f][(c + 1) % 3];
            if (a < b) push_edge(a, b);
        }

    auto faces_with_edge = [&](int a, int b, std::vector<int>& outf) {
        outf.clear();
        for (int f : vfaces[a]) {
            if (!face_alive[f]) continue;
            const Face& t = faces[f];
            bool hasB = t[0] == b || t[1] == b || t[2] == b;
            if (hasB) outf.push_back(f);
        }
    };

    std::vector<int> shared_faces;
    int accepted = 0;
    while (!heap.empty() && accepted < max_iters) {
        HeapEntry e = heap.top();
        heap.pop();
        if (!vert_alive[e.u] || !vert_alive[e.v]) continue;
        if (version[e.u] != e.ver_u || version[e.v] != e.ver_v) continue;
        if (e.cost > error_threshold) break;  // heap is cost-ordered

        faces_with_edge(e.u, e.v, shared_faces);
        if (shared_faces.size() != 2) continue;  // boundary or non-manifold interior edge

        // link condition: common neighbors must be exactly the two opposite corners
        {
            std::unordered_set<int> nb_u;
            for (int f : vfaces[e.u]) {
                if (!face_alive[f]) continue;
                for (int c = 0; c < 3; ++c)
                    if (faces[f][c] != e.u) nb_u.insert(faces[f][c]);
            }
            std::unordered_set<int> common;
            for (int f : vfaces[e.v]) {
                if (!face_alive[f]) continue;
                for (int c = 0; c < 3; ++c) {
                    int w = faces[f][c];
                    if (w != e.v && w != e.u && nb_u.count(w)) common.insert(w);
                }
            }
            if (common.size() != 2) continue;
        }

        Eigen::Matrix4d q = quadric[e.u] + quadric[e.v];
        Vec3 new_pos = optimal_position(q, pos[e.u], pos[e.v]);

        // reject collapses that flip or collapse any surviving face
        bool ok = true;
        auto check_star = [&](int v) {
            for (int f : vfaces[v]) {
                if (!face_alive[f] || !ok) continue;
                const Face& t = faces[f];
                bool dies = (t[0] == e.u || t[1] == e.u || t[2] == e.u) &&
                            (t[0] == e.v || t[1] == e.v || t[2] == e.v);
                if (dies) continue;
                Vec3 p[3], pn[3];
                for (int c = 0; c < 3; ++c) {
                    p[c] = pos[t[c]];
                    pn[c] = (t[c] == e.u || t[c] == e.v) ? new_pos : pos[t[c]];
                }
                Vec3 n0 = (p[1] - p[0]).cross(p[2] - p[0]);
                Vec3 n1 = (pn[1] - pn[0]).cross(pn[2] - pn[0]);
                if (n1.norm() == 0.0 || n0.dot(n1) <= 0.0) ok = false;
            }
        };
        check_star(e.u);
        check_star(e.v);
        if (!ok) continue;

        // collapse v into u
        for (int f : vfaces[e.v]) {
            if (!face_alive[f]) continue;
            Face& t = faces[f];
            bool dies = (t[0] == e.u || t[1] == e.u || t[2] == e.u);
            if (dies) {
                face_alive[f] = 0;
                // donate coverage to the surviving neighbor with the lowest id
                int w = -1;
                for (int c = 0; c < 3; ++c)
                    if (t[c] != e.u && t[c] != e.v) w = t[c];
                int donee = -1;
                for (int g : vfaces[w]) {
                    if (!face_alive[g] || g == f) continue;
                    const Face& tg = faces[g];
                    bool touches = tg[0] == e.u || tg[1] == e.u || tg[2] == e.u ||
                                   tg[0] == e.v || tg[1] == e.v || tg[2] == e.v;
                    if (touches && (donee < 0 || g < donee)) donee = g;
                }
                if (donee < 0)
                    for (int g : vfaces[e.u])
                        if (face_alive[g] && g != f && (donee < 0 || g < donee)) donee = g;
                if (donee >= 0) {
                    origin[donee].insert(origin[donee].end(), origin[f].begin(), origin[f].end());
                    origin[f].clear();
                }
            } else {
                for (int c = 0; c < 3; ++c)
                    if (t[c] == e.v) t[c] = e.u;
                vfaces[e.u].push_back(f);
            }
        }
        vert_alive[e.v] = 0;
        pos[e.u] = new_pos;
        quadric[e.u] = q;
        ++version[e.u];
        ++version[e.v];
        ++accepted;

        // refresh costs of edges incident to the surviving vertex
        std::unordered_set<int> nbs;
        for (int f : vfaces[e.u]) {
            if (!face_alive[f]) continue;
            for (int c = 0; c < 3; ++c)
                if (faces[f][c] != e.u) nbs.insert(faces[f][c]);
        }
        std::vector<int> sorted_nbs(nbs.begin(), nbs.end());
        std::sort(sorted_nbs.begin(), sorted_nbs.end());
        for (int w : sorted_nbs) push_edge(e.u, w);
    }

    // compact
    std::vector<int> vmap(nv0, -1);
    for (int f = 0; f < nf0; ++f) {
        if (!face_alive[f]) continue;
        for (int c = 0; c < 3; ++c) vmap[faces[f][c]] = 0;
    }
    int nvi = 0;
    for (int v = 0; v < nv0; ++v)
        if (vmap[v] == 0) vmap[v] = nvi++;
    out.mesh.positions.resize(nvi);
    out.mesh.vertex_global.resize(nvi);
    for (int v = 0; v < nv0; ++v) {
        if (vmap[v] < 0) continue;
        out.mesh.positions[vmap[v]] = pos[v];
        out.mesh.vertex_global[vmap[v]] = chart.vertex_global[v];
    }
    for (int f = 0; f < nf0; ++f) {
        if (!face_alive[f]) continue;
        const Face& t = faces[f];
        out.mesh.faces.push_back(Face(vmap[t[0]], vmap[t[1]], vmap[t[2]]));
        out.mesh.face_global.push_back(chart.face_global[f]);
        out.face_origin.push_back(origin[f]);
    }
    for (int v = 0; v < nv0; ++v)
        if (topo.boundary_vertex[v] && vmap[v] >= 0) out.boundary_vertices.push_back(vmap[v]);
    out.collapses = accepted;
    return out;
}

}  // namespace partatlas
