#include "partatlas/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace partatlas {

double Mesh::bbox_diagonal() const {
    if (positions.empty()) return 0.0;
    Vec3 lo = positions.front(), hi = positions.front();
    for (const Vec3& p : positions) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return (hi - lo).norm();
}

FaceSet::FaceSet(std::vector<int> faces) : faces_(std::move(faces)) {
    std::sort(faces_.begin(), faces_.end());
    faces_.erase(std::unique(faces_.begin(), faces_.end()), faces_.end());
    if (!faces_.empty() && faces_.front() < 0)
        throw std::invalid_argument("FaceSet: negative face index");
}

bool FaceSet::contains(int f) const {
    return std::binary_search(faces_.begin(), faces_.end(), f);
}

FaceSet FaceSet::all(const Mesh& mesh) {
    std::vector<int> ids(mesh.face_count());
    std::iota(ids.begin(), ids.end(), 0);
    return FaceSet(std::move(ids));
}

FaceSet FaceSet::union_of(const FaceSet& a, const FaceSet& b) {
    std::vector<int> out;
    out.reserve(a.size() + b.size());
    std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return FaceSet(std::move(out));
}

FaceAdjacency FaceAdjacency::build(const Mesh& mesh) {
    FaceAdjacency adj;
    adj.edge_index.reserve(mesh.faces.size() * 2);
    for (int f = 0; f < mesh.face_count(); ++f) {
        const Face& tri = mesh.faces[f];
        for (int c = 0; c < 3; ++c) {
            int a = tri[c], b = tri[(c + 1) % 3];
            std::uint64_t key = edge_key(a, b);
            auto it = adj.edge_index.find(key);
            if (it == adj.edge_index.end()) {
                adj.edge_index.emplace(key, static_cast<int>(adj.edges.size()));
                adj.edges.push_back({std::min(a, b), std::max(a, b), {f}});
            } else {
                adj.edges[it->second].faces.push_back(f);
            }
        }
    }
    adj.face_neighbors.assign(mesh.faces.size(), {});
    for (const EdgeRec& e : adj.edges) {
        for (int i = 0; i < static_cast<int>(e.faces.size()); ++i)
            for (int j = i + 1; j < static_cast<int>(e.faces.size()); ++j) {
                adj.face_neighbors[e.faces[i]].push_back(e.faces[j]);
                adj.face_neighbors[e.faces[j]].push_back(e.faces[i]);
            }
    }
    for (auto& nb : adj.face_neighbors) {
        std::sort(nb.begin(), nb.end());
        nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    }
    return adj;
}

int FaceAdjacency::find_edge(int a, int b) const {
    auto it = edge_index.find(edge_key(a, b));
    return it == edge_index.end() ? -1 : it->second;
}

int FaceAdjacency::max_edge_valence() const {
    int m = 0;
    for (const EdgeRec& e : edges) m = std::max(m, static_cast<int>(e.faces.size()));
    return m;
}

FaceGeometry face_geometry(const Mesh& mesh) {
    FaceGeometry g;
    const int nf = mesh.face_count();
    g.normal.resize(nf);
    g.area.resize(nf);
    g.degenerate.assign(nf, 0);
    const double diag2 = mesh.bbox_diagonal() * mesh.bbox_diagonal();
    const double eps = kDegenerateAreaFactor * diag2;
    for (int f = 0; f < nf; ++f) {
        const Face& tri = mesh.faces[f];
        Vec3 e1 = mesh.positions[tri[1]] - mesh.positions[tri[0]];
        Vec3 e2 = mesh.positions[tri[2]] - mesh.positions[tri[0]];
        Vec3 cr = e1.cross(e2);
        double a = 0.5 * cr.norm();
        g.area[f] = a;
        g.total_area += a;
        if (a <= eps || a == 0.0) {
            g.normal[f] = Vec3::Zero();
            g.degenerate[f] = 1;
        } else {
            g.normal[f] = cr / (2.0 * a);
        }
    }
    return g;
}

namespace {

const char* skip_ws(const char* p) {
    while (*p == ' ' || *p == '\t' || *p == '\r') ++p;
    return p;
}

}  // namespace

Mesh load_obj(const std::string& path, LoadReport* report) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open OBJ file: " + path);

    Mesh mesh;
    LoadReport rep;
    std::string line;
    int lineno = 0;
    std::vector<int> poly;

    while (std::getline(in, line)) {
        ++lineno;
        const char* p = skip_ws(line.c_str());
        if (p[0] == 'v' && (p[1] == ' ' || p[1] == '\t')) {
            char* end = nullptr;
            Vec3 v;
            p += 1;
            for (int i = 0; i < 3; ++i) {
                v[i] = std::strtod(p, &end);
                if (end == p)
                    throw ParseError("bad vertex at line " + std::to_string(lineno));
                p = end;
            }
            mesh.positions.push_back(v);
        } else if (p[0] == 'f' && (p[1] == ' ' || p[1] == '\t')) {
            poly.clear();
            p += 1;
            while (true) {
                p = skip_ws(p);
                if (*p == '\0' || *p == '#') break;
                char* end = nullptr;
                long idx = std::strtol(p, &end, 10);
                if (end == p)
                    throw ParseError("bad face record at line " + std::to_string(lineno));
                p = end;
                // skip /vt and /vn parts; only the vertex index is used
                while (*p && *p != ' ' && *p != '\t' && *p != '\r') ++p;
                if (idx < 0) idx = static_cast<long>(mesh.positions.size()) + idx + 1;
                if (idx < 1 || idx > static_cast<long>(mesh.positions.size()))
                    throw ParseError("face index out of range at line " + std::to_string(lineno));
                poly.push_back(static_cast<int>(idx - 1));
            }
            if (poly.size() < 3)
                throw ParseError("face with fewer than 3 vertices at line " + std::to_string(lineno));
            for (size_t i = 1; i + 1 < poly.size(); ++i) {
                int a = poly[0], b = poly[i], c = poly[i + 1];
                if (a == b || b == c || a == c) {
                    ++rep.dropped_repeated_index;
                    continue;
                }
                mesh.faces.push_back(Face(a, b, c));
            }
        }
        // all other records are ignored
    }

    if (mesh.faces.empty()) throw ParseError("OBJ file has no faces: " + path);

    const double diag2 = mesh.bbox_diagonal() * mesh.bbox_diagonal();
    const double eps = kDegenerateAreaFactor * diag2;
    for (int f = 0; f < mesh.face_count(); ++f) {
        const Face& tri = mesh.faces[f];
        Vec3 e1 = mesh.positions[tri[1]] - mesh.positions[tri[0]];
        Vec3 e2 = mesh.positions[tri[2]] - mesh.positions[tri[0]];
        double a = 0.5 * e1.cross(e2).norm();
        if (a <= eps) rep.zero_area_faces.push_back(f);
    }
    rep.vertex_count = mesh.vertex_count();
    rep.face_count = mesh.face_count();
    if (report) *report = rep;
    return mesh;
}

Mesh repair_non_manifold(const Mesh& mesh, RepairReport* report) {
    Mesh out = mesh;
    RepairReport rep;

    // Edge rule: for each edge with N > 2 incident faces, the two lowest
    // faces keep the original edge; every other face gets duplicated
    // endpoints, yielding N-1 distinct edges.
    for (int pass = 0; pass < 8; ++pass) {
        FaceAdjacency adj = FaceAdjacency::build(out);
        bool any = false;
        for (const FaceAdjacency::EdgeRec& e : adj.edges) {
            if (e.faces.size() <= 2) continue;
            std::vector<int> live;
            for (int f : e.faces) {
                const Face& tri = out.faces[f];
                bool hasA = tri[0] == e.v0 || tri[1] == e.v0 || tri[2] == e.v0;
                bool hasB = tri[0] == e.v1 || tri[1] == e.v1 || tri[2] == e.v1;
                if (hasA && hasB) live.push_back(f);
            }
            if (live.size() <= 2) continue;
            any = true;
            ++rep.split_edges;
            for (size_t i = 2; i < live.size(); ++i) {
                int f = live[i];
                int a2 = out.vertex_count();
                out.positions.push_back(out.positions[e.v0]);
                int b2 = out.vertex_count();
                out.positions.push_back(out.positions[e.v1]);
                rep.duplicated_vertices += 2;
                Face& tri = out.faces[f];
                for (int c = 0; c < 3; ++c) {
                    if (tri[c] == e.v0) tri[c] = a2;
                    if (tri[c] == e.v1) tri[c] = b2;
                }
            }
        }
        if (!any) break;
    }

    // Bowtie rule: a vertex whose incident faces split into more than one
    // edge-connected wedge is duplicated per wedge; the wedge containing the
    // lowest face index keeps the original vertex.
    {
        std::vector<std::vector<int>> vertex_faces(out.vertex_count());
        for (int f = 0; f < out.face_count(); ++f)
            for (int c = 0; c < 3; ++c) vertex_faces[out.faces[f][c]].push_back(f);
        FaceAdjacency adj = FaceAdjacency::build(out);

        const int nv = out.vertex_count();  // added vertices cannot be bowties
        for (int v = 0; v < nv; ++v) {
            const std::vector<int>& inc = vertex_faces[v];
            if (inc.size() < 2) continue;
            // union faces sharing an edge through v
            std::unordered_map<int, int> local;
            local.reserve(inc.size());
            for (int i = 0; i < static_cast<int>(inc.size()); ++i) local[inc[i]] = i;
            std::vector<int> parent(inc.size());
            std::iota(parent.begin(), parent.end(), 0);
            auto find = [&](int x) {
                while (parent[x] != x) x = parent[x] = parent[parent[x]];
                return x;
            };
            for (int i = 0; i < static_cast<int>(inc.size()); ++i) {
                const Face& tri = out.faces[inc[i]];
                for (int c = 0; c < 3; ++c) {
                    int w = tri[c];
                    if (w == v) continue;
                    int ei = adj.find_edge(v, w);
                    if (ei < 0) continue;
                    for (int g : adj.edges[ei].faces) {
                        auto it = local.find(g);
                        if (it != local.end()) {
                            int ra = find(i), rb = find(it->second);
                            if (ra != rb) parent[ra] = rb;
                        }
                    }
                }
            }
            std::unordered_map<int, std::vector<int>> wedges;  // root -> faces
            for (int i = 0; i < static_cast<int>(inc.size()); ++i)
                wedges[find(i)].push_back(inc[i]);
            if (wedges.size() <= 1) continue;

            ++rep.bowtie_vertices;
            std::vector<std::vector<int>> groups;
            for (auto& [root, fs] : wedges) groups.push_back(std::move(fs));
            std::sort(groups.begin(), groups.end(),
                      [](const auto& a, const auto& b) {
                          return *std::min_element(a.begin(), a.end()) <
                                 *std::min_element(b.begin(), b.end());
                      });
            for (size_t g = 1; g < groups.size(); ++g) {
                int v2 = out.vertex_count();
                out.positions.push_back(out.positions[v]);
                ++rep.duplicated_vertices;
                for (int f : groups[g]) {
                    Face& tri = out.faces[f];
                    for (int c = 0; c < 3; ++c)
                        if (tri[c] == v) tri[c] = v2;
                }
            }
        }
    }

    if (report) *report = rep;
    return out;
}

std::vector<FaceSet> connected_components(const Mesh& mesh, const FaceAdjacency& adj,
                                          const FaceSet& faces) {
    std::vector<char> member(mesh.face_count(), 0);
    for (int f : faces) member[f] = 1;
    std::vector<char> seen(mesh.face_count(), 0);
    std::vector<FaceSet> out;
    std::vector<int> stack, comp;
    for (int seed : faces) {
        if (seen[seed]) continue;
        comp.clear();
        stack.push_back(seed);
        seen[seed] = 1;
        while (!stack.empty()) {
            int f = stack.back();
            stack.pop_back();
            comp.push_back(f);
            for (int g : adj.face_neighbors[f]) {
                if (member[g] && !seen[g]) {
                    seen[g] = 1;
                    stack.push_back(g);
                }
            }
        }
        out.emplace_back(std::move(comp));
        comp = {};
    }
    return out;
}

DiskCheck is_disk(const Mesh& mesh, const FaceSet& faces) {
    DiskCheck res;
    if (faces.empty()) {
        res.reason = DiskReason::empty;
        return res;
    }
    struct LocalEdge {
        int v0, v1;
        int count = 0;
    };
    std::unordered_map<std::uint64_t, LocalEdge> edges;
    edges.reserve(faces.size() * 2);
    std::unordered_map<int, int> vdeg;  // vertex -> incident boundary edges (filled later)
    std::unordered_map<int, char> verts;
    for (int f : faces) {
        const Face& tri = mesh.faces[f];
        for (int c = 0; c < 3; ++c) {
            verts[tri[c]] = 1;
            int a = tri[c], b = tri[(c + 1) % 3];
            auto& e = edges[FaceAdjacency::edge_key(a, b)];
            e.v0 = std::min(a, b);
            e.v1 = std::max(a, b);
            ++e.count;
        }
    }
    for (auto& [k, e] : edges) {
        if (e.count > 2) {
            res.reason = DiskReason::non_manifold_edge;
            return res;
        }
    }
    const long V = static_cast<long>(verts.size());
    const long E = static_cast<long>(edges.size());
    const long F = faces.size();
    std::unordered_map<int, std::vector<int>> boundary_next;  // vertex -> boundary neighbors
    int boundary_edges = 0;
    for (auto& [k, e] : edges) {
        if (e.count == 1) {
            ++boundary_edges;
            boundary_next[e.v0].push_back(e.v1);
            boundary_next[e.v1].push_back(e.v0);
            ++vdeg[e.v0];
            ++vdeg[e.v1];
        }
    }
    if (boundary_edges == 0) {
        res.reason = DiskReason::closed_surface;
        return res;
    }
    for (auto& [v, d] : vdeg) {
        if (d != 2) {
            res.reason = DiskReason::pinched_boundary;
            return res;
        }
    }
    // count boundary loops by walking
    std::unordered_map<int, char> visited;
    int loops = 0;
    for (auto& [v, nbs] : boundary_next) {
        if (visited.count(v)) continue;
        ++loops;
        int prev = -1, cur = v;
        while (!visited.count(cur)) {
            visited[cur] = 1;
            const std::vector<int>& nb = boundary_next[cur];
            int next = (nb[0] != prev) ? nb[0] : nb[1];
            prev = cur;
            cur = next;
        }
    }
    res.boundary_loops = loops;
    if (loops != 1) {
        res.reason = DiskReason::multiple_boundary_loops;
        return res;
    }
    if (V - E + F != 1) {
        res.reason = DiskReason::wrong_euler;
        return res;
    }
    res.disk = true;
    res.reason = DiskReason::disk;
    return res;
}

ChartMesh extract_chart(const Mesh& mesh, const FaceSet& faces) {
    ChartMesh cm;
    cm.face_global.assign(faces.begin(), faces.end());
    std::vector<int> used;
    used.reserve(faces.size() * 3);
    for (int f : faces) {
        const Face& tri = mesh.faces[f];
        used.push_back(tri[0]);
        used.push_back(tri[1]);
        used.push_back(tri[2]);
    }
    std::sort(used.begin(), used.end());
    used.erase(std::unique(used.begin(), used.end()), used.end());
    cm.vertex_global = used;
    cm.positions.reserve(used.size());
    std::unordered_map<int, int> to_local;
    to_local.reserve(used.size());
    for (int i = 0; i < static_cast<int>(used.size()); ++i) {
        to_local[used[i]] = i;
        cm.positions.push_back(mesh.positions[used[i]]);
    }
    cm.faces.reserve(faces.size());
    for (int f : faces) {
        const Face& tri = mesh.faces[f];
        cm.faces.push_back(Face(to_local[tri[0]], to_local[tri[1]], to_local[tri[2]]));
    }
    return cm;
}

ChartTopology build_topology(const ChartMesh& chart) {
    ChartTopology topo;
    std::unordered_map<std::uint64_t, int> index;
    index.reserve(chart.faces.size() * 2);
    for (int f = 0; f < chart.face_count(); ++f) {
        const Face& tri = chart.faces[f];
        for (int c = 0; c < 3; ++c) {
            int a = tri[c], b = tri[(c + 1) % 3];
            std::uint64_t key = FaceAdjacency::edge_key(a, b);
            auto it = index.find(key);
            if (it == index.end()) {
                index.emplace(key, static_cast<int>(topo.edges.size()));
                topo.edges.push_back({std::min(a, b), std::max(a, b), f, -1});
            } else {
                ChartTopology::Edge& e = topo.edges[it->second];
                if (e.f1 != -1) topo.manifold = false;
                e.f1 = f;
            }
        }
    }
    topo.boundary_vertex.assign(chart.vertex_count(), 0);
    for (const ChartTopology::Edge& e : topo.edges) {
        if (e.f1 == -1) {
            ++topo.boundary_edge_count;
            topo.boundary_vertex[e.v0] = 1;
            topo.boundary_vertex[e.v1] = 1;
        }
    }
    return topo;
}

std::vector<int> ChartTopology::boundary_vertices() const {
    std::vector<int> out;
    for (int v = 0; v < static_cast<int>(boundary_vertex.size()); ++v)
        if (boundary_vertex[v]) out.push_back(v);
    return out;
}

void save_obj(const Mesh& mesh, const std::vector<ChartUVs>& charts, int n_atlases,
              const std::string& path) {
    std::vector<char> covered(mesh.face_count(), 0);
    for (const ChartUVs& ch : charts) {
        if (ch.atlas < 0 || ch.atlas >= std::max(1, n_atlases))
            throw std::invalid_argument("save_obj: chart not placed in an atlas");
        if (ch.faces.size() != ch.corner_uv.size())
            throw std::invalid_argument("save_obj: face missing UVs");
        for (int f : ch.faces) {
            if (f < 0 || f >= mesh.face_count() || covered[f])
                throw std::invalid_argument("save_obj: faces do not partition the mesh");
            covered[f] = 1;
        }
    }
    for (char c : covered)
        if (!c) throw std::invalid_argument("save_obj: faces do not partition the mesh");

    auto write_file = [&](const std::string& file, int only_atlas) {
        std::ofstream out(file);
        if (!out) throw std::runtime_error("cannot write OBJ file: " + file);
        char buf[256];
        for (const Vec3& p : mesh.positions) {
            std::snprintf(buf, sizeof(buf), "v %.9g %.9g %.9g\n", p.x(), p.y(), p.z());
            out << buf;
        }
        int vt_base = 1;
        for (size_t k = 0; k < charts.size(); ++k) {
            const ChartUVs& ch = charts[k];
            if (only_atlas >= 0 && ch.atlas != only_atlas) continue;
            // one vt per (chart, vertex)
            std::unordered_map<int, int> vt_of;  // global vertex -> vt index
            out << "usemtl chart_" << k << "\n";
            std::vector<std::array<int, 3>> face_vt(ch.faces.size());
            for (size_t i = 0; i < ch.faces.size(); ++i) {
                const Face& tri = mesh.faces[ch.faces[i]];
                for (int c = 0; c < 3; ++c) {
                    auto [it, inserted] = vt_of.emplace(tri[c], vt_base + static_cast<int>(vt_of.size()));
                    if (inserted) {
                        const Vec2& uv = ch.corner_uv[i][c];
                        std::snprintf(buf, sizeof(buf), "vt %.9g %.9g\n", uv.x(), uv.y());
                        out << buf;
                    }
                    face_vt[i][c] = it->second;
                }
            }
            for (size_t i = 0; i < ch.faces.size(); ++i) {
                const Face& tri = mesh.faces[ch.faces[i]];
                out << "f " << tri[0] + 1 << '/' << face_vt[i][0] << ' ' << tri[1] + 1 << '/'
                    << face_vt[i][1] << ' ' << tri[2] + 1 << '/' << face_vt[i][2] << "\n";
            }
            vt_base += static_cast<int>(vt_of.size());
        }
    };

    write_file(path, -1);
    if (n_atlases > 1) {
        std::string stem = path;
        if (stem.size() > 4 && stem.substr(stem.size() - 4) == ".obj")
            stem = stem.substr(0, stem.size() - 4);
        for (int a = 0; a < n_atlases; ++a)
            write_file(stem + "_atlas" + std::to_string(a) + ".obj", a);
    }
}

}  // namespace partatlas
