#include "partatlas/part_tree.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <queue>
#include <sstream>

namespace partatlas {

FaceFeatureField features_from_normals(const Mesh& mesh, const FaceAdjacency& adj,
                                       const FaceGeometry& geom, int samples_per_face) {
    (void)samples_per_face;
    const int nf = mesh.face_count();
    FaceFeatureField field;
    field.source = FaceFeatureField::Source::normals;
    field.features.resize(nf, 3);
    std::vector<char> resolved(nf, 0);
    int unresolved = 0;
    for (int f = 0; f < nf; ++f) {
        if (geom.degenerate[f]) {
            field.features.row(f).setZero();
            ++unresolved;
        } else {
            field.features.row(f) = geom.normal[f];
            resolved[f] = 1;
        }
    }
    while (unresolved > 0) {
        bool progress = false;
        for (int f = 0; f < nf; ++f) {
            if (resolved[f]) continue;
            const std::vector<int>& nb = adj.face_neighbors[f];
            if (!nb.empty() && resolved[nb.front()]) {
                field.features.row(f) = field.features.row(nb.front());
                resolved[f] = 1;
                --unresolved;
                progress = true;
            }
        }
        if (!progress) break;
    }
    for (int f = 0; f < nf; ++f) {
        if (!resolved[f]) field.features.row(f) = Eigen::RowVector3d(1, 0, 0);
    }
    return field;
}

namespace {

void normalize_rows(Eigen::MatrixXd& m, const char* what) {
    for (int i = 0; i < m.rows(); ++i) {
        double n = m.row(i).norm();
        if (!std::isfinite(n) || n == 0.0)
            throw ParseError(std::string(what) + ": non-normalizable feature at record " +
                             std::to_string(i));
        m.row(i) /= n;
    }
}

}  // namespace

FaceFeatureField load_features(const std::string& path, const Mesh& mesh) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open feature file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in) throw ParseError("feature file too short: " + path);

    FaceFeatureField field;
    field.source = FaceFeatureField::Source::external_file;

    if (std::memcmp(magic, "PFF1", 4) == 0) {
        std::uint32_t count = 0, dim = 0;
        in.read(reinterpret_cast<char*>(&count), 4);
        in.read(reinterpret_cast<char*>(&dim), 4);
        if (!in) throw ParseError("feature file header truncated: " + path);
        if (count != static_cast<std::uint32_t>(mesh.face_count()))
            throw ParseError("feature count mismatch: file has " + std::to_string(count) +
                             " records, mesh has " + std::to_string(mesh.face_count()) + " faces");
        if (dim == 0) throw ParseError("feature file has dim 0");
        std::vector<float> buf(static_cast<size_t>(count) * dim);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
        if (!in) throw ParseError("feature file data truncated: " + path);
        field.features.resize(count, dim);
        for (std::uint32_t i = 0; i < count; ++i)
            for (std::uint32_t j = 0; j < dim; ++j) {
                float v = buf[static_cast<size_t>(i) * dim + j];
                if (!std::isfinite(v))
                    throw ParseError("non-finite feature value at record " + std::to_string(i));
                field.features(i, j) = v;
            }
    } else if (std::memcmp(magic, "PFT1", 4) == 0) {
        std::vector<std::vector<double>> rows;
        std::string line;
        std::getline(in, line);  // rest of the magic line
        while (std::getline(in, line)) {
            std::istringstream ls(line);
            std::vector<double> row;
            double v;
            while (ls >> v) row.push_back(v);
            if (row.empty()) continue;
            rows.push_back(std::move(row));
        }
        if (rows.size() != static_cast<size_t>(mesh.face_count()))
            throw ParseError("feature count mismatch: file has " + std::to_string(rows.size()) +
                             " records, mesh has " + std::to_string(mesh.face_count()) + " faces");
        const size_t dim = rows.front().size();
        if (dim == 0) throw ParseError("feature file has dim 0");
        field.features.resize(static_cast<int>(rows.size()), static_cast<int>(dim));
        for (size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != dim)
                throw ParseError("inconsistent feature dim at record " + std::to_string(i));
            for (size_t j = 0; j < dim; ++j) {
                if (!std::isfinite(rows[i][j]))
                    throw ParseError("non-finite feature value at record " + std::to_string(i));
                field.features(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
            }
        }
    } else {
        throw ParseError("unknown feature file magic (expected PFF1 or PFT1): " + path);
    }
    normalize_rows(field.features, "feature file");
    return field;
}

namespace {

struct Cluster {
    Eigen::VectorXd sum;
    int size = 0;
    int min_item = 0;
    bool alive = true;
    std::vector<int> neighbors;  // cluster ids, possibly stale
};

struct PairEntry {
    double dist;
    int key0, key1;  // sorted min items of the two clusters
    int ca, cb;
};

struct PairCmp {
    bool operator()(const PairEntry& a, const PairEntry& b) const {
        if (a.dist != b.dist) return a.dist > b.dist;
        if (a.key0 != b.key0) return a.key0 > b.key0;
        return a.key1 > b.key1;
    }
};

double cluster_dist(const Cluster& a, const Cluster& b) {
    return 1.0 - a.sum.dot(b.sum) / (static_cast<double>(a.size) * static_cast<double>(b.size));
}

PairEntry make_entry(const std::vector<Cluster>& cl, int a, int b) {
    int k0 = cl[a].min_item, k1 = cl[b].min_item;
    if (k0 > k1) std::swap(k0, k1);
    return PairEntry{cluster_dist(cl[a], cl[b]), k0, k1, a, b};
}

}  // namespace

std::vector<MergeStep> agglomerate(const Eigen::MatrixXd& unit_features,
                                   const std::vector<std::vector<int>>& neighbors) {
    const int n = static_cast<int>(unit_features.rows());
    std::vector<MergeStep> steps;
    if (n <= 1) return steps;
    steps.reserve(n - 1);

    std::vector<Cluster> cl;
    cl.reserve(2 * n - 1);
    for (int i = 0; i < n; ++i) {
        Cluster c;
        c.sum = unit_features.row(i).transpose();
        c.size = 1;
        c.min_item = i;
        c.neighbors = neighbors[i];
        cl.push_back(std::move(c));
    }

    std::priority_queue<PairEntry, std::vector<PairEntry>, PairCmp> heap;
    for (int i = 0; i < n; ++i)
        for (int j : neighbors[i])
            if (j > i) heap.push(make_entry(cl, i, j));

    int alive = n;
    bool fallback = false;
    auto do_merge = [&](const PairEntry& e) {
        int m = static_cast<int>(cl.size());
        Cluster nc;
        nc.sum = cl[e.ca].sum + cl[e.cb].sum;
        nc.size = cl[e.ca].size + cl[e.cb].size;
        nc.min_item = std::min(cl[e.ca].min_item, cl[e.cb].min_item);
        if (!fallback) {
            std::vector<int> nb;
            nb.reserve(cl[e.ca].neighbors.size() + cl[e.cb].neighbors.size());
            for (int x : cl[e.ca].neighbors)
                if (x != e.cb && cl[x].alive) nb.push_back(x);
            for (int x : cl[e.cb].neighbors)
                if (x != e.ca && cl[x].alive) nb.push_back(x);
            std::sort(nb.begin(), nb.end());
            nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
            for (int x : nb) cl[x].neighbors.push_back(m);  // keep adjacency symmetric
            nc.neighbors = std::move(nb);
        }
        cl[e.ca].alive = cl[e.cb].alive = false;
        int a = e.ca, b = e.cb;
        if (cl[a].min_item > cl[b].min_item) std::swap(a, b);
        steps.push_back({a, b, e.dist});
        cl.push_back(std::move(nc));
        --alive;
        if (!fallback) {
            for (int x : cl[m].neighbors) heap.push(make_entry(cl, m, x));
        } else {
            for (int x = 0; x < m; ++x)
                if (cl[x].alive) heap.push(make_entry(cl, x, m));
        }
    };

    while (alive > 1) {
        if (heap.empty()) {
            if (fallback) break;  // unreachable: fallback pairs all clusters
            fallback = true;      // disconnected input: drop the adjacency constraint
            std::vector<int> ids;
            for (int i = 0; i < static_cast<int>(cl.size()); ++i)
                if (cl[i].alive) ids.push_back(i);
            for (size_t i = 0; i < ids.size(); ++i)
                for (size_t j = i + 1; j < ids.size(); ++j)
                    heap.push(make_entry(cl, ids[i], ids[j]));
            continue;
        }
        PairEntry e = heap.top();
        heap.pop();
        if (!cl[e.ca].alive || !cl[e.cb].alive) continue;
        do_merge(e);
    }
    return steps;
}

std::vector<std::vector<int>> clusters_at(int n, const std::vector<MergeStep>& steps, int k) {
    if (k < 1 || k > n) throw std::invalid_argument("clusters_at: k out of range");
    std::vector<int> parent(n + steps.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    const int to_apply = n - k;
    for (int i = 0; i < to_apply; ++i) {
        int m = n + i;
        parent[find(steps[i].a)] = m;
        parent[find(steps[i].b)] = m;
    }
    std::unordered_map<int, std::vector<int>> groups;
    for (int i = 0; i < n; ++i) groups[find(i)].push_back(i);
    std::vector<std::vector<int>> out;
    out.reserve(groups.size());
    for (auto& [root, members] : groups) out.push_back(std::move(members));
    for (auto& g : out) std::sort(g.begin(), g.end());
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    return out;
}

PartTree build_tree(const Mesh& mesh, const FaceAdjacency& adj, const FaceFeatureField& field) {
    const int nf = mesh.face_count();
    if (nf == 0) throw std::invalid_argument("build_tree: empty mesh");
    if (field.count() != nf) throw std::invalid_argument("build_tree: feature count mismatch");

    PartTree tree;
    tree.nodes.resize(nf);
    for (int f = 0; f < nf; ++f) tree.nodes[f].face = f;
    if (nf == 1) {
        tree.root = 0;
        return tree;
    }
    std::vector<MergeStep> steps = agglomerate(field.features, adj.face_neighbors);
    tree.nodes.reserve(2 * nf - 1);
    for (const MergeStep& s : steps) {
        PartTree::Node node;
        node.left = s.a;   // smaller min face
        node.right = s.b;
        node.face = -1;
        node.count = tree.nodes[s.a].count + tree.nodes[s.b].count;
        node.merge_height = s.dist;
        tree.nodes.push_back(node);
    }
    tree.root = static_cast<int>(tree.nodes.size()) - 1;
    return tree;
}

std::vector<int> PartTree::collect_faces(int n) const {
    std::vector<int> out;
    out.reserve(nodes[n].count);
    std::vector<int> stack{n};
    while (!stack.empty()) {
        int cur = stack.back();
        stack.pop_back();
        if (is_leaf(cur)) {
            out.push_back(nodes[cur].face);
        } else {
            stack.push_back(nodes[cur].left);
            stack.push_back(nodes[cur].right);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

PartTree PartTree::restrict_to(int node, const FaceSet& faces) const {
    PartTree out;
    if (faces.empty()) return out;
    // iterative post-order: map old node -> new node id or -1
    struct Frame {
        int node;
        bool expanded;
    };
    std::unordered_map<int, int> mapped;
    std::vector<Frame> stack{{node, false}};
    while (!stack.empty()) {
        Frame& fr = stack.back();
        if (is_leaf(fr.node)) {
            int nn = -1;
            if (faces.contains(nodes[fr.node].face)) {
                nn = static_cast<int>(out.nodes.size());
                PartTree::Node leaf;
                leaf.face = nodes[fr.node].face;
                out.nodes.push_back(leaf);
            }
            mapped[fr.node] = nn;
            stack.pop_back();
            continue;
        }
        if (!fr.expanded) {
            fr.expanded = true;
            const int cur = fr.node;  // pushes may reallocate the stack
            stack.push_back({nodes[cur].left, false});
            stack.push_back({nodes[cur].right, false});
            continue;
        }
        const int cur = fr.node;
        int l = mapped[nodes[cur].left];
        int r = mapped[nodes[cur].right];
        int nn = -1;
        if (l >= 0 && r >= 0) {
            nn = static_cast<int>(out.nodes.size());
            PartTree::Node inner;
            inner.left = l;
            inner.right = r;
            inner.face = -1;
            inner.count = out.nodes[l].count + out.nodes[r].count;
            inner.merge_height = nodes[cur].merge_height;
            out.nodes.push_back(inner);
        } else if (l >= 0) {
            nn = l;
        } else if (r >= 0) {
            nn = r;
        }
        mapped[cur] = nn;
        stack.pop_back();
    }
    out.root = mapped[node];
    if (out.root < 0) out.nodes.clear();
    return out;
}

}  // namespace partatlas
