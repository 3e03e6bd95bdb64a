#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <functional>
#include <map>
#include <numeric>

namespace partatlas::oracles {

std::vector<std::vector<int>> components_union_find(const Mesh& mesh,
                                                    const std::vector<int>& faces) {
    std::map<int, int> local;
    for (size_t i = 0; i < faces.size(); ++i) local[faces[i]] = static_cast<int>(i);
    std::vector<int> parent(faces.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) {
        return parent[x] == x ? x : parent[x] = find(parent[x]);
    };
    std::map<std::pair<int, int>, std::vector<int>> edge_faces;
    for (size_t i = 0; i < faces.size(); ++i) {
        const Face& t = mesh.faces[faces[i]];
        for (int c = 0; c < 3; ++c) {
            int a = t[c], b = t[(c + 1) % 3];
            edge_faces[{std::min(a, b), std::max(a, b)}].push_back(static_cast<int>(i));
        }
    }
    for (auto& [edge, fs] : edge_faces)
        for (size_t i = 1; i < fs.size(); ++i) parent[find(fs[0])] = find(fs[i]);
    std::map<int, std::vector<int>> groups;
    for (size_t i = 0; i < faces.size(); ++i) groups[find(static_cast<int>(i))].push_back(faces[i]);
    std::vector<std::vector<int>> out;
    for (auto& [root, members] : groups) {
        std::sort(members.begin(), members.end());
        out.push_back(members);
    }
    std::sort(out.begin(), out.end());
    return out;
}

BruteChartDistortion brute_chart_distortion(const ChartMesh& cm, const Eigen::MatrixX2d& uv,
                                            double degenerate_eps, double clip) {
    const int nf = cm.face_count();
    BruteChartDistortion out;
    out.stretch.assign(nf, std::numeric_limits<double>::quiet_NaN());
    out.term.assign(nf, std::numeric_limits<double>::quiet_NaN());

    // pass 1: mean of per-face area ratios over included faces
    double sum_ratio = 0.0;
    int included = 0;
    std::vector<double> a3(nf), s2(nf);
    for (int f = 0; f < nf; ++f) {
        const Face& t = cm.faces[f];
        a3[f] = 0.5 * (cm.positions[t[1]] - cm.positions[t[0]])
                          .cross(cm.positions[t[2]] - cm.positions[t[0]])
                          .norm();
        Vec2 pa = uv.row(t[0]), pb = uv.row(t[1]), pc = uv.row(t[2]);
        s2[f] = 0.5 * ((pb.x() - pa.x()) * (pc.y() - pa.y()) -
                       (pc.x() - pa.x()) * (pb.y() - pa.y()));
        if (a3[f] > degenerate_eps) {
            sum_ratio += std::abs(s2[f]) / a3[f];
            ++included;
        }
    }
    if (included == 0) {
        out.chart_value = 1.0;
        return out;
    }
    double mean_ratio = sum_ratio / included;

    // pass 2: clipped symmetric terms
    double sum_terms = 0.0;
    for (int f = 0; f < nf; ++f) {
        if (!(a3[f] > degenerate_eps)) continue;
        double term;
        if (s2[f] < 0.0) {
            term = clip;
        } else {
            double stretch = (std::abs(s2[f]) / a3[f]) / mean_ratio;
            out.stretch[f] = stretch;
            term = stretch > 0.0 ? std::min(std::max(stretch, 1.0 / stretch), clip) : clip;
        }
        out.term[f] = term;
        sum_terms += term;
    }
    out.chart_value = sum_terms / included;
    return out;
}

namespace {

double polygon_area(const std::vector<Vec2>& poly) {
    double a = 0.0;
    for (size_t i = 0; i < poly.size(); ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % poly.size()];
        a += p.x() * q.y() - q.x() * p.y();
    }
    return 0.5 * a;
}

// clip `poly` against the half-plane left of (a,b)
std::vector<Vec2> clip_halfplane(const std::vector<Vec2>& poly, const Vec2& a, const Vec2& b) {
    std::vector<Vec2> out;
    auto side = [&](const Vec2& p) {
        return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
    };
    for (size_t i = 0; i < poly.size(); ++i) {
        const Vec2& cur = poly[i];
        const Vec2& nxt = poly[(i + 1) % poly.size()];
        double sc = side(cur), sn = side(nxt);
        if (sc >= 0) out.push_back(cur);
        if ((sc > 0 && sn < 0) || (sc < 0 && sn > 0)) {
            double t = sc / (sc - sn);
            out.push_back(cur + t * (nxt - cur));
        }
    }
    return out;
}

}  // namespace

double tri_intersection_area(const Vec2 a[3], const Vec2 b[3]) {
    std::vector<Vec2> clipper = {a[0], a[1], a[2]};
    if (polygon_area(clipper) < 0) std::swap(clipper[1], clipper[2]);
    std::vector<Vec2> poly = {b[0], b[1], b[2]};
    if (polygon_area(poly) < 0) std::swap(poly[1], poly[2]);
    for (int i = 0; i < 3 && !poly.empty(); ++i)
        poly = clip_halfplane(poly, clipper[i], clipper[(i + 1) % 3]);
    if (poly.size() < 3) return 0.0;
    return std::abs(polygon_area(poly));
}

bool brute_any_overlap(const ChartMesh& cm, const Eigen::MatrixX2d& uv) {
    const int nf = cm.face_count();
    for (int f = 0; f < nf; ++f) {
        for (int g = f + 1; g < nf; ++g) {
            const Face& ta = cm.faces[f];
            const Face& tb = cm.faces[g];
            Vec2 a[3], b[3];
            double amin = 1e300;
            for (int c = 0; c < 3; ++c) {
                a[c] = uv.row(ta[c]);
                b[c] = uv.row(tb[c]);
            }
            double area_a = tri_intersection_area(a, a);
            double area_b = tri_intersection_area(b, b);
            amin = std::min(area_a, area_b);
            if (amin <= 0.0) continue;
            double inter = tri_intersection_area(a, b);
            int shared = 0;
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    if (ta[i] == tb[j]) ++shared;
            // shared simplices account for zero-measure contact only
            if (inter > 1e-9 * amin && shared < 3) return true;
            if (shared == 3 && inter > 0) return true;
        }
    }
    return false;
}

}  // namespace partatlas::oracles
