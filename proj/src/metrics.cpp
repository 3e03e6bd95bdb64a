#include "partatlas/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace partatlas {

namespace {

double area3d(const ChartMesh& cm, int f) {
    const Face& t = cm.faces[f];
    return 0.5 * (cm.positions[t[1]] - cm.positions[t[0]])
                     .cross(cm.positions[t[2]] - cm.positions[t[0]])
                     .norm();
}

double signed_area2d(const ChartMesh& cm, const Eigen::MatrixX2d& uv, int f) {
    const Face& t = cm.faces[f];
    Vec2 a = uv.row(t[0]), b = uv.row(t[1]), c = uv.row(t[2]);
    return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

}  // namespace

DistortionTerms distortion_terms(const ChartMesh& cm, const Eigen::MatrixX2d& uv,
                                 double degenerate_eps) {
    DistortionTerms out;
    const int nf = cm.face_count();
    out.term.assign(nf, std::numeric_limits<double>::quiet_NaN());

    std::vector<double> ratio(nf, 0.0);
    std::vector<double> sa(nf, 0.0);
    double mean_ratio = 0.0;
    int included = 0;
    for (int f = 0; f < nf; ++f) {
        double a3 = area3d(cm, f);
        if (a3 <= degenerate_eps) {
            ++out.excluded_degenerate;
            continue;
        }
        sa[f] = signed_area2d(cm, uv, f);
        ratio[f] = std::abs(sa[f]) / a3;
        mean_ratio += ratio[f];
        ++included;
    }
    out.included = included;
    if (included == 0) {
        out.all_degenerate = true;
        out.chart_value = 1.0;  // empty mean convention
        return out;
    }
    mean_ratio /= included;

    double sum = 0.0;
    for (int f = 0; f < nf; ++f) {
        double a3 = area3d(cm, f);
        if (a3 <= degenerate_eps) continue;
        double t;
        if (sa[f] < 0.0) {
            ++out.flipped;
            t = kStretchClip;
        } else {
            double s = (mean_ratio > 0.0) ? ratio[f] / mean_ratio : 0.0;
            if (s <= 0.0) {
                t = kStretchClip;  // collapsed face: 1/s diverges
            } else {
                t = std::min(std::max(s, 1.0 / s), kStretchClip);
            }
        }
        out.term[f] = t;
        sum += t;
    }
    out.chart_value = sum / included;
    return out;
}

std::vector<double> face_stretches(const ChartMesh& cm, const Eigen::MatrixX2d& uv,
                                   double degenerate_eps) {
    const int nf = cm.face_count();
    std::vector<double> out(nf, std::numeric_limits<double>::quiet_NaN());
    double mean_ratio = 0.0;
    int included = 0;
    for (int f = 0; f < nf; ++f) {
        double a3 = area3d(cm, f);
        if (a3 <= degenerate_eps) continue;
        mean_ratio += std::abs(signed_area2d(cm, uv, f)) / a3;
        ++included;
    }
    if (included == 0) return out;
    mean_ratio /= included;
    for (int f = 0; f < nf; ++f) {
        double a3 = area3d(cm, f);
        if (a3 <= degenerate_eps) continue;
        double r = std::abs(signed_area2d(cm, uv, f)) / a3;
        out[f] = (mean_ratio > 0.0) ? r / mean_ratio : 0.0;
    }
    return out;
}

double face_stretch(const ChartMesh& cm, const Eigen::MatrixX2d& uv, int face,
                    double degenerate_eps) {
    return face_stretches(cm, uv, degenerate_eps)[face];
}

double chart_distortion(const ChartMesh& cm, const ChartParam& param, double degenerate_eps) {
    if (!param.valid) return kInfDistortion;
    return distortion_terms(cm, param.uv, degenerate_eps).chart_value;
}

double set_distortion(const std::vector<double>& per_chart) {
    if (per_chart.empty()) throw std::invalid_argument("set_distortion: empty chart set");
    return *std::max_element(per_chart.begin(), per_chart.end());
}

double overall_area_distortion(const std::vector<DistortionTerms>& charts) {
    double sum = 0.0;
    long count = 0;
    for (const DistortionTerms& c : charts) {
        for (double t : c.term) {
            if (std::isnan(t)) continue;
            sum += t;
            ++count;
        }
    }
    return count > 0 ? sum / count : 1.0;
}

AngularAccum angular_accum(const ChartMesh& cm, const Eigen::MatrixX2d& uv,
                           double degenerate_eps) {
    AngularAccum acc;
    for (int f = 0; f < cm.face_count(); ++f) {
        if (area3d(cm, f) <= degenerate_eps) continue;
        const Face& t = cm.faces[f];
        Vec3 e1 = cm.positions[t[1]] - cm.positions[t[0]];
        Vec3 e2 = cm.positions[t[2]] - cm.positions[t[0]];
        double du1 = uv(t[1], 0) - uv(t[0], 0), dv1 = uv(t[1], 1) - uv(t[0], 1);
        double du2 = uv(t[2], 0) - uv(t[0], 0), dv2 = uv(t[2], 1) - uv(t[0], 1);
        double det = du1 * dv2 - du2 * dv1;
        if (det == 0.0) {
            acc.sum_abs_cos += 1.0;  // collapsed UV face: fully non-conformal
            ++acc.faces;
            continue;
        }
        Vec3 tangent = (e1 * dv2 - e2 * dv1) / det;
        Vec3 bitangent = (e2 * du1 - e1 * du2) / det;
        double nt = tangent.norm(), nb = bitangent.norm();
        if (nt == 0.0 || nb == 0.0) {
            acc.sum_abs_cos += 1.0;
            ++acc.faces;
            continue;
        }
        double c = std::abs(tangent.dot(bitangent) / (nt * nb));
        acc.sum_abs_cos += std::min(c, 1.0);
        ++acc.faces;
    }
    return acc;
}

double angular_metric(const std::vector<AngularAccum>& charts) {
    double sum = 0.0;
    long faces = 0;
    for (const AngularAccum& a : charts) {
        sum += a.sum_abs_cos;
        faces += a.faces;
    }
    return faces > 0 ? 1.0 - sum / faces : 1.0;
}

double chart_boundary_length(const ChartMesh& cm, const Eigen::MatrixX2d& uv) {
    ChartTopology topo = build_topology(cm);
    double len = 0.0;
    for (const ChartTopology::Edge& e : topo.edges) {
        if (e.f1 != -1) continue;
        len += (uv.row(e.v0) - uv.row(e.v1)).norm();
    }
    return len;
}

namespace {

double orient(const Vec2& a, const Vec2& b, const Vec2& c) {
    return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

bool strictly_inside(const Vec2& p, const Vec2 t[3]) {
    double d0 = orient(t[0], t[1], p);
    double d1 = orient(t[1], t[2], p);
    double d2 = orient(t[2], t[0], p);
    bool all_pos = d0 > 0 && d1 > 0 && d2 > 0;
    bool all_neg = d0 < 0 && d1 < 0 && d2 < 0;
    return all_pos || all_neg;
}

bool segments_properly_cross(const Vec2& p, const Vec2& q, const Vec2& r, const Vec2& s) {
    double d1 = orient(p, q, r);
    double d2 = orient(p, q, s);
    double d3 = orient(r, s, p);
    double d4 = orient(r, s, q);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
        ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
        return true;
    if (d1 == 0 && d2 == 0 && d3 == 0 && d4 == 0) {
        // collinear: overlap of positive length?
        int axis = std::abs(q.x() - p.x()) >= std::abs(q.y() - p.y()) ? 0 : 1;
        double lo1 = std::min(p[axis], q[axis]), hi1 = std::max(p[axis], q[axis]);
        double lo2 = std::min(r[axis], s[axis]), hi2 = std::max(r[axis], s[axis]);
        return std::min(hi1, hi2) > std::max(lo1, lo2);
    }
    return false;
}

double tri_abs_area(const Vec2 t[3]) { return std::abs(orient(t[0], t[1], t[2])) * 0.5; }

}  // namespace

bool tri_interiors_intersect(const Vec2 a[3], const Vec2 b[3], const int ia[3], const int ib[3]) {
    bool sa[3], sb[3];
    int shared = 0;
    for (int i = 0; i < 3; ++i) {
        sa[i] = ia[i] == ib[0] || ia[i] == ib[1] || ia[i] == ib[2];
        sb[i] = ib[i] == ia[0] || ib[i] == ia[1] || ib[i] == ia[2];
        if (sa[i]) ++shared;
    }
    if (shared == 3) return tri_abs_area(a) > 0 && tri_abs_area(b) > 0;
    if (shared == 2) {
        // common edge: interiors overlap iff the opposite corners fall
        // strictly on the same side of it
        int oa = !sa[0] ? 0 : (!sa[1] ? 1 : 2);
        int ob = !sb[0] ? 0 : (!sb[1] ? 1 : 2);
        const Vec2& e0 = a[(oa + 1) % 3];
        const Vec2& e1 = a[(oa + 2) % 3];
        double da = orient(e0, e1, a[oa]);
        double db = orient(e0, e1, b[ob]);
        return (da > 0 && db > 0) || (da < 0 && db < 0);
    }
    for (int i = 0; i < 3; ++i) {
        int a0 = ia[i], a1 = ia[(i + 1) % 3];
        for (int j = 0; j < 3; ++j) {
            int b0 = ib[j], b1 = ib[(j + 1) % 3];
            if (a0 == b0 || a0 == b1 || a1 == b0 || a1 == b1) continue;  // edges meet at a vertex
            if (segments_properly_cross(a[i], a[(i + 1) % 3], b[j], b[(j + 1) % 3])) return true;
        }
    }
    for (int i = 0; i < 3; ++i) {
        if (!sa[i] && strictly_inside(a[i], b)) return true;
        if (!sb[i] && strictly_inside(b[i], a)) return true;
    }
    return false;
}

bool no_overlap(const ChartMesh& cm, const Eigen::MatrixX2d& uv, int flipped_count) {
    if (flipped_count > 0) return false;
    const int nf = cm.face_count();
    if (nf <= 1) return true;

    // uniform grid over the chart bounding box, cell ~ median triangle diameter
    std::vector<std::array<Vec2, 2>> boxes(nf);
    std::vector<double> diam(nf);
    Vec2 lo(1e300, 1e300), hi(-1e300, -1e300);
    for (int f = 0; f < nf; ++f) {
        const Face& t = cm.faces[f];
        Vec2 bl = uv.row(t[0]), tr = uv.row(t[0]);
        for (int c = 1; c < 3; ++c) {
            bl = bl.cwiseMin(Vec2(uv.row(t[c])));
            tr = tr.cwiseMax(Vec2(uv.row(t[c])));
        }
        boxes[f] = {bl, tr};
        diam[f] = (tr - bl).norm();
        lo = lo.cwiseMin(bl);
        hi = hi.cwiseMax(tr);
    }
    std::vector<double> ds = diam;
    std::nth_element(ds.begin(), ds.begin() + ds.size() / 2, ds.end());
    double cell = std::max(ds[ds.size() / 2], 1e-12);
    Vec2 extent = hi - lo;
    int nx = std::max(1, std::min(1024, static_cast<int>(extent.x() / cell) + 1));
    int ny = std::max(1, std::min(1024, static_cast<int>(extent.y() / cell) + 1));
    double sx = nx / std::max(extent.x(), 1e-300);
    double sy = ny / std::max(extent.y(), 1e-300);

    std::vector<std::vector<int>> cells(static_cast<size_t>(nx) * ny);
    auto cell_range = [&](int f, int& x0, int& x1, int& y0, int& y1) {
        x0 = std::clamp(static_cast<int>((boxes[f][0].x() - lo.x()) * sx), 0, nx - 1);
        x1 = std::clamp(static_cast<int>((boxes[f][1].x() - lo.x()) * sx), 0, nx - 1);
        y0 = std::clamp(static_cast<int>((boxes[f][0].y() - lo.y()) * sy), 0, ny - 1);
        y1 = std::clamp(static_cast<int>((boxes[f][1].y() - lo.y()) * sy), 0, ny - 1);
    };
    for (int f = 0; f < nf; ++f) {
        int x0, x1, y0, y1;
        cell_range(f, x0, x1, y0, y1);
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) cells[static_cast<size_t>(y) * nx + x].push_back(f);
    }

    std::unordered_set<std::uint64_t> tested;
    for (const std::vector<int>& bucket : cells) {
        for (size_t i = 0; i < bucket.size(); ++i) {
            for (size_t j = i + 1; j < bucket.size(); ++j) {
                int f = bucket[i], g = bucket[j];
                std::uint64_t key = (static_cast<std::uint64_t>(std::min(f, g)) << 32) |
                                    static_cast<std::uint32_t>(std::max(f, g));
                if (!tested.insert(key).second) continue;
                if (boxes[f][1].x() < boxes[g][0].x() || boxes[g][1].x() < boxes[f][0].x() ||
                    boxes[f][1].y() < boxes[g][0].y() || boxes[g][1].y() < boxes[f][0].y())
                    continue;
                const Face& ta = cm.faces[f];
                const Face& tb = cm.faces[g];
                Vec2 pa[3], pb[3];
                int ida[3], idb[3];
                for (int c = 0; c < 3; ++c) {
                    pa[c] = uv.row(ta[c]);
                    pb[c] = uv.row(tb[c]);
                    ida[c] = ta[c];
                    idb[c] = tb[c];
                }
                if (tri_interiors_intersect(pa, pb, ida, idb)) return false;
            }
        }
    }
    return true;
}

bool no_overlap(const ChartMesh& cm, const ChartParam& param) {
    if (!param.valid) return false;
    return no_overlap(cm, param.uv, param.flipped_count);
}

}  // namespace partatlas
