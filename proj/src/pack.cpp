#include "partatlas/pack.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace partatlas {

namespace {

struct Rect {
    int chart;
    double w, h;         // after density scaling and rotation, before global scale
    int rotation;        // 0 or 90
    Vec2 base;           // uv-space bbox min before rotation
    double chart_scale;  // density factor
};

// skyline bottom-left packer over the unit square
class Skyline {
public:
    Skyline() { segments_.push_back({0.0, 0.0, 1.0}); }

    bool place(double w, double h, double& out_x, double& out_y) {
        double best_y = 2.0, best_x = 2.0;
        bool found = false;
        for (size_t i = 0; i < segments_.size(); ++i) {
            double x = segments_[i].x;
            if (x + w > 1.0 + 1e-12) break;
            double y = support_height(i, w);
            if (y + h > 1.0 + 1e-12) continue;
            if (y < best_y - 1e-15 || (std::abs(y - best_y) <= 1e-15 && x < best_x)) {
                best_y = y;
                best_x = x;
                found = true;
            }
        }
        if (!found) return false;
        add_level(best_x, best_y + h, w);
        out_x = best_x;
        out_y = best_y;
        return true;
    }

private:
    struct Seg {
        double x, y, w;
    };
    std::vector<Seg> segments_;  // sorted by x, covering [0,1]

    double support_height(size_t i, double w) const {
        double need = segments_[i].x + w;
        double y = 0.0;
        for (size_t j = i; j < segments_.size(); ++j) {
            y = std::max(y, segments_[j].y);
            if (segments_[j].x + segments_[j].w >= need - 1e-15) break;
        }
        return y;
    }

    void add_level(double x, double y, double w) {
        std::vector<Seg> next;
        next.reserve(segments_.size() + 2);
        double x1 = x + w;
        for (const Seg& s : segments_) {
            double sx1 = s.x + s.w;
            if (sx1 <= x + 1e-15 || s.x >= x1 - 1e-15) {
                next.push_back(s);
                continue;
            }
            if (s.x < x) next.push_back({s.x, s.y, x - s.x});
            if (sx1 > x1) next.push_back({x1, s.y, sx1 - x1});
        }
        next.push_back({x, y, w});
        std::sort(next.begin(), next.end(), [](const Seg& a, const Seg& b) { return a.x < b.x; });
        // merge equal heights
        segments_.clear();
        for (const Seg& s : next) {
            if (!segments_.empty() && std::abs(segments_.back().y - s.y) < 1e-15 &&
                std::abs(segments_.back().x + segments_.back().w - s.x) < 1e-12) {
                segments_.back().w += s.w;
            } else {
                segments_.push_back(s);
            }
        }
    }
};

}  // namespace

PackResult pack(const std::vector<PackInput>& charts, int n_atlases, double padding) {
    if (charts.empty()) throw std::invalid_argument("pack: no charts");
    if (n_atlases < 1) n_atlases = 1;
    if (2.0 * padding >= 0.5) throw std::invalid_argument("pack: padding too large");
    const int n = static_cast<int>(charts.size());

    std::vector<Rect> rects(n);
    for (int i = 0; i < n; ++i) {
        const PackInput& c = charts[i];
        double area2d = 0.0;
        for (int f = 0; f < c.mesh->face_count(); ++f) {
            const Face& t = c.mesh->faces[f];
            Vec2 a = c.uv.row(t[0]), b = c.uv.row(t[1]), d = c.uv.row(t[2]);
            area2d += std::abs(0.5 * ((b.x() - a.x()) * (d.y() - a.y()) -
                                      (d.x() - a.x()) * (b.y() - a.y())));
        }
        // uniform texel density: 2D area becomes the chart's 3D area
        double f = (area2d > 0.0 && c.area3d > 0.0) ? std::sqrt(c.area3d / area2d) : 1.0;
        Vec2 lo = c.uv.colwise().minCoeff();
        Vec2 hi = c.uv.colwise().maxCoeff();
        double w = (hi.x() - lo.x()) * f;
        double h = (hi.y() - lo.y()) * f;
        w = std::max(w, 1e-9);
        h = std::max(h, 1e-9);
        Rect& r = rects[i];
        r.chart = i;
        r.base = lo;
        r.chart_scale = f;
        // the axis-aligned bbox area is rotation-invariant; prefer landscape
        if (h > w) {
            r.rotation = 90;
            r.w = h;
            r.h = w;
        } else {
            r.rotation = 0;
            r.w = w;
            r.h = h;
        }
    }

    // group charts by part id; balance whole groups across atlases by 3D area
    std::map<int, std::vector<int>> groups;  // part -> chart indices
    for (int i = 0; i < n; ++i) groups[charts[i].part_id].push_back(i);
    struct Group {
        std::vector<int> members;
        double area;
    };
    std::vector<Group> glist;
    double total_area = 0.0;
    for (auto& [part, members] : groups) {
        double a = 0.0;
        for (int i : members) a += charts[i].area3d;
        glist.push_back({members, a});
        total_area += a;
    }
    std::sort(glist.begin(), glist.end(), [](const Group& a, const Group& b) {
        if (a.area != b.area) return a.area > b.area;
        return a.members.front() < b.members.front();
    });
    if (n_atlases > 1) {
        // a group larger than one atlas's fair share is split by charts
        std::vector<Group> expanded;
        for (Group& g : glist) {
            if (g.area > total_area / n_atlases + 1e-12 && g.members.size() > 1) {
                std::vector<int> ms = g.members;
                std::sort(ms.begin(), ms.end(), [&](int a, int b) {
                    double aa = charts[a].area3d, ab = charts[b].area3d;
                    if (aa != ab) return aa > ab;
                    return a < b;
                });
                for (int m : ms) expanded.push_back({{m}, charts[m].area3d});
            } else {
                expanded.push_back(std::move(g));
            }
        }
        glist = std::move(expanded);
        std::sort(glist.begin(), glist.end(), [](const Group& a, const Group& b) {
            if (a.area != b.area) return a.area > b.area;
            return a.members.front() < b.members.front();
        });
    }

    std::vector<double> load(n_atlases, 0.0);
    std::vector<std::vector<int>> atlas_rects(n_atlases);  // placement order
    for (const Group& g : glist) {
        int arg = 0;
        for (int a = 1; a < n_atlases; ++a)
            if (load[a] < load[arg] - 1e-15) arg = a;
        load[arg] += g.area;
        std::vector<int> ms = g.members;
        std::sort(ms.begin(), ms.end(), [&](int a, int b) {
            double aa = rects[a].w * rects[a].h, ab = rects[b].w * rects[b].h;
            if (aa != ab) return aa > ab;
            return a < b;
        });
        for (int m : ms) atlas_rects[arg].push_back(m);
    }

    // largest scale at which every atlas fits, by bisection
    auto try_pack = [&](double scale, std::vector<Vec2>* out_pos) {
        for (int a = 0; a < n_atlases; ++a) {
            Skyline sky;
            for (int idx : atlas_rects[a]) {
                double w = rects[idx].w * scale + 2.0 * padding;
                double h = rects[idx].h * scale + 2.0 * padding;
                double x, y;
                if (!sky.place(w, h, x, y)) return false;
                if (out_pos) (*out_pos)[idx] = Vec2(x + padding, y + padding);
            }
        }
        return true;
    };

    double hi = 1e300;
    for (const Rect& r : rects)
        hi = std::min(hi, (1.0 - 2.0 * padding - 1e-9) / std::max(r.w, r.h));
    double sum_wh = 0.0;
    for (const Rect& r : rects) sum_wh += r.w * r.h;
    if (sum_wh > 0.0) hi = std::min(hi, std::sqrt(static_cast<double>(n_atlases) / sum_wh));

    double lo = hi;
    int guard = 0;
    while (!try_pack(lo, nullptr)) {
        lo *= 0.5;
        if (++guard > 80) throw std::runtime_error("pack: cannot fit charts at any scale");
    }
    if (lo < hi) {
        for (int it = 0; it < 12; ++it) {
            double mid = 0.5 * (lo + hi);
            if (try_pack(mid, nullptr))
                lo = mid;
            else
                hi = mid;
        }
    }
    const double scale = lo;

    std::vector<Vec2> pos(n, Vec2::Zero());
    if (!try_pack(scale, &pos)) throw std::runtime_error("pack: final placement failed");

    PackResult out;
    out.global_scale = scale;
    out.packed_uv.resize(n);
    out.atlas_of.assign(n, -1);
    out.atlases.resize(n_atlases);
    for (int a = 0; a < n_atlases; ++a) {
        out.atlases[a].index = a;
        out.atlases[a].padding = padding;
        out.atlases[a].global_scale = scale;
    }
    for (int a = 0; a < n_atlases; ++a) {
        for (int idx : atlas_rects[a]) {
            const Rect& r = rects[idx];
            const PackInput& c = charts[idx];
            Eigen::MatrixX2d uv = c.uv;
            for (int v = 0; v < uv.rows(); ++v) {
                double x = (uv(v, 0) - r.base.x()) * r.chart_scale;
                double y = (uv(v, 1) - r.base.y()) * r.chart_scale;
                if (r.rotation == 90) {
                    // CCW rotation (x,y) -> (-y,x), rebased to [0,r.w]x[0,r.h]
                    double rx = r.w - y, ry = x;
                    x = rx;
                    y = ry;
                }
                uv(v, 0) = x * scale + pos[idx].x();
                uv(v, 1) = y * scale + pos[idx].y();
            }
            out.packed_uv[idx] = std::move(uv);
            out.atlas_of[idx] = a;
            out.atlases[a].placements.push_back(
                {idx, r.rotation, pos[idx], r.chart_scale});
        }
    }
    return out;
}

double efficiency(const PackResult& packed, const std::vector<PackInput>& charts) {
    double total = 0.0;
    for (size_t i = 0; i < charts.size(); ++i) {
        const Eigen::MatrixX2d& uv = packed.packed_uv[i];
        for (int f = 0; f < charts[i].mesh->face_count(); ++f) {
            const Face& t = charts[i].mesh->faces[f];
            Vec2 a = uv.row(t[0]), b = uv.row(t[1]), c = uv.row(t[2]);
            total += std::abs(0.5 * ((b.x() - a.x()) * (c.y() - a.y()) -
                                     (c.x() - a.x()) * (b.y() - a.y())));
        }
    }
    return total / static_cast<double>(packed.atlases.size());
}

namespace {

void hsv_to_rgb(double h, double s, double v, unsigned char* rgb) {
    h = h - std::floor(h);
    double r, g, b;
    int i = static_cast<int>(h * 6.0);
    double f = h * 6.0 - i;
    double p = v * (1.0 - s), q = v * (1.0 - f * s), t = v * (1.0 - (1.0 - f) * s);
    switch (i % 6) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
    rgb[0] = static_cast<unsigned char>(std::clamp(r, 0.0, 1.0) * 255.0 + 0.5);
    rgb[1] = static_cast<unsigned char>(std::clamp(g, 0.0, 1.0) * 255.0 + 0.5);
    rgb[2] = static_cast<unsigned char>(std::clamp(b, 0.0, 1.0) * 255.0 + 0.5);
}

}  // namespace

std::vector<AtlasImage> render_atlases(const PackResult& packed,
                                       const std::vector<PackInput>& charts, int resolution) {
    std::vector<AtlasImage> images(packed.atlases.size());
    for (AtlasImage& img : images) {
        img.width = img.height = resolution;
        img.rgb.assign(static_cast<size_t>(resolution) * resolution * 3, 255);
    }

    // stable part color order
    std::map<int, int> part_rank;
    for (const PackInput& c : charts) part_rank.emplace(c.part_id, static_cast<int>(part_rank.size()));

    std::map<int, int> chart_in_part;  // running index within part for shading
    for (size_t i = 0; i < charts.size(); ++i) {
        int a = packed.atlas_of[i];
        if (a < 0) continue;
        AtlasImage& img = images[a];
        const Eigen::MatrixX2d& uv = packed.packed_uv[i];
        int rank = part_rank[charts[i].part_id];
        int shade_idx = chart_in_part[charts[i].part_id]++;
        double hue = std::fmod(0.61803398875 * rank, 1.0);
        double val = 0.95 - 0.18 * (shade_idx % 3) / 2.0;
        unsigned char color[3];
        hsv_to_rgb(hue, 0.55, val, color);

        auto put = [&](int x, int y, const unsigned char* c) {
            if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
            size_t off = (static_cast<size_t>(img.height - 1 - y) * img.width + x) * 3;
            img.rgb[off] = c[0];
            img.rgb[off + 1] = c[1];
            img.rgb[off + 2] = c[2];
        };

        const ChartMesh& cm = *charts[i].mesh;
        for (int f = 0; f < cm.face_count(); ++f) {
            const Face& t = cm.faces[f];
            Vec2 p0 = uv.row(t[0]) * resolution;
            Vec2 p1 = uv.row(t[1]) * resolution;
            Vec2 p2 = uv.row(t[2]) * resolution;
            int x0 = std::max(0, static_cast<int>(std::floor(std::min({p0.x(), p1.x(), p2.x()}))));
            int x1 = std::min(resolution - 1,
                              static_cast<int>(std::ceil(std::max({p0.x(), p1.x(), p2.x()}))));
            int y0 = std::max(0, static_cast<int>(std::floor(std::min({p0.y(), p1.y(), p2.y()}))));
            int y1 = std::min(resolution - 1,
                              static_cast<int>(std::ceil(std::max({p0.y(), p1.y(), p2.y()}))));
            double d = (p1.x() - p0.x()) * (p2.y() - p0.y()) - (p2.x() - p0.x()) * (p1.y() - p0.y());
            if (d == 0.0) continue;
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    double cx = x + 0.5, cy = y + 0.5;
                    double w0 = ((p1.x() - cx) * (p2.y() - cy) - (p2.x() - cx) * (p1.y() - cy)) / d;
                    double w1 = ((p2.x() - cx) * (p0.y() - cy) - (p0.x() - cx) * (p2.y() - cy)) / d;
                    double w2 = 1.0 - w0 - w1;
                    if (w0 >= 0 && w1 >= 0 && w2 >= 0) put(x, y, color);
                }
            }
        }

        // boundary edges in black
        ChartTopology topo = build_topology(cm);
        const unsigned char black[3] = {0, 0, 0};
        for (const ChartTopology::Edge& e : topo.edges) {
            if (e.f1 != -1) continue;
            Vec2 a0 = uv.row(e.v0) * resolution;
            Vec2 a1 = uv.row(e.v1) * resolution;
            int steps = static_cast<int>((a1 - a0).norm() * 2.0) + 1;
            for (int s = 0; s <= steps; ++s) {
                Vec2 p = a0 + (a1 - a0) * (static_cast<double>(s) / steps);
                put(static_cast<int>(p.x()), static_cast<int>(p.y()), black);
            }
        }
    }
    return images;
}

}  // namespace partatlas
