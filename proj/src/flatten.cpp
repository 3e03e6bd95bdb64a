#include "partatlas/flatten.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace partatlas {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kMinAngle = 1e-7;

double corner_angle(const Vec3& at, const Vec3& p1, const Vec3& p2) {
    Vec3 a = p1 - at, b = p2 - at;
    double na = a.norm(), nb = b.norm();
    if (na == 0.0 || nb == 0.0) return kMinAngle;
    double c = a.dot(b) / (na * nb);
    c = std::clamp(c, -1.0, 1.0);
    return std::clamp(std::acos(c), kMinAngle, kPi - kMinAngle);
}

// 3 angles per face, corner c at vertex faces[f][c]
std::vector<double> corner_angles(const ChartMesh& cm) {
    std::vector<double> ang(cm.face_count() * 3);
    for (int f = 0; f < cm.face_count(); ++f) {
        const Face& t = cm.faces[f];
        const Vec3& p0 = cm.positions[t[0]];
        const Vec3& p1 = cm.positions[t[1]];
        const Vec3& p2 = cm.positions[t[2]];
        ang[3 * f + 0] = corner_angle(p0, p1, p2);
        ang[3 * f + 1] = corner_angle(p1, p2, p0);
        ang[3 * f + 2] = corner_angle(p2, p0, p1);
    }
    return ang;
}

std::pair<int, int> pick_pins(const ChartMesh& cm, const ChartTopology& topo) {
    std::vector<int> bv = topo.boundary_vertices();
    if (bv.size() < 2) return {-1, -1};
    int p1 = bv[0], p2 = bv[1];
    if (bv.size() <= 2048) {
        double best = -1.0;
        for (size_t i = 0; i < bv.size(); ++i)
            for (size_t j = i + 1; j < bv.size(); ++j) {
                double d = (cm.positions[bv[i]] - cm.positions[bv[j]]).squaredNorm();
                if (d > best) {
                    best = d;
                    p1 = bv[i];
                    p2 = bv[j];
                }
            }
    } else {
        // double sweep approximation for very large boundaries
        Vec3 centroid = Vec3::Zero();
        for (int v : bv) centroid += cm.positions[v];
        centroid /= static_cast<double>(bv.size());
        auto furthest_from = [&](const Vec3& q) {
            int arg = bv[0];
            double best = -1.0;
            for (int v : bv) {
                double d = (cm.positions[v] - q).squaredNorm();
                if (d > best) {
                    best = d;
                    arg = v;
                }
            }
            return arg;
        };
        p1 = furthest_from(centroid);
        p2 = furthest_from(cm.positions[p1]);
        if (p1 == p2) p2 = (bv[0] != p1) ? bv[0] : bv[1];
    }
    if (p1 > p2) std::swap(p1, p2);
    return {p1, p2};
}

void finalize(ChartParam& param, const ChartMesh& cm) {
    for (int v = 0; v < param.uv.rows(); ++v)
        if (!std::isfinite(param.uv(v, 0)) || !std::isfinite(param.uv(v, 1))) {
            param.valid = false;
            return;
        }
    auto signed_area = [&](int f) {
        const Face& t = cm.faces[f];
        Vec2 a = param.uv.row(t[0]), b = param.uv.row(t[1]), c = param.uv.row(t[2]);
        return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
    };
    double total = 0.0;
    for (int f = 0; f < cm.face_count(); ++f) total += signed_area(f);
    if (total < 0.0) param.uv.col(1) *= -1.0;  // canonical majority orientation
    param.signed_area2d.resize(cm.face_count());
    param.flipped_count = 0;
    for (int f = 0; f < cm.face_count(); ++f) {
        double a = signed_area(f);
        param.signed_area2d[f] = a;
        if (a < 0.0) ++param.flipped_count;
    }
    param.valid = true;
}

// Conformal fit with prescribed per-corner angles: each triangle contributes
// the relation P3 = P1 + (sin a2 / sin a3) * R(a1) * (P2 - P1), assembled as
// a least-squares system over free vertices with two pins.
bool reconstruct_uv(const ChartMesh& cm, const std::vector<double>& angles, int pin1, int pin2,
                    ChartParam& out) {
    const int nv = cm.vertex_count();
    std::vector<int> var(nv, -1);
    int nfree = 0;
    for (int v = 0; v < nv; ++v)
        if (v != pin1 && v != pin2) var[v] = nfree++;

    Eigen::Vector4d pin_uv(0.0, 0.0, 1.0, 0.0);  // pin1 -> (0,0), pin2 -> (1,0)

    std::vector<Eigen::Triplet<double>> a_trips;
    a_trips.reserve(cm.face_count() * 12);
    std::vector<std::pair<int, double>> rhs_rows;
    int nrows = 0;

    auto pin_value = [&](int v, int comp) {
        return (v == pin1) ? pin_uv[comp] : pin_uv[2 + comp];
    };

    // entries are (vertex*2+comp, coeff) pairs; pinned slots move to the rhs
    auto emit_row = [&](std::initializer_list<std::pair<int, double>> entries) {
        double rhs = 0.0;
        for (const auto& [slot, c] : entries) {
            int v = slot >> 1, comp = slot & 1;
            if (var[v] < 0)
                rhs -= c * pin_value(v, comp);
            else
                a_trips.emplace_back(nrows, 2 * var[v] + comp, c);
        }
        if (rhs != 0.0) rhs_rows.push_back({nrows, rhs});
        ++nrows;
    };

    for (int f = 0; f < cm.face_count(); ++f) {
        int v[3] = {cm.faces[f][0], cm.faces[f][1], cm.faces[f][2]};
        double a[3] = {angles[3 * f], angles[3 * f + 1], angles[3 * f + 2]};
        double sn[3] = {std::sin(a[0]), std::sin(a[1]), std::sin(a[2])};
        // rotate so the largest sine sits at slot 2 (most stable division)
        int shift = 0;
        if (sn[1] >= sn[0] && sn[1] >= sn[2])
            shift = 2;  // bring index 1 to slot 2
        else if (sn[0] >= sn[1] && sn[0] >= sn[2])
            shift = 1;  // bring index 0 to slot 2
        for (int s = 0; s < shift; ++s) {
            std::rotate(v, v + 1, v + 3);
            std::rotate(a, a + 1, a + 3);
            std::rotate(sn, sn + 1, sn + 3);
        }
        double ratio = (sn[2] == 0.0) ? 1.0 : sn[1] / sn[2];
        double cosine = std::cos(a[0]) * ratio;
        double sine = sn[0] * ratio;
        int u1 = 2 * v[0], v1 = 2 * v[0] + 1;
        int u2 = 2 * v[1], v2 = 2 * v[1] + 1;
        int u3 = 2 * v[2], v3 = 2 * v[2] + 1;
        emit_row({{u1, cosine - 1.0}, {v1, -sine}, {u2, -cosine}, {v2, sine}, {u3, 1.0}});
        emit_row({{u1, sine}, {v1, cosine - 1.0}, {u2, -sine}, {v2, -cosine}, {v3, 1.0}});
    }

    Eigen::SparseMatrix<double> A(nrows, 2 * nfree);
    A.setFromTriplets(a_trips.begin(), a_trips.end());
    Eigen::VectorXd b = Eigen::VectorXd::Zero(nrows);
    for (const auto& [r, val] : rhs_rows) b[r] += val;

    Eigen::SparseMatrix<double> AtA = Eigen::SparseMatrix<double>(A.transpose()) * A;
    Eigen::VectorXd Atb = A.transpose() * b;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
    solver.compute(AtA);
    if (solver.info() != Eigen::Success) return false;
    Eigen::VectorXd x = solver.solve(Atb);
    if (solver.info() != Eigen::Success) return false;

    out.uv.resize(nv, 2);
    for (int vv = 0; vv < nv; ++vv) {
        if (var[vv] < 0) {
            out.uv(vv, 0) = pin_value(vv, 0);
            out.uv(vv, 1) = pin_value(vv, 1);
        } else {
            out.uv(vv, 0) = x[2 * var[vv]];
            out.uv(vv, 1) = x[2 * var[vv] + 1];
        }
    }
    return true;
}

}  // namespace

const char* solver_name(SolverKind s) {
    switch (s) {
        case SolverKind::abf: return "abf";
        case SolverKind::lscm: return "lscm";
        case SolverKind::projection: return "projection";
    }
    return "?";
}

ChartParam flatten_projection(const ChartMesh& cm) {
    ChartParam param;
    param.solver = SolverKind::projection;
    param.converged = true;
    const int nv = cm.vertex_count();
    Vec3 n = Vec3::Zero();
    for (int f = 0; f < cm.face_count(); ++f) {
        const Face& t = cm.faces[f];
        Vec3 cr = (cm.positions[t[1]] - cm.positions[t[0]])
                      .cross(cm.positions[t[2]] - cm.positions[t[0]]);
        n += cr;  // |cr| = 2*area, so this is area-weighted
    }
    if (n.norm() < 1e-30) n = Vec3(0, 0, 1);
    n.normalize();
    int smallest = 0;
    for (int i = 1; i < 3; ++i)
        if (std::abs(n[i]) < std::abs(n[smallest])) smallest = i;
    Vec3 axis = Vec3::Zero();
    axis[smallest] = 1.0;
    Vec3 tangent = axis.cross(n).normalized();
    Vec3 bitangent = n.cross(tangent);
    Vec3 centroid = Vec3::Zero();
    for (const Vec3& p : cm.positions) centroid += p;
    centroid /= std::max(1, nv);
    param.uv.resize(nv, 2);
    for (int v = 0; v < nv; ++v) {
        Vec3 d = cm.positions[v] - centroid;
        param.uv(v, 0) = d.dot(tangent);
        param.uv(v, 1) = d.dot(bitangent);
    }
    finalize(param, cm);
    return param;
}

ChartParam flatten_lscm(const ChartMesh& cm) {
    ChartParam param;
    param.solver = SolverKind::lscm;
    ChartTopology topo = build_topology(cm);
    auto [p1, p2] = pick_pins(cm, topo);
    if (p1 < 0) return param;  // closed chart, not flattenable
    std::vector<double> ang = corner_angles(cm);
    if (!reconstruct_uv(cm, ang, p1, p2, param)) return param;
    param.converged = true;
    finalize(param, cm);
    return param;
}

namespace {

// ABF++ stage 1: optimize per-corner angles.
// Variables: alpha (3 per face); multipliers: one per face (triangle sum),
// two per interior vertex (angle sum, sine product). Newton steps eliminate
// the alpha block (diagonal) and the triangle block (diagonal after the first
// reduction), leaving a sparse 2*nint x 2*nint system.
struct AbfSystem {
    const ChartMesh& cm;
    std::vector<int> interior;      // local vertex -> interior id or -1
    int nint = 0;
    std::vector<std::vector<std::pair<int, int>>> star;  // per vertex: (face, corner)

    std::vector<double> alpha, beta, weight, sine, cosine;
    std::vector<double> lambda_tri;
    Eigen::VectorXd lambda_plan, lambda_len;

    std::vector<double> b_alpha, b_tri;
    Eigen::VectorXd b_int;

    explicit AbfSystem(const ChartMesh& mesh, const ChartTopology& topo) : cm(mesh) {
        const int nv = cm.vertex_count();
        const int nf = cm.face_count();
        interior.assign(nv, -1);
        for (int v = 0; v < nv; ++v)
            if (!topo.boundary_vertex[v]) interior[v] = nint++;
        star.assign(nv, {});
        for (int f = 0; f < nf; ++f)
            for (int c = 0; c < 3; ++c) star[cm.faces[f][c]].push_back({f, c});

        beta = corner_angles(cm);
        alpha = beta;
        weight.resize(3 * nf);
        for (int i = 0; i < 3 * nf; ++i) weight[i] = 2.0 / (beta[i] * beta[i]);
        // rescale interior vertex angles so they sum to 2*pi
        for (int v = 0; v < nv; ++v) {
            if (interior[v] < 0) continue;
            double sum = 0.0;
            for (auto [f, c] : star[v]) sum += beta[3 * f + c];
            double scale = (sum == 0.0) ? 0.0 : 2.0 * kPi / sum;
            for (auto [f, c] : star[v]) beta[3 * f + c] = alpha[3 * f + c] = beta[3 * f + c] * scale;
        }
        lambda_tri.assign(nf, 0.0);
        lambda_plan = Eigen::VectorXd::Zero(nint);
        lambda_len = Eigen::VectorXd::Ones(nint);
        b_alpha.resize(3 * nf);
        b_tri.resize(nf);
        b_int = Eigen::VectorXd::Zero(2 * nint);
        update_trig();
    }

    void update_trig() {
        sine.resize(alpha.size());
        cosine.resize(alpha.size());
        for (size_t i = 0; i < alpha.size(); ++i) {
            sine[i] = std::sin(alpha[i]);
            cosine[i] = std::cos(alpha[i]);
        }
    }

    // d/d(alpha_aid) of the sine-product constraint at v (aid = -1: the value)
    double sin_product(int v, int aid) const {
        double s1 = 1.0, s2 = 1.0;
        for (auto [f, c] : star[v]) {
            int nxt = 3 * f + (c + 1) % 3;
            int prv = 3 * f + (c + 2) % 3;
            if (nxt == aid) {
                s1 *= cosine[nxt];
                s2 = 0.0;
            } else {
                s1 *= sine[nxt];
            }
            if (prv == aid) {
                s1 = 0.0;
                s2 *= cosine[prv];
            } else {
                s2 *= sine[prv];
            }
        }
        return s1 - s2;
    }

    // fills b_alpha/b_tri/b_int with negative gradients, returns max-norm
    double compute_gradient() {
        double norm = 0.0;
        const int nf = cm.face_count();
        for (int f = 0; f < nf; ++f) {
            for (int c = 0; c < 3; ++c) {
                int id = 3 * f + c;
                int v = cm.faces[f][c];
                double g = (alpha[id] - beta[id]) * weight[id] + lambda_tri[f];
                if (interior[v] >= 0) g += lambda_plan[interior[v]];
                for (int o = 1; o < 3; ++o) {
                    int vo = cm.faces[f][(c + o) % 3];
                    if (interior[vo] >= 0) g += lambda_len[interior[vo]] * sin_product(vo, id);
                }
                b_alpha[id] = -g;
                norm = std::max(norm, std::abs(g));
            }
            double gt = alpha[3 * f] + alpha[3 * f + 1] + alpha[3 * f + 2] - kPi;
            b_tri[f] = -gt;
            norm = std::max(norm, std::abs(gt));
        }
        for (int v = 0; v < cm.vertex_count(); ++v) {
            int iv = interior[v];
            if (iv < 0) continue;
            double gp = -2.0 * kPi;
            for (auto [f, c] : star[v]) gp += alpha[3 * f + c];
            b_int[iv] = -gp;
            norm = std::max(norm, std::abs(gp));
            double gl = sin_product(v, -1);
            b_int[nint + iv] = -gl;
            norm = std::max(norm, std::abs(gl));
        }
        return norm;
    }

    bool newton_step() {
        const int nf = cm.face_count();
        const int nvar = 2 * nint;
        Eigen::VectorXd rhs = b_int;
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(static_cast<size_t>(nf) * 36);
        std::vector<Eigen::Matrix3d> j2_all(nf);
        std::vector<double> bstar(nf), dstar(nf);

        for (int f = 0; f < nf; ++f) {
            int e[3] = {3 * f, 3 * f + 1, 3 * f + 2};
            int vv[3] = {cm.faces[f][0], cm.faces[f][1], cm.faces[f][2]};
            double wi[3] = {1.0 / weight[e[0]], 1.0 / weight[e[1]], 1.0 / weight[e[2]]};

            double b = b_alpha[e[0]] * wi[0] + b_alpha[e[1]] * wi[1] + b_alpha[e[2]] * wi[2] -
                       b_tri[f];
            double si = 1.0 / (wi[0] + wi[1] + wi[2]);
            double betav[3] = {b * si - b_alpha[e[0]], b * si - b_alpha[e[1]],
                               b * si - b_alpha[e[2]]};
            bstar[f] = b;
            dstar[f] = si;

            Eigen::Matrix3d W;
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) W(r, c) = (r == c) ? si - weight[e[r]] : si;

            Eigen::Matrix3d& j2 = j2_all[f];
            j2.setZero();
            int vid[6] = {-1, -1, -1, -1, -1, -1};
            double row[3][6] = {};

            for (int c = 0; c < 3; ++c) {
                int iv = interior[vv[c]];
                if (iv < 0) continue;
                vid[c] = iv;
                vid[3 + c] = nint + iv;
                for (int r = 0; r < 3; ++r)
                    j2(r, c) = (r == c) ? wi[c] : sin_product(vv[c], e[r]) * wi[r];
                rhs[iv] += j2(c, c) * betav[c];
                double acc = 0.0;
                for (int r = 0; r < 3; ++r)
                    if (r != c) acc += j2(r, c) * betav[r];
                rhs[nint + iv] += acc;
                for (int r = 0; r < 3; ++r) {
                    row[r][c] = j2(c, c) * W(r, c);
                    double s = 0.0;
                    for (int o = 0; o < 3; ++o)
                        if (o != c) s += j2(o, c) * W(r, o);
                    row[r][3 + c] = s;
                }
            }

            for (int i = 0; i < 3; ++i) {
                int r = vid[i];
                if (r < 0) continue;
                for (int j = 0; j < 6; ++j) {
                    int c = vid[j];
                    if (c < 0) continue;
                    for (int k = 0; k < 3; ++k) {
                        double val = j2(k, i) * row[k][j];
                        if (val == 0.0) continue;
                        trips.emplace_back(k == i ? r : r + nint, c, val);
                    }
                }
            }
        }

        Eigen::VectorXd x;
        if (nvar > 0) {
            Eigen::SparseMatrix<double> A(nvar, nvar);
            A.setFromTriplets(trips.begin(), trips.end());
            Eigen::SparseLU<Eigen::SparseMatrix<double>> solver;
            solver.compute(A);
            if (solver.info() != Eigen::Success) return false;
            x = solver.solve(rhs);
            if (solver.info() != Eigen::Success) return false;
            if (!x.allFinite()) return false;
        } else {
            x.resize(0);
        }

        for (int f = 0; f < nf; ++f) {
            int e[3] = {3 * f, 3 * f + 1, 3 * f + 2};
            int vv[3] = {cm.faces[f][0], cm.faces[f][1], cm.faces[f][2]};
            const Eigen::Matrix3d& j2 = j2_all[f];
            double pre[3] = {0.0, 0.0, 0.0};
            for (int c = 0; c < 3; ++c) {
                int iv = interior[vv[c]];
                if (iv < 0) continue;
                double xp = x[iv];
                double xl = x[nint + iv];
                for (int r = 0; r < 3; ++r) pre[r] += j2(r, c) * (r == c ? xp : xl);
            }
            double dl1 = dstar[f] * (bstar[f] - (pre[0] + pre[1] + pre[2]));
            lambda_tri[f] += dl1;
            for (int c = 0; c < 3; ++c) {
                double a = alpha[e[c]] + (b_alpha[e[c]] - dl1) / weight[e[c]] - pre[c];
                if (!std::isfinite(a)) return false;
                alpha[e[c]] = std::clamp(a, kMinAngle, kPi - kMinAngle);
            }
        }
        for (int i = 0; i < nint; ++i) {
            lambda_plan[i] += x[i];
            lambda_len[i] += x[nint + i];
        }
        update_trig();
        return true;
    }
};

}  // namespace

ChartParam flatten_abf(const ChartMesh& cm, int outer_iters, double grad_tol) {
    ChartParam param;
    param.solver = SolverKind::abf;
    ChartTopology topo = build_topology(cm);
    auto [p1, p2] = pick_pins(cm, topo);
    if (p1 < 0) return param;  // closed chart

    AbfSystem sys(cm, topo);
    bool converged = false;
    bool failed = false;
    if (sys.nint == 0) {
        converged = true;  // no interior constraints; 3D angles are feasible
    } else {
        for (int it = 0; it <= outer_iters; ++it) {
            double norm = sys.compute_gradient();
            if (!std::isfinite(norm)) {
                failed = true;
                break;
            }
            if (norm < grad_tol) {
                converged = true;
                break;
            }
            if (it == outer_iters) break;
            if (!sys.newton_step()) {
                failed = true;
                break;
            }
        }
    }
    if (failed) {
        ChartParam fb = flatten_lscm(cm);
        return fb;
    }
    if (!reconstruct_uv(cm, sys.alpha, p1, p2, param)) {
        ChartParam fb = flatten_lscm(cm);
        return fb;
    }
    param.converged = converged;
    finalize(param, cm);
    if (!param.valid) {
        ChartParam fb = flatten_lscm(cm);
        return fb;
    }
    param.abf_angles = std::move(sys.alpha);
    return param;
}

ChartParam flatten_chart(const ChartMesh& cm, SolverKind solver, int abf_outer_iters,
                         double abf_grad_tol) {
    switch (solver) {
        case SolverKind::abf: return flatten_abf(cm, abf_outer_iters, abf_grad_tol);
        case SolverKind::lscm: return flatten_lscm(cm);
        case SolverKind::projection: return flatten_projection(cm);
    }
    return {};
}

}  // namespace partatlas
