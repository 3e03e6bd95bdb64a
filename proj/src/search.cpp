#include "partatlas/search.hpp"

#include "partatlas/metrics.hpp"
#include "partatlas/simplify.hpp"

#include <algorithm>
#include <future>
#include <unordered_set>

namespace partatlas {

SearchResult combine(SearchResult left, SearchResult right) {
    SearchResult out;
    if (left.bottom || right.bottom) {
        out.bottom = true;
        return out;
    }
    out.charts = std::move(left.charts);
    out.charts.insert(out.charts.end(), std::make_move_iterator(right.charts.begin()),
                      std::make_move_iterator(right.charts.end()));
    out.dist = std::max(left.dist, right.dist);
    return out;
}

namespace {

struct ThreadSlots {
    std::atomic<int> available;

    explicit ThreadSlots(int n) : available(n) {}
    bool try_acquire() {
        int cur = available.load(std::memory_order_relaxed);
        while (cur > 0) {
            if (available.compare_exchange_weak(cur, cur - 1, std::memory_order_acquire))
                return true;
        }
        return false;
    }
    void release() { available.fetch_add(1, std::memory_order_release); }
};

struct SearchContext {
    const Mesh& mesh;
    const FaceAdjacency& adj;
    const FaceGeometry& geom;
    const PartTree* tree;
    const Eigen::MatrixXd& normal_features;
    const SearchConfig& cfg;
    double degenerate_eps;
    std::chrono::steady_clock::time_point deadline{};
    bool has_deadline = false;
    ThreadSlots* slots;
    std::atomic<long>* nodes_visited;
    std::atomic<long>* full_calls;
    std::atomic<long>* surrogate_calls;

    SearchContext with_tree(const PartTree* t) const {
        SearchContext c = *this;
        c.tree = t;
        return c;
    }

    void check_deadline() const {
        if (has_deadline && std::chrono::steady_clock::now() > deadline)
            throw TimeoutError("search deadline exceeded");
    }
};

// The projection fast path only stands in for the real solver on charts that
// are nearly planar; orthographic projection of strongly tilted face groups
// can score well on the area metric while shearing badly.
constexpr double kPrescreenMinNormalDot = 0.999;

bool near_planar(const SearchContext& ctx, const FaceSet& faces) {
    Vec3 mean = Vec3::Zero();
    for (int f : faces) mean += ctx.geom.area[f] * ctx.geom.normal[f];
    double n = mean.norm();
    if (n == 0.0) return false;
    mean /= n;
    for (int f : faces) {
        if (ctx.geom.degenerate[f]) continue;
        if (ctx.geom.normal[f].dot(mean) < kPrescreenMinNormalDot) return false;
    }
    return true;
}

// Flattens a chart and measures it. Mid-search evaluations may use the
// boundary-locked simplification surrogate; the final pass always re-runs at
// full resolution.
ChartEntry evaluate_chart(const SearchContext& ctx, const FaceSet& faces, bool allow_surrogate,
                          bool projection_prescreen) {
    ctx.check_deadline();
    ChartEntry entry;
    entry.faces = faces;
    entry.evaluated = true;

    ChartMesh cm = extract_chart(ctx.mesh, faces);

    if (projection_prescreen && near_planar(ctx, faces)) {
        ChartParam p = flatten_projection(cm);
        if (p.valid) {
            double d = chart_distortion(cm, p, ctx.degenerate_eps);
            if (d <= ctx.cfg.tau && no_overlap(cm, p)) {
                entry.param = std::move(p);
                entry.dist = d;
                entry.overlap_free = true;
                return entry;
            }
        }
    }

    if (!is_disk(ctx.mesh, faces)) {
        entry.dist = kInfDistortion;
        entry.overlap_free = false;
        return entry;
    }

    if (allow_surrogate && ctx.cfg.use_surrogate) {
        SimplifiedChart simp = simplify_boundary_locked(cm, ctx.cfg.simplify_error_threshold,
                                                        ctx.cfg.simplify_max_iters);
        ctx.surrogate_calls->fetch_add(1, std::memory_order_relaxed);
        ChartParam p = flatten_chart(simp.mesh, ctx.cfg.solver, ctx.cfg.abf_outer_iters,
                                     ctx.cfg.abf_grad_tol);
        entry.dist = chart_distortion(simp.mesh, p, ctx.degenerate_eps);
        entry.overlap_free = p.valid && no_overlap(simp.mesh, p);
        // param intentionally left empty: it belongs to the simplified mesh
        return entry;
    }

    ctx.full_calls->fetch_add(1, std::memory_order_relaxed);
    ChartParam p = flatten_chart(cm, ctx.cfg.solver, ctx.cfg.abf_outer_iters, ctx.cfg.abf_grad_tol);
    entry.dist = chart_distortion(cm, p, ctx.degenerate_eps);
    entry.overlap_free = p.valid && no_overlap(cm, p);
    entry.param = std::move(p);
    return entry;
}

void evaluate_set(const SearchContext& ctx, ChartSet& cs, bool allow_surrogate) {
    for (ChartEntry& c : cs.charts) {
        if (c.evaluated) continue;
        c = evaluate_chart(ctx, c.faces, allow_surrogate, false);
    }
    cs.refresh_dist();
}

SearchResult result_from_set(ChartSet&& cs, int part_id) {
    SearchResult r;
    r.charts = std::move(cs.charts);
    for (ChartEntry& c : r.charts)
        if (c.part_id < 0) c.part_id = part_id;
    r.dist = cs.dist;
    return r;
}

SearchResult part_tree_search(const SearchContext& ctx, int node, Budget budget, int disc_depth);

SearchResult search_children_parallel(const SearchContext& ctx, int node, Budget lb, Budget rb,
                                      int disc_depth) {
    const PartTree::Node& nd = ctx.tree->nodes[node];
    if (ctx.slots->try_acquire()) {
        auto fut = std::async(std::launch::async, [&]() {
            struct Releaser {
                ThreadSlots* s;
                ~Releaser() { s->release(); }
            } rel{ctx.slots};
            return part_tree_search(ctx, nd.left, lb, disc_depth);
        });
        SearchResult right = part_tree_search(ctx, nd.right, rb, disc_depth);
        SearchResult left = fut.get();
        return combine(std::move(left), std::move(right));
    }
    SearchResult left = part_tree_search(ctx, nd.left, lb, disc_depth);
    SearchResult right = part_tree_search(ctx, nd.right, rb, disc_depth);
    return combine(std::move(left), std::move(right));
}

SearchResult multicomponent_fallback(const SearchContext& ctx, int node,
                                     const std::vector<FaceSet>& comps) {
    // decompose each connected component independently on its induced subtree
    SearchResult acc;
    for (const FaceSet& comp : comps) {
        PartTree sub = ctx.tree->restrict_to(node, comp);
        SearchContext sctx = ctx.with_tree(&sub);
        SearchResult r = part_tree_search(sctx, sub.root, Budget::infinite(), 0);
        if (r.bottom) throw InternalError("multicomponent fallback returned bottom");
        acc = combine(std::move(acc), std::move(r));
    }
    return acc;
}

SearchResult part_tree_search(const SearchContext& ctx, int node, Budget budget, int disc_depth) {
    ctx.nodes_visited->fetch_add(1, std::memory_order_relaxed);
    ctx.check_deadline();

    if (budget.exhausted()) return SearchResult{.bottom = true};

    const PartTree::Node& nd = ctx.tree->nodes[node];
    FaceSet faces{ctx.tree->collect_faces(node)};

    std::vector<FaceSet> comps = connected_components(ctx.mesh, ctx.adj, faces);
    if (comps.size() > 1) {
        if (disc_depth >= ctx.cfg.max_multicomponent_depth || ctx.tree->is_leaf(node))
            return multicomponent_fallback(ctx, node, comps);
        return search_children_parallel(ctx, node, Budget::infinite(), Budget::infinite(),
                                        disc_depth + 1);
    }

    // Normal heuristic ladder, ascending k; the first fully admissible
    // candidate has the minimal count among them
    std::vector<ChartSet> ladder =
        gen_candidates_h1(ctx.mesh, ctx.adj, ctx.normal_features, faces, ctx.cfg.t);
    ChartSet best;
    bool have_best = false;
    bool any_dist_pass = false;
    for (ChartSet& cand : ladder) {
        evaluate_set(ctx, cand, true);
        if (cand.dist <= ctx.cfg.tau) any_dist_pass = true;
        if (cand.admissible(ctx.cfg.tau)) {
            best = std::move(cand);
            have_best = true;
            break;
        }
    }

    if (!any_dist_pass) {
        if (ctx.tree->is_leaf(node)) {
            // a single face is always emitted; the distortion bound treats it
            // as its own chart
            return result_from_set(std::move(ladder.front()), faces.min_face());
        }
        return search_children_parallel(ctx, node, Budget::infinite(), Budget::infinite(), 0);
    }

    if (ctx.cfg.use_merge) {
        ChartEvaluator ev = [&](const FaceSet& fs) { return evaluate_chart(ctx, fs, true, true); };
        std::optional<ChartSet> h2 = gen_candidate_h2(ctx.mesh, ctx.adj, ctx.geom, faces,
                                                      ctx.cfg.tau, ev, ctx.cfg.h2_component_cap);
        if (h2 && h2->admissible(ctx.cfg.tau)) {
            bool take = !have_best || h2->count() < best.count() ||
                        (h2->count() == best.count() && h2->dist < best.dist);
            if (take) {
                best = std::move(*h2);
                have_best = true;
            }
        }
    }

    if (!have_best) {
        // some candidate met the distortion bound but the admissible pool is
        // empty (overlaps); fall back to the tree split
        if (ctx.tree->is_leaf(node))
            return result_from_set(std::move(ladder.front()), faces.min_face());
        return search_children_parallel(ctx, node, Budget::infinite(), Budget::infinite(), 0);
    }

    if (ctx.cfg.use_recursion_refinement && !ctx.tree->is_leaf(node)) {
        Budget bprime = budget.min_with(best.count() - 1);
        SearchResult left = part_tree_search(ctx, nd.left, bprime.minus(1), 0);
        if (!left.bottom) {
            SearchResult right = part_tree_search(ctx, nd.right, bprime.minus(left.count()), 0);
            SearchResult comb = combine(std::move(left), std::move(right));
            if (!comb.bottom && comb.count() < best.count()) {
                bool valid = comb.dist <= ctx.cfg.tau;
                for (const ChartEntry& c : comb.charts)
                    if (!c.overlap_free && c.faces.size() > 1) valid = false;
                if (valid) {
                    SearchResult r;
                    r.charts = std::move(comb.charts);
                    r.dist = comb.dist;
                    return r;
                }
            }
        }
    }

    return result_from_set(std::move(best), faces.min_face());
}

void assert_partition(const Mesh& mesh, const std::vector<ChartEntry>& charts) {
    std::vector<char> seen(mesh.face_count(), 0);
    for (const ChartEntry& c : charts)
        for (int f : c.faces) {
            if (f < 0 || f >= mesh.face_count() || seen[f])
                throw InternalError("charts do not partition the mesh faces");
            seen[f] = 1;
        }
    for (char s : seen)
        if (!s) throw InternalError("charts do not cover the mesh faces");
}

}  // namespace

std::vector<ChartEntry> run_search(const Mesh& mesh, const FaceAdjacency& adj,
                                   const FaceGeometry& geom, const PartTree& tree,
                                   const Eigen::MatrixXd& unit_normal_features,
                                   const SearchConfig& cfg, SearchStats* stats) {
    std::atomic<long> nodes{0}, full{0}, surr{0};
    ThreadSlots slots(std::max(0, cfg.thread_budget - 1));
    double diag = mesh.bbox_diagonal();
    SearchContext ctx{mesh,
                      adj,
                      geom,
                      &tree,
                      unit_normal_features,
                      cfg,
                      kDegenerateAreaFactor * diag * diag,
                      {},
                      false,
                      &slots,
                      &nodes,
                      &full,
                      &surr};
    if (cfg.timeout_s > 0) {
        ctx.deadline = std::chrono::steady_clock::now() +
                       std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                           std::chrono::duration<double>(cfg.timeout_s));
        ctx.has_deadline = true;
    }

    SearchResult res = part_tree_search(ctx, tree.root, Budget::infinite(), 0);
    if (res.bottom) throw InternalError("root search returned bottom");

    // final pass: exact parameterization; charts that miss the bound are
    // re-searched on their induced subtree with the surrogate disabled
    SearchConfig exact_cfg = cfg;
    exact_cfg.use_surrogate = false;
    SearchContext repair_ctx{mesh,
                             adj,
                             geom,
                             &tree,
                             unit_normal_features,
                             exact_cfg,
                             ctx.degenerate_eps,
                             ctx.deadline,
                             ctx.has_deadline,
                             &slots,
                             &nodes,
                             &full,
                             &surr};

    std::vector<ChartEntry> charts = std::move(res.charts);
    for (int round = 0; round < 4; ++round) {
        bool all_ok = true;
        std::vector<ChartEntry> next;
        next.reserve(charts.size());
        for (ChartEntry& entry : charts) {
            ctx.check_deadline();
            ChartMesh cm = extract_chart(mesh, entry.faces);
            full.fetch_add(1, std::memory_order_relaxed);
            ChartParam p = flatten_chart(cm, cfg.solver, cfg.abf_outer_iters, cfg.abf_grad_tol);
            double d = chart_distortion(cm, p, ctx.degenerate_eps);
            bool overlap_ok = p.valid && no_overlap(cm, p);
            bool ok = p.valid && d <= cfg.tau + 1e-6 && overlap_ok;
            if (ok || entry.faces.size() == 1) {
                entry.param = std::move(p);
                entry.dist = d;
                entry.overlap_free = overlap_ok;
                entry.evaluated = true;
                next.push_back(std::move(entry));
                continue;
            }
            all_ok = false;
            PartTree sub = tree.restrict_to(tree.root, entry.faces);
            SearchContext sctx = repair_ctx.with_tree(&sub);
            SearchResult r = part_tree_search(sctx, sub.root, Budget::infinite(), 0);
            if (r.bottom) throw InternalError("repair search returned bottom");
            for (ChartEntry& c : r.charts) {
                if (c.part_id < 0) c.part_id = entry.faces.min_face();
                next.push_back(std::move(c));
            }
        }
        charts = std::move(next);
        if (all_ok) break;
    }

    std::sort(charts.begin(), charts.end(), [](const ChartEntry& a, const ChartEntry& b) {
        return a.faces.min_face() < b.faces.min_face();
    });
    assert_partition(mesh, charts);

    if (stats) {
        stats->nodes_visited = nodes.load();
        stats->full_flatten_calls = full.load();
        stats->surrogate_calls = surr.load();
    }
    return charts;
}

}  // namespace partatlas
