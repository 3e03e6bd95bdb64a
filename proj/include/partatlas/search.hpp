#pragma once

#include "partatlas/heuristics.hpp"
#include "partatlas/mesh.hpp"
#include "partatlas/part_tree.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <stdexcept>

namespace partatlas {

struct TimeoutError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InternalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Chart budget with an infinity sentinel (inf - k = inf).
struct Budget {
    static constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max();
    std::int64_t value = kInf;

    static Budget infinite() { return {kInf}; }
    static Budget finite(std::int64_t v) { return {v}; }
    bool is_inf() const { return value == kInf; }
    bool exhausted() const { return value < 1; }
    Budget minus(std::int64_t k) const { return is_inf() ? *this : Budget{value - k}; }
    Budget min_with(std::int64_t v) const { return Budget{std::min(value, v)}; }
};

struct SearchConfig {
    double tau = 1.25;
    int t = 10;
    int s = 10;  // feature samples per face (interface parity)
    bool use_merge = true;
    bool use_recursion_refinement = true;
    bool use_surrogate = true;
    SolverKind solver = SolverKind::abf;
    int max_multicomponent_depth = 8;
    int thread_budget = 1;

    int abf_outer_iters = 5;
    double abf_grad_tol = 1e-5;
    double simplify_error_threshold = 1e-4;
    int simplify_max_iters = 1000;
    int h2_component_cap = 500;
    double timeout_s = 0.0;  // 0 disables the deadline
};

struct SearchStats {
    long nodes_visited = 0;
    long full_flatten_calls = 0;  // solver calls on unsimplified charts
    long surrogate_calls = 0;     // solver calls on simplified charts
};

struct SearchResult {
    bool bottom = false;
    std::vector<ChartEntry> charts;
    double dist = 0.0;

    int count() const { return static_cast<int>(charts.size()); }
};

/// bottom if either side is; otherwise concatenated charts with max distortion.
SearchResult combine(SearchResult left, SearchResult right);

/// Runs the part-tree search from the root with an infinite budget, then
/// re-parameterizes every accepted chart at full resolution, re-searching any
/// chart whose exact distortion exceeds tau with the surrogate disabled.
/// The returned charts partition the mesh face set.
std::vector<ChartEntry> run_search(const Mesh& mesh, const FaceAdjacency& adj,
                                   const FaceGeometry& geom, const PartTree& tree,
                                   const Eigen::MatrixXd& unit_normal_features,
                                   const SearchConfig& cfg, SearchStats* stats = nullptr);

}  // namespace partatlas
