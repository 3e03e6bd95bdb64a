#include "partatlas/pipeline.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <exception>
#include <string>
#include <thread>

namespace {

int default_threads() {
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void add_common_flags(CLI::App* cmd, partatlas::UnwrapOptions& opts, std::string& solver,
                      std::string& features) {
    cmd->add_option("--tau", opts.search.tau, "Distortion threshold")->capture_default_str();
    cmd->add_option("--t", opts.search.t, "Normal-heuristic ladder size")->capture_default_str();
    cmd->add_option("--features", features,
                    "Per-face features: 'normals' or a PFF1/PFT1 feature file");
    cmd->add_option("--solver", solver, "Flattening solver: abf or lscm")
        ->check(CLI::IsMember({"abf", "lscm"}));
    cmd->add_option("--atlases", opts.n_atlases, "Number of UV atlases")->capture_default_str();
    cmd->add_option("--padding", opts.padding, "Padding between charts (UV units)")
        ->capture_default_str();
    cmd->add_option("--resolution", opts.resolution, "Atlas render resolution")
        ->capture_default_str();
    cmd->add_option("--threads", opts.search.thread_budget, "Search thread budget")
        ->envname("PARTATLAS_THREADS");
    cmd->add_flag("--no-merge", "Disable the Merge heuristic");
    cmd->add_flag("--no-recursion", "Disable the refinement recursion");
    cmd->add_flag("--no-surrogate", "Disable the simplification surrogate");
    cmd->add_option("--report", opts.report_json, "Write the metrics JSON to this path");
    cmd->add_flag("--render", opts.render, "Write atlas PNG images");
}

void finish_flags(CLI::App* cmd, partatlas::UnwrapOptions& opts, const std::string& solver,
                  const std::string& features) {
    opts.search.use_merge = cmd->count("--no-merge") == 0;
    opts.search.use_recursion_refinement = cmd->count("--no-recursion") == 0;
    opts.search.use_surrogate = cmd->count("--no-surrogate") == 0;
    opts.search.solver =
        solver == "lscm" ? partatlas::SolverKind::lscm : partatlas::SolverKind::abf;
    if (!features.empty() && features != "normals") opts.features_path = features;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"partatlas: part-aligned UV unwrapping and atlas packing"};
    app.require_subcommand(1);

    partatlas::UnwrapOptions uopts;
    uopts.search.thread_budget = default_threads();
    std::string u_input, u_solver = "abf", u_features = "normals";
    double u_timeout = 0.0;
    CLI::App* unwrap = app.add_subcommand("unwrap", "Unwrap one OBJ mesh");
    unwrap->add_option("input", u_input, "Input OBJ file")->required();
    unwrap->add_option("-o,--output", uopts.output_obj, "Output OBJ path");
    unwrap->add_option("--timeout", u_timeout, "Per-mesh timeout in seconds (0 = none)");
    add_common_flags(unwrap, uopts, u_solver, u_features);

    partatlas::BenchOptions bopts;
    bopts.base.search.thread_budget = default_threads();
    std::string b_dir, b_solver = "abf", b_features = "normals";
    CLI::App* benchcmd = app.add_subcommand("bench", "Unwrap every OBJ in a directory");
    benchcmd->add_option("directory", b_dir, "Directory of OBJ files")->required();
    benchcmd->add_option("--timeout", bopts.timeout_s, "Per-mesh timeout in seconds")
        ->capture_default_str();
    benchcmd->add_option("--jobs", bopts.jobs, "Meshes processed concurrently")
        ->capture_default_str();
    benchcmd->add_option("--csv", bopts.csv_path, "Write the per-mesh CSV to this path");
    add_common_flags(benchcmd, bopts.base, b_solver, b_features);

    CLI11_PARSE(app, argc, argv);

    try {
        if (unwrap->parsed()) {
            finish_flags(unwrap, uopts, u_solver, u_features);
            uopts.search.timeout_s = u_timeout;
            partatlas::RunReport rep = partatlas::unwrap_mesh(u_input, uopts);
            std::printf("%s: %d charts, area distortion %.4f, angular %.4f, seam %.3f, "
                        "efficiency %.3f, %.2fs\n",
                        rep.input.c_str(), rep.charts, rep.dist.set_distortion,
                        rep.dist.angular_metric, rep.dist.seam_length, rep.efficiency,
                        rep.times.total);
            return rep.success ? 0 : 2;
        }
        finish_flags(benchcmd, bopts.base, b_solver, b_features);
        bopts.json_path = bopts.base.report_json;
        bopts.base.report_json.clear();
        std::vector<std::string> files = partatlas::list_obj_files(b_dir);
        partatlas::BenchResult res = partatlas::bench(files, bopts);
        std::fputs(res.csv.c_str(), stdout);
        return 0;
    } catch (const partatlas::ParseError& e) {
        std::fprintf(stderr, "parse error: %s\n", e.what());
        return 1;
    } catch (const partatlas::InternalError& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
