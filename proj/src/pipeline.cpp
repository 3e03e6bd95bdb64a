#include "partatlas/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>
#include <thread>

namespace partatlas {

using json = nlohmann::json;

namespace {

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string derive_output(const std::string& input) {
    std::string stem = input;
    if (stem.size() > 4 && stem.substr(stem.size() - 4) == ".obj")
        stem = stem.substr(0, stem.size() - 4);
    return stem + "_unwrapped.obj";
}

double percentile(std::vector<double> v, double p) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    if (v.size() == 1) return v[0];
    double rank = p / 100.0 * (static_cast<double>(v.size()) - 1.0);
    size_t lo = static_cast<size_t>(rank);
    size_t hi = std::min(lo + 1, v.size() - 1);
    double frac = rank - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) { return percentile(std::move(v), 50.0); }

}  // namespace

UnwrapData unwrap_mesh_data(Mesh input, const UnwrapOptions& opts) {
    UnwrapData data;
    RunReport& rep = data.report;
    rep.config = opts;
    auto t_total = std::chrono::steady_clock::now();
    auto t0 = t_total;

    data.mesh = repair_non_manifold(input, &rep.repair);
    Mesh& mesh = data.mesh;
    rep.vertices = mesh.vertex_count();
    rep.faces = mesh.face_count();
    rep.times.repair = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    data.adj = FaceAdjacency::build(mesh);
    data.geom = face_geometry(mesh);
    const FaceAdjacency& adj = data.adj;
    const FaceGeometry& geom = data.geom;
    FaceFeatureField normal_field = features_from_normals(mesh, adj, geom, opts.search.s);
    FaceFeatureField tree_field;
    if (!opts.features_path.empty())
        tree_field = load_features(opts.features_path, mesh);
    else
        tree_field = normal_field;
    rep.times.features = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    PartTree tree = build_tree(mesh, adj, tree_field);
    rep.times.tree = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    data.charts = run_search(mesh, adj, geom, tree, normal_field.features, opts.search, &rep.stats);
    std::vector<ChartEntry>& charts = data.charts;
    rep.times.search = seconds_since(t0);
    rep.charts = static_cast<int>(charts.size());

    // exact metrics on solver UVs (scale-invariant, so pre-pack is fine)
    t0 = std::chrono::steady_clock::now();
    const double diag = mesh.bbox_diagonal();
    const double eps = kDegenerateAreaFactor * diag * diag;
    data.chart_meshes.reserve(charts.size());
    std::vector<DistortionTerms> terms;
    std::vector<AngularAccum> angular;
    for (ChartEntry& c : charts) {
        data.chart_meshes.push_back(extract_chart(mesh, c.faces));
        const ChartMesh& cm = data.chart_meshes.back();
        if (!c.param.valid) {
            rep.dist.per_chart_distortion.push_back(kInfDistortion);
            terms.push_back({});
            angular.push_back({});
            continue;
        }
        DistortionTerms t = distortion_terms(cm, c.param.uv, eps);
        rep.dist.per_chart_distortion.push_back(t.chart_value);
        rep.dist.flipped_faces += t.flipped;
        rep.dist.excluded_degenerate_faces += t.excluded_degenerate;
        angular.push_back(angular_accum(cm, c.param.uv, eps));
        terms.push_back(std::move(t));
    }
    rep.dist.set_distortion = set_distortion(rep.dist.per_chart_distortion);
    rep.dist.overall_area_distortion = overall_area_distortion(terms);
    rep.dist.angular_metric = angular_metric(angular);
    rep.times.flatten = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    data.pack_inputs.resize(charts.size());
    std::vector<PackInput>& pins = data.pack_inputs;
    for (size_t i = 0; i < charts.size(); ++i) {
        pins[i].mesh = &data.chart_meshes[i];
        pins[i].uv = charts[i].param.uv;
        double a3 = 0.0;
        for (int f : charts[i].faces) a3 += geom.area[f];
        pins[i].area3d = a3;
        pins[i].part_id = charts[i].part_id;
    }
    data.packed = pack(pins, opts.n_atlases, opts.padding);
    rep.atlases = static_cast<int>(data.packed.atlases.size());
    rep.efficiency = efficiency(data.packed, pins);
    double seam = 0.0;
    for (size_t i = 0; i < charts.size(); ++i)
        seam += chart_boundary_length(data.chart_meshes[i], data.packed.packed_uv[i]);
    rep.dist.seam_length = seam;
    rep.times.pack = seconds_since(t0);

    for (size_t i = 0; i < charts.size(); ++i) {
        rep.per_chart_faces.push_back(charts[i].faces.size());
        rep.per_chart_part.push_back(charts[i].part_id);
        rep.per_chart_atlas.push_back(data.packed.atlas_of[i]);
    }
    rep.per_chart_distortion = rep.dist.per_chart_distortion;

    rep.times.total = seconds_since(t_total);
    // tau is enforced by the search; a violation here is a defect guard
    rep.success = true;
    for (size_t i = 0; i < charts.size(); ++i) {
        if (charts[i].faces.size() > 1 &&
            !(rep.dist.per_chart_distortion[i] <= opts.search.tau + 1e-6))
            rep.success = false;
    }
    return data;
}

RunReport unwrap_mesh(const std::string& input, const UnwrapOptions& opts) {
    auto t0 = std::chrono::steady_clock::now();
    LoadReport load_rep;
    Mesh raw = load_obj(input, &load_rep);
    double load_time = seconds_since(t0);

    UnwrapData data = unwrap_mesh_data(std::move(raw), opts);
    RunReport rep = std::move(data.report);
    rep.input = input;
    rep.load = load_rep;
    rep.times.load = load_time;
    rep.times.total += load_time;

    std::string out_path = opts.output_obj.empty() ? derive_output(input) : opts.output_obj;
    if (!out_path.empty() && out_path != "-") {
        std::vector<ChartUVs> chart_uvs(data.charts.size());
        for (size_t i = 0; i < data.charts.size(); ++i) {
            const ChartMesh& cm = data.chart_meshes[i];
            ChartUVs& cu = chart_uvs[i];
            cu.atlas = data.packed.atlas_of[i];
            cu.faces.assign(data.charts[i].faces.begin(), data.charts[i].faces.end());
            cu.corner_uv.resize(cu.faces.size());
            for (size_t k = 0; k < cu.faces.size(); ++k) {
                const Face& local = cm.faces[k];  // same order as faces()
                for (int c = 0; c < 3; ++c)
                    cu.corner_uv[k][c] = data.packed.packed_uv[i].row(local[c]);
            }
        }
        save_obj(data.mesh, chart_uvs, rep.atlases, out_path);
    }

    if (opts.render) {
        std::vector<AtlasImage> images = render_atlases(data.packed, data.pack_inputs,
                                                        opts.resolution);
        std::string stem = out_path;
        if (stem.size() > 4 && stem.substr(stem.size() - 4) == ".obj")
            stem = stem.substr(0, stem.size() - 4);
        for (size_t a = 0; a < images.size(); ++a)
            write_png(stem + "_atlas" + std::to_string(a) + ".png", images[a]);
    }

    if (!opts.report_json.empty()) {
        std::ofstream f(opts.report_json);
        f << report_to_json(rep).dump(2) << "\n";
    }
    return rep;
}

json report_to_json(const RunReport& rep, bool include_timing) {
    json j;
    j["schema_version"] = 1;
    j["input"] = rep.input;
    j["success"] = rep.success;
    if (!rep.error.empty()) j["error"] = rep.error;
    j["vertices"] = rep.vertices;
    j["faces"] = rep.faces;
    j["charts"] = rep.charts;
    j["seam_length"] = rep.dist.seam_length;
    j["angular"] = rep.dist.angular_metric;
    j["area_distortion"] = rep.dist.set_distortion;
    j["overall_area_distortion"] = rep.dist.overall_area_distortion;
    j["efficiency"] = rep.efficiency;
    j["atlases"] = rep.atlases;
    j["flipped_faces"] = rep.dist.flipped_faces;
    j["excluded_degenerate_faces"] = rep.dist.excluded_degenerate_faces;
    j["load"] = {{"dropped_repeated_index", rep.load.dropped_repeated_index},
                 {"zero_area_faces", rep.load.zero_area_faces.size()}};
    j["repair"] = {{"split_edges", rep.repair.split_edges},
                   {"duplicated_vertices", rep.repair.duplicated_vertices},
                   {"bowtie_vertices", rep.repair.bowtie_vertices}};
    j["search"] = {{"nodes_visited", rep.stats.nodes_visited},
                   {"full_flatten_calls", rep.stats.full_flatten_calls},
                   {"surrogate_calls", rep.stats.surrogate_calls}};
    j["config"] = {{"tau", rep.config.search.tau},
                   {"t", rep.config.search.t},
                   {"s", rep.config.search.s},
                   {"solver", solver_name(rep.config.search.solver)},
                   {"use_merge", rep.config.search.use_merge},
                   {"use_recursion", rep.config.search.use_recursion_refinement},
                   {"use_surrogate", rep.config.search.use_surrogate},
                   {"features", rep.config.features_path.empty() ? std::string("normals")
                                                                 : rep.config.features_path},
                   {"atlases", rep.config.n_atlases},
                   {"padding", rep.config.padding},
                   {"threads", rep.config.search.thread_budget}};
    json per_chart = json::array();
    for (size_t i = 0; i < rep.per_chart_distortion.size(); ++i) {
        json c;
        double d = rep.per_chart_distortion[i];
        c["distortion"] = std::isfinite(d) ? json(d) : json("inf");
        c["faces"] = rep.per_chart_faces[i];
        c["part"] = rep.per_chart_part[i];
        c["atlas"] = rep.per_chart_atlas[i];
        per_chart.push_back(c);
    }
    j["per_chart"] = per_chart;
    if (include_timing) {
        j["time_s"] = rep.times.total;
        j["stage_times"] = {{"load", rep.times.load},     {"repair", rep.times.repair},
                            {"features", rep.times.features}, {"tree", rep.times.tree},
                            {"search", rep.times.search}, {"flatten", rep.times.flatten},
                            {"pack", rep.times.pack}};
    }
    return j;
}

std::vector<std::string> list_obj_files(const std::string& directory) {
    std::vector<std::string> files;
    for (const auto& entry : std::filesystem::directory_iterator(directory)) {
        if (!entry.is_regular_file()) continue;
        std::string p = entry.path().string();
        if (p.size() > 4 && p.substr(p.size() - 4) == ".obj" &&
            p.find("_unwrapped") == std::string::npos)
            files.push_back(p);
    }
    std::sort(files.begin(), files.end());
    return files;
}

BenchResult bench(const std::vector<std::string>& inputs, const BenchOptions& opts) {
    if (inputs.empty()) throw std::invalid_argument("bench: no OBJ files");
    BenchResult result;
    result.rows.resize(inputs.size());

    auto run_one = [&](size_t i) {
        UnwrapOptions o = opts.base;
        o.search.timeout_s = opts.timeout_s;
        try {
            result.rows[i] = unwrap_mesh(inputs[i], o);
        } catch (const std::exception& e) {
            RunReport r;
            r.input = inputs[i];
            r.success = false;
            r.error = e.what();
            r.config = o;
            result.rows[i] = std::move(r);
        }
    };

    if (opts.jobs <= 1) {
        for (size_t i = 0; i < inputs.size(); ++i) run_one(i);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> workers;
        int nw = std::min<int>(opts.jobs, static_cast<int>(inputs.size()));
        for (int w = 0; w < nw; ++w)
            workers.emplace_back([&]() {
                for (size_t i = next.fetch_add(1); i < inputs.size(); i = next.fetch_add(1))
                    run_one(i);
            });
        for (std::thread& t : workers) t.join();
    }

    // aggregates over successful rows
    std::vector<double> charts, seams, angulars, areas, overalls, effs, times;
    std::vector<double> p95_chart_means;
    int ok = 0;
    for (const RunReport& r : result.rows) {
        if (!r.success) continue;
        ++ok;
        charts.push_back(r.charts);
        seams.push_back(r.dist.seam_length);
        angulars.push_back(r.dist.angular_metric);
        areas.push_back(r.dist.set_distortion);
        overalls.push_back(r.dist.overall_area_distortion);
        effs.push_back(r.efficiency);
        times.push_back(r.times.total);
        std::vector<double> finite;
        for (double d : r.per_chart_distortion)
            if (std::isfinite(d)) finite.push_back(d);
        p95_chart_means.push_back(percentile(finite, 95.0));
    }

    json s;
    s["meshes"] = inputs.size();
    s["success_rate"] = inputs.empty() ? 0.0 : static_cast<double>(ok) / inputs.size();
    s["mean_charts"] = mean_of(charts);
    s["median_charts"] = median_of(charts);
    s["median_seam_length"] = median_of(seams);
    s["mean_angular"] = mean_of(angulars);
    s["mean_area_distortion"] = mean_of(areas);
    s["mean_overall_area_distortion"] = mean_of(overalls);
    s["mean_efficiency"] = mean_of(effs);
    s["mean_time_s"] = mean_of(times);
    s["distortion_95th_shape"] = percentile(areas, 95.0);
    s["distortion_95th_chart"] = mean_of(p95_chart_means);
    json rows = json::array();
    for (const RunReport& r : result.rows) rows.push_back(report_to_json(r));
    s["rows"] = rows;
    result.summary = s;

    std::ostringstream csv;
    csv << "mesh,success,charts,seam_length,angular,area_distortion,overall_area_distortion,"
           "efficiency,time_s\n";
    csv.precision(12);
    for (const RunReport& r : result.rows) {
        csv << std::filesystem::path(r.input).filename().string() << ',' << (r.success ? 1 : 0)
            << ',' << r.charts << ',' << r.dist.seam_length << ',' << r.dist.angular_metric << ','
            << r.dist.set_distortion << ',' << r.dist.overall_area_distortion << ','
            << r.efficiency << ',' << r.times.total << "\n";
    }
    csv << "aggregate," << s["success_rate"].get<double>() << ',' << s["mean_charts"].get<double>()
        << ',' << s["median_seam_length"].get<double>() << ',' << s["mean_angular"].get<double>()
        << ',' << s["mean_area_distortion"].get<double>() << ','
        << s["mean_overall_area_distortion"].get<double>() << ','
        << s["mean_efficiency"].get<double>() << ',' << s["mean_time_s"].get<double>() << "\n";
    result.csv = csv.str();

    if (!opts.csv_path.empty()) {
        std::ofstream f(opts.csv_path);
        f << result.csv;
    }
    if (!opts.json_path.empty()) {
        std::ofstream f(opts.json_path);
        f << result.summary.dump(2) << "\n";
    }
    return result;
}

}  // namespace partatlas
