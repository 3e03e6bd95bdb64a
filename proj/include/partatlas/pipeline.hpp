#pragma once

#include "partatlas/metrics.hpp"
#include "partatlas/pack.hpp"
#include "partatlas/search.hpp"

#include <string>
#include <vector>

#include "json.hpp"  // vendored nlohmann/json

namespace partatlas {

struct UnwrapOptions {
    SearchConfig search;
    std::string features_path;  // empty: face normals
    int n_atlases = 1;
    double padding = 2.0 / 1024;
    int resolution = 1024;
    bool render = false;
    std::string output_obj;   // empty: derive from the input path
    std::string report_json;  // empty: no report file
};

struct StageTimes {
    double load = 0, repair = 0, features = 0, tree = 0, search = 0, flatten = 0, pack = 0,
           total = 0;
};

struct RunReport {
    std::string input;
    bool success = false;
    std::string error;
    int vertices = 0;
    int faces = 0;
    LoadReport load;
    RepairReport repair;
    int charts = 0;
    DistortionReport dist;
    double efficiency = 0.0;
    int atlases = 1;
    StageTimes times;
    SearchStats stats;
    UnwrapOptions config;
    std::vector<double> per_chart_distortion;  // same as dist.per_chart_distortion
    std::vector<int> per_chart_faces;
    std::vector<int> per_chart_part;
    std::vector<int> per_chart_atlas;
};

/// Full in-memory result of one unwrap run.
struct UnwrapData {
    Mesh mesh;  // repaired
    FaceAdjacency adj;
    FaceGeometry geom;
    std::vector<ChartEntry> charts;
    std::vector<ChartMesh> chart_meshes;
    PackResult packed;
    std::vector<PackInput> pack_inputs;
    RunReport report;
};

/// repair -> features -> tree -> search -> exact re-flatten -> pack.
UnwrapData unwrap_mesh_data(Mesh input, const UnwrapOptions& opts);

/// load -> unwrap_mesh_data -> emit OBJ/PNG/JSON. Throws
/// ParseError/TimeoutError/InternalError.
RunReport unwrap_mesh(const std::string& input, const UnwrapOptions& opts);

nlohmann::json report_to_json(const RunReport& report, bool include_timing = true);

struct BenchOptions {
    UnwrapOptions base;
    int jobs = 1;
    double timeout_s = 300.0;
    std::string csv_path;
    std::string json_path;
};

struct BenchResult {
    std::vector<RunReport> rows;  // one per input, input order
    nlohmann::json summary;
    std::string csv;
};

/// Runs unwrap over a set of OBJ files; a per-mesh timeout marks that mesh
/// failed without aborting the batch.
BenchResult bench(const std::vector<std::string>& inputs, const BenchOptions& opts);

std::vector<std::string> list_obj_files(const std::string& directory);

}  // namespace partatlas
