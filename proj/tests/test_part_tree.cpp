#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "partatlas/part_tree.hpp"
#include "support/shapes.hpp"

#include <fstream>
#include <set>
#include <sstream>

using namespace partatlas;

namespace {

struct Built {
    Mesh mesh;
    FaceAdjacency adj;
    FaceGeometry geom;
    FaceFeatureField field;
    PartTree tree;
};

Built build(Mesh m) {
    Built b;
    b.mesh = std::move(m);
    b.adj = FaceAdjacency::build(b.mesh);
    b.geom = face_geometry(b.mesh);
    b.field = features_from_normals(b.mesh, b.adj, b.geom);
    b.tree = build_tree(b.mesh, b.adj, b.field);
    return b;
}

std::string serialize(const PartTree& t) {
    std::ostringstream os;
    os.precision(17);
    os << t.root << ';';
    for (const PartTree::Node& n : t.nodes)
        os << n.left << ',' << n.right << ',' << n.face << ',' << n.merge_height << ';';
    return os.str();
}

}  // namespace

TEST_CASE("features_from_normals on cube: 6 distinct values") {
    Built b = build(shapes::cube());
    CHECK(b.field.dim() == 3);
    std::set<std::array<double, 3>> distinct;
    for (int f = 0; f < b.field.count(); ++f)
        distinct.insert({b.field.features(f, 0), b.field.features(f, 1), b.field.features(f, 2)});
    CHECK(distinct.size() == 6);
}

TEST_CASE("features_from_normals flat plane all (0,0,1)") {
    Built b = build(shapes::flat_grid(5, 5));
    for (int f = 0; f < b.field.count(); ++f) {
        CHECK(b.field.features(f, 0) == doctest::Approx(0.0));
        CHECK(b.field.features(f, 1) == doctest::Approx(0.0));
        CHECK(b.field.features(f, 2) == doctest::Approx(1.0));
    }
}

TEST_CASE("degenerate face inherits lowest-index edge-neighbor feature") {
    // face 0: collinear sliver; face 1: +z triangle sharing edge 0-1
    Mesh m;
    m.positions = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0), Vec3(0.5, 1, 0)};
    m.faces = {Face(0, 1, 2), Face(0, 1, 3)};
    FaceAdjacency adj = FaceAdjacency::build(m);
    FaceGeometry geom = face_geometry(m);
    REQUIRE(geom.degenerate[0]);
    REQUIRE(!geom.degenerate[1]);
    FaceFeatureField f = features_from_normals(m, adj, geom);
    CHECK(std::abs(f.features(0, 2)) == doctest::Approx(1.0));

    // isolated degenerate face falls back to (1,0,0)
    Mesh iso;
    iso.positions = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)};
    iso.faces = {Face(0, 1, 2)};
    FaceAdjacency iadj = FaceAdjacency::build(iso);
    FaceGeometry igeom = face_geometry(iso);
    FaceFeatureField fi = features_from_normals(iso, iadj, igeom);
    CHECK(fi.features(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("load_features binary PFF1") {
    Mesh m = shapes::flat_grid(2, 1);  // 4 faces
    std::string path = "/tmp/partatlas_feat.pff";
    {
        std::ofstream f(path, std::ios::binary);
        f.write("PFF1", 4);
        std::uint32_t count = 4, dim = 5;
        f.write(reinterpret_cast<char*>(&count), 4);
        f.write(reinterpret_cast<char*>(&dim), 4);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 5; ++j) {
                float v = (j == i % 5) ? 3.0f : (j == (i + 1) % 5 ? 4.0f : 0.0f);
                f.write(reinterpret_cast<char*>(&v), 4);
            }
    }
    FaceFeatureField field = load_features(path, m);
    CHECK(field.dim() == 5);
    CHECK(field.count() == 4);
    // (3,4,0..) normalizes to (0.6,0.8,0..)
    CHECK(field.features(0, 0) == doctest::Approx(0.6));
    CHECK(field.features(0, 1) == doctest::Approx(0.8));
    for (int i = 0; i < 4; ++i)
        CHECK(field.features.row(i).norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("load_features errors") {
    Mesh m = shapes::flat_grid(2, 1);  // 4 faces
    {
        std::ofstream f("/tmp/partatlas_feat_short.pff", std::ios::binary);
        f.write("PFF1", 4);
        std::uint32_t count = 3, dim = 2;
        f.write(reinterpret_cast<char*>(&count), 4);
        f.write(reinterpret_cast<char*>(&dim), 4);
        float v = 1.0f;
        for (int i = 0; i < 6; ++i) f.write(reinterpret_cast<char*>(&v), 4);
    }
    CHECK_THROWS_AS(load_features("/tmp/partatlas_feat_short.pff", m), ParseError);

    {
        std::ofstream f("/tmp/partatlas_feat_dim.pft");
        f << "PFT1\n";
        f << "1 0\n0 1\n1\n1 1\n";
    }
    CHECK_THROWS_AS(load_features("/tmp/partatlas_feat_dim.pft", m), ParseError);

    CHECK_THROWS_AS(load_features("/nonexistent.pff", m), ParseError);
}

TEST_CASE("load_features text PFT1") {
    Mesh m = shapes::flat_grid(2, 1);
    {
        std::ofstream f("/tmp/partatlas_feat.pft");
        f << "PFT1\n";
        for (int i = 0; i < 4; ++i) f << (i + 1) << " 0 0\n";
    }
    FaceFeatureField field = load_features("/tmp/partatlas_feat.pft", m);
    CHECK(field.dim() == 3);
    for (int i = 0; i < 4; ++i) CHECK(field.features(i, 0) == doctest::Approx(1.0));
}

TEST_CASE("build_tree 2-face mesh: 3 nodes") {
    Built b = build(shapes::flat_grid(1, 1));
    CHECK(b.tree.nodes.size() == 3);
    CHECK(b.tree.root == 2);
    CHECK(b.tree.nodes[2].count == 2);
}

TEST_CASE("build_tree node count is 2F-1 and children partition parents") {
    for (Mesh m : {shapes::cube(), shapes::uv_sphere(6, 8), shapes::two_component_scene()}) {
        Built b = build(std::move(m));
        const int nf = b.mesh.face_count();
        REQUIRE(static_cast<int>(b.tree.nodes.size()) == 2 * nf - 1);
        for (int n = 0; n < static_cast<int>(b.tree.nodes.size()); ++n) {
            if (b.tree.is_leaf(n)) continue;
            auto faces = b.tree.collect_faces(n);
            auto lf = b.tree.collect_faces(b.tree.nodes[n].left);
            auto rf = b.tree.collect_faces(b.tree.nodes[n].right);
            std::vector<int> merged;
            std::merge(lf.begin(), lf.end(), rf.begin(), rf.end(), std::back_inserter(merged));
            CHECK(merged == faces);  // disjoint union, both sorted
            CHECK(b.tree.nodes[n].count == static_cast<int>(faces.size()));
        }
        auto all = b.tree.collect_faces(b.tree.root);
        CHECK(static_cast<int>(all.size()) == nf);
    }
}

TEST_CASE("cube: within-side merges happen before cross-side merges") {
    Built b = build(shapes::cube());
    const int nf = 12;
    for (int i = 0; i < 6; ++i) {
        const PartTree::Node& n = b.tree.nodes[nf + i];
        CHECK(n.merge_height == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(n.count == 2);
    }
    // the next merge joins two different sides (orthogonal normals, height 1)
    CHECK(b.tree.nodes[nf + 6].merge_height == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("disconnected mesh merges in the fallback phase") {
    Built b = build(shapes::two_component_scene());
    auto rootfaces = b.tree.collect_faces(b.tree.root);
    CHECK(static_cast<int>(rootfaces.size()) == b.mesh.face_count());
    // the root joins the two components
    auto lf = b.tree.collect_faces(b.tree.nodes[b.tree.root].left);
    auto rf = b.tree.collect_faces(b.tree.nodes[b.tree.root].right);
    CHECK(lf.size() + rf.size() == rootfaces.size());
    CHECK((lf.size() == 72 || rf.size() == 72));  // the 6x6 grid component
}

TEST_CASE("every tree node face set is edge-connected on connected meshes (property)") {
    for (Mesh m : {shapes::cube(), shapes::uv_sphere(8, 12), shapes::jittered_patch(7, 7, 11)}) {
        Built b = build(std::move(m));
        for (int n = 0; n < static_cast<int>(b.tree.nodes.size()); ++n) {
            FaceSet fs{b.tree.collect_faces(n)};
            auto comps = connected_components(b.mesh, b.adj, fs);
            REQUIRE(comps.size() == 1);
        }
    }
}

TEST_CASE("determinism: identical input gives byte-identical trees") {
    Built a = build(shapes::bumpy_sphere(10, 14));
    Built b = build(shapes::bumpy_sphere(10, 14));
    CHECK(serialize(a.tree) == serialize(b.tree));
}

TEST_CASE("clusters_at produces nested refinements") {
    Built b = build(shapes::cube());
    std::vector<MergeStep> steps = agglomerate(b.field.features, b.adj.face_neighbors);
    const int n = b.mesh.face_count();
    for (int k = 2; k <= 6; ++k) {
        auto coarse = clusters_at(n, steps, k - 1);
        auto fine = clusters_at(n, steps, k);
        for (const auto& fc : fine) {
            int containers = 0;
            for (const auto& cc : coarse)
                if (std::includes(cc.begin(), cc.end(), fc.begin(), fc.end())) ++containers;
            CHECK(containers == 1);
        }
    }
}

TEST_CASE("restrict_to keeps only the requested faces") {
    Built b = build(shapes::uv_sphere(8, 12));
    auto all = b.tree.collect_faces(b.tree.root);
    std::vector<int> half(all.begin(), all.begin() + all.size() / 2);
    FaceSet sub(half);
    PartTree r = b.tree.restrict_to(b.tree.root, sub);
    REQUIRE(r.root >= 0);
    auto rf = r.collect_faces(r.root);
    CHECK(rf == sub.faces());
    for (int n = 0; n < static_cast<int>(r.nodes.size()); ++n) {
        if (r.is_leaf(n)) {
            CHECK(r.nodes[n].count == 1);
        } else {
            CHECK(r.nodes[n].left >= 0);
            CHECK(r.nodes[n].right >= 0);
            CHECK(r.nodes[n].count ==
                  r.nodes[r.nodes[n].left].count + r.nodes[r.nodes[n].right].count);
        }
    }
}
