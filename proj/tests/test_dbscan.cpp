#include <catch2/catch_amalgamated.hpp>

#include <numeric>
#include <vector>

#include "azil/dbscan.hpp"
#include "azil/rng.hpp"

using namespace azil;

namespace {

// brute-force union-find over core points, the independent clustering oracle
struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

double dist2(const SphericalDirection& a, const SphericalDirection& b) {
    double da = a.azimuth_deg - b.azimuth_deg;
    double de = a.elevation_deg - b.elevation_deg;
    return da * da + de * de;
}

}  // namespace

TEST_CASE("two tight gaze clusters plus stray glances") {
    std::vector<SphericalDirection> pts;
    Rng rng(41);
    for (int i = 0; i < 15; ++i)
        pts.push_back({-45.0 + rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)});
    for (int i = 0; i < 15; ++i)
        pts.push_back({30.0 + rng.uniform(-2.0, 2.0), -10.0 + rng.uniform(-2.0, 2.0)});
    pts.push_back({120.0, 0.0});
    pts.push_back({-120.0, 40.0});
    pts.push_back({0.0, 80.0});

    auto res = dbscan(pts, {8.0, 10});
    REQUIRE(res.n_clusters() == 2);
    for (int i = 0; i < 30; ++i) REQUIRE(res.labels[i] >= 0);
    for (int i = 30; i < 33; ++i) REQUIRE(res.labels[i] == -1);

    // centroids near the generating centers, in either order
    double a = res.centroids[0].azimuth_deg, b = res.centroids[1].azimuth_deg;
    if (a > b) std::swap(a, b);
    REQUIRE(a == Catch::Approx(-45.0).margin(2.0));
    REQUIRE(b == Catch::Approx(30.0).margin(2.0));
}

TEST_CASE("labels satisfy density-reachability invariants") {
    Rng rng(43);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<SphericalDirection> pts;
        int blobs = 1 + static_cast<int>(rng.below(4));
        for (int c = 0; c < blobs; ++c) {
            double cx = rng.uniform(-90.0, 90.0), cy = rng.uniform(-40.0, 40.0);
            int m = 5 + static_cast<int>(rng.below(20));
            for (int i = 0; i < m; ++i)
                pts.push_back({cx + 3.0 * rng.normal(), cy + 3.0 * rng.normal()});
        }
        for (int i = 0; i < 10; ++i)
            pts.push_back({rng.uniform(-170.0, 170.0), rng.uniform(-80.0, 80.0)});

        DbscanParams p{6.0, 6};
        auto res = dbscan(pts, p);
        size_t n = pts.size();
        double eps2 = p.eps * p.eps;

        std::vector<bool> core(n, false);
        for (size_t i = 0; i < n; ++i) {
            int cnt = 0;
            for (size_t j = 0; j < n; ++j)
                if (dist2(pts[i], pts[j]) <= eps2) ++cnt;
            core[i] = cnt >= p.min_pts;
        }

        UnionFind uf(n);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = i + 1; j < n; ++j)
                if (core[i] && core[j] && dist2(pts[i], pts[j]) <= eps2)
                    uf.unite(static_cast<int>(i), static_cast<int>(j));

        // each core component maps to exactly one cluster id and vice versa
        std::vector<int> comp_label;
        std::vector<int> comp_root;
        for (size_t i = 0; i < n; ++i) {
            if (!core[i]) continue;
            REQUIRE(res.labels[i] >= 0);
            int root = uf.find(static_cast<int>(i));
            bool seen = false;
            for (size_t k = 0; k < comp_root.size(); ++k)
                if (comp_root[k] == root) {
                    REQUIRE(comp_label[k] == res.labels[i]);
                    seen = true;
                }
            if (!seen) {
                comp_root.push_back(root);
                comp_label.push_back(res.labels[i]);
            }
        }
        REQUIRE(static_cast<int>(comp_root.size()) == res.n_clusters());

        for (size_t i = 0; i < n; ++i) {
            if (core[i]) continue;
            bool near_core_same = false, near_core_any = false;
            for (size_t j = 0; j < n; ++j) {
                if (!core[j] || dist2(pts[i], pts[j]) > eps2) continue;
                near_core_any = true;
                if (res.labels[j] == res.labels[i]) near_core_same = true;
            }
            if (!near_core_any)
                REQUIRE(res.labels[i] == -1);  // unreachable -> noise
            else {
                REQUIRE(res.labels[i] >= 0);  // border point
                REQUIRE(near_core_same);
            }
        }
    }
}

TEST_CASE("dbscan is deterministic and validates parameters") {
    std::vector<SphericalDirection> pts;
    Rng rng(47);
    for (int i = 0; i < 40; ++i)
        pts.push_back({rng.uniform(-60.0, 60.0), rng.uniform(-20.0, 20.0)});
    auto a = dbscan(pts, {10.0, 5});
    auto b = dbscan(pts, {10.0, 5});
    REQUIRE(a.labels == b.labels);

    REQUIRE_THROWS_AS(dbscan(pts, {0.0, 5}), std::invalid_argument);
    REQUIRE_THROWS_AS(dbscan(pts, {5.0, 0}), std::invalid_argument);
    REQUIRE(dbscan({}, {8.0, 10}).n_clusters() == 0);
}

TEST_CASE("min_pts from a dwell-time threshold") {
    REQUIRE(DbscanParams::min_pts_for_threshold(2.0, 5.0) == 10);
    REQUIRE(DbscanParams::min_pts_for_threshold(8.0, 5.0) == 40);
    REQUIRE(DbscanParams::min_pts_for_threshold(0.5, 5.0) == 3);  // rounds 2.5 up
}

TEST_CASE("rule localization maps dwell clusters to zones") {
    auto cfg = BinConfig::six_zone();
    std::vector<SphericalDirection> orient;
    std::vector<uint8_t> self_vad;

    // 60 listening frames at az -45 (zone 1), 40 at az +45 (zone 4),
    // 30 self-speaking frames parked at az +90 that must be ignored
    Rng rng(53);
    for (int i = 0; i < 60; ++i) {
        orient.push_back({-45.0 + rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)});
        self_vad.push_back(0);
    }
    for (int i = 0; i < 40; ++i) {
        orient.push_back({45.0 + rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)});
        self_vad.push_back(0);
    }
    for (int i = 0; i < 30; ++i) {
        orient.push_back({90.0, 0.0});
        self_vad.push_back(1);
    }

    DbscanParams p{8.0, 10};
    REQUIRE(rule_localize(orient, self_vad, cfg, p).to_string() == "010010");
    REQUIRE(rule_count(orient, self_vad, p) == 2);

    std::vector<uint8_t> short_vad(10, 0);
    REQUIRE_THROWS_AS(rule_localize(orient, short_vad, cfg, p), std::invalid_argument);
}

TEST_CASE("rule count clamps at four partners") {
    std::vector<SphericalDirection> orient;
    std::vector<uint8_t> self_vad;
    Rng rng(59);
    for (int c = 0; c < 6; ++c) {
        double cx = -90.0 + 35.0 * c;
        for (int i = 0; i < 12; ++i) {
            orient.push_back({cx + rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)});
            self_vad.push_back(0);
        }
    }
    REQUIRE(rule_count(orient, self_vad, {8.0, 10}) == 4);
}
