// Density-based clustering of head-orientation samples and the rule-based
// localization / partner-counting baselines built on it.

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "azil/geom.hpp"
#include "azil/targets.hpp"

namespace azil {

struct DbscanParams {
    double eps = 8.0;  // neighborhood radius in (az, el) degree space
    int min_pts = 10;

    /// min_pts implied by a cumulative-time threshold at a given frame rate
    /// (2 s at 5 Hz -> 10).
    static int min_pts_for_threshold(double threshold_s, double frame_rate_hz) {
        return static_cast<int>(std::lround(threshold_s * frame_rate_hz));
    }
};

struct ClusterResult {
    std::vector<int> labels;  // per point; -1 = noise, clusters numbered from 0
    std::vector<SphericalDirection> centroids;  // arithmetic mean (az, el) per cluster

    int n_clusters() const { return static_cast<int>(centroids.size()); }
};

namespace detail {
inline double sq_dist(const SphericalDirection& a, const SphericalDirection& b) {
    double da = a.azimuth_deg - b.azimuth_deg;
    double de = a.elevation_deg - b.elevation_deg;
    return da * da + de * de;
}
}  // namespace detail

/// Standard DBSCAN over (azimuth, elevation) points with the Euclidean
/// metric in degrees. A point with >= min_pts neighbors (itself included)
/// is a core point; border points join the first cluster that reaches them
/// in scan order.
inline ClusterResult dbscan(const std::vector<SphericalDirection>& points,
                            const DbscanParams& params) {
    if (params.eps <= 0.0 || params.min_pts < 1)
        throw std::invalid_argument("dbscan requires eps > 0 and min_pts >= 1");
    const size_t n = points.size();
    const double eps2 = params.eps * params.eps;

    auto neighbors = [&](size_t i) {
        std::vector<size_t> out;
        for (size_t j = 0; j < n; ++j)
            if (detail::sq_dist(points[i], points[j]) <= eps2) out.push_back(j);
        return out;
    };

    ClusterResult res;
    res.labels.assign(n, -2);  // -2 = unvisited, -1 = noise
    int cluster = 0;
    for (size_t i = 0; i < n; ++i) {
        if (res.labels[i] != -2) continue;
        auto seeds = neighbors(i);
        if (static_cast<int>(seeds.size()) < params.min_pts) {
            res.labels[i] = -1;
            continue;
        }
        res.labels[i] = cluster;
        for (size_t k = 0; k < seeds.size(); ++k) {
            size_t j = seeds[k];
            if (res.labels[j] == -1) res.labels[j] = cluster;  // border point
            if (res.labels[j] != -2) continue;
            res.labels[j] = cluster;
            auto nb = neighbors(j);
            if (static_cast<int>(nb.size()) >= params.min_pts)
                seeds.insert(seeds.end(), nb.begin(), nb.end());
        }
        ++cluster;
    }

    res.centroids.assign(cluster, {});
    std::vector<int> counts(cluster, 0);
    for (size_t i = 0; i < n; ++i) {
        int c = res.labels[i];
        if (c < 0) continue;
        res.centroids[c].azimuth_deg += points[i].azimuth_deg;
        res.centroids[c].elevation_deg += points[i].elevation_deg;
        ++counts[c];
    }
    for (int c = 0; c < cluster; ++c) {
        res.centroids[c].azimuth_deg /= counts[c];
        res.centroids[c].elevation_deg /= counts[c];
    }
    return res;
}

/// Cluster the focal user's head orientation over the listening-state frames
/// of a segment and return the result; shared by both rule baselines.
inline ClusterResult cluster_listening_frames(
    const std::vector<SphericalDirection>& orientation,
    const std::vector<uint8_t>& self_vad, const DbscanParams& params) {
    if (orientation.size() != self_vad.size())
        throw std::invalid_argument("orientation and self_vad must be aligned");
    std::vector<SphericalDirection> listening;
    for (size_t i = 0; i < orientation.size(); ++i)
        if (!self_vad[i]) listening.push_back(orientation[i]);
    return dbscan(listening, params);
}

/// Rule-based localization: map each listening-state cluster centroid's
/// azimuth through the zone discretization and OR the results.
inline ZoneLabel rule_localize(const std::vector<SphericalDirection>& orientation,
                               const std::vector<uint8_t>& self_vad,
                               const BinConfig& config, const DbscanParams& params) {
    auto clusters = cluster_listening_frames(orientation, self_vad, params);
    ZoneLabel z;
    z.bits.assign(config.n_bins(), 0);
    for (const auto& c : clusters.centroids) {
        auto v = bin_vector(c.azimuth_deg, config);
        for (size_t i = 0; i < z.bits.size(); ++i) z.bits[i] |= v.bits[i];
    }
    return z;
}

/// Rule-based partner counting: number of naturally formed clusters,
/// clamped to the 0..4 class range.
inline int rule_count(const std::vector<SphericalDirection>& orientation,
                      const std::vector<uint8_t>& self_vad, const DbscanParams& params) {
    auto clusters = cluster_listening_frames(orientation, self_vad, params);
    return std::min(clusters.n_clusters(), 4);
}

}  // namespace azil
