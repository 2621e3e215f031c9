// Ground-truth construction for the localization and counting tasks:
// azimuthal zone discretization, per-speaker bin vectors, the OR-combined
// zone label, cumulative voice-activity target shaping, and class weights.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "azil/geom.hpp"

namespace azil {

/// Azimuthal zone discretization: n_bins half-open intervals [l_i, r_i)
/// over monotone edges, the last bin closed on the right.
struct BinConfig {
    std::vector<double> edges;  // n_bins + 1 strictly increasing degrees

    static BinConfig six_zone() { return BinConfig{{-100, -60, -30, 0, 30, 60, 100}}; }
    static BinConfig three_zone() { return BinConfig{{-100, -30, 30, 100}}; }
    static BinConfig eight_zone() {
        return BinConfig{{-100, -75, -50, -25, 0, 25, 50, 75, 100}};
    }

    int n_bins() const { return static_cast<int>(edges.size()) - 1; }

    void validate() const {
        if (edges.size() < 2) throw std::invalid_argument("bin config needs >= 2 edges");
        for (size_t i = 1; i < edges.size(); ++i)
            if (!(edges[i] > edges[i - 1]))
                throw std::invalid_argument("bin edges must be strictly increasing");
    }

    /// Center azimuth of bin i.
    double center(int i) const { return 0.5 * (edges[i] + edges[i + 1]); }
};

/// One-hot bin membership of a single speaker's median azimuth.
struct BinVector {
    std::vector<uint8_t> bits;

    int popcount() const {
        int c = 0;
        for (auto b : bits) c += b ? 1 : 0;
        return c;
    }

    std::string to_string() const {
        std::string s;
        for (auto b : bits) s += b ? '1' : '0';
        return s;
    }

    bool operator==(const BinVector& o) const { return bits == o.bits; }
};

using ZoneLabel = BinVector;

/// Element-wise median of azimuth values over a segment (lower median for
/// even counts, so the result is always an observed value).
inline double median_azimuth(const std::vector<SphericalDirection>& positions) {
    if (positions.empty()) throw std::invalid_argument("median of empty sequence");
    std::vector<double> az;
    az.reserve(positions.size());
    for (const auto& p : positions) az.push_back(p.azimuth_deg);
    size_t k = (az.size() - 1) / 2;
    std::nth_element(az.begin(), az.begin() + k, az.end());
    return az[k];
}

/// Bin membership for one azimuth. Intervals are [l, r) with the last bin
/// closed; azimuths outside the field map to the all-zero vector.
inline BinVector bin_vector(double theta_deg, const BinConfig& config) {
    config.validate();
    if (!std::isfinite(theta_deg)) throw std::invalid_argument("non-finite azimuth");
    int n = config.n_bins();
    BinVector v;
    v.bits.assign(n, 0);
    for (int i = 0; i < n; ++i) {
        bool last = (i == n - 1);
        if (theta_deg >= config.edges[i] &&
            (last ? theta_deg <= config.edges[i + 1] : theta_deg < config.edges[i + 1])) {
            v.bits[i] = 1;
            break;
        }
    }
    return v;
}

/// OR of all speakers' bin vectors.
inline ZoneLabel zone_label(const std::vector<BinVector>& per_speaker) {
    if (per_speaker.empty()) throw std::invalid_argument("zone_label with no speakers");
    ZoneLabel z = per_speaker.front();
    for (size_t s = 1; s < per_speaker.size(); ++s) {
        if (per_speaker[s].bits.size() != z.bits.size())
            throw std::invalid_argument("bin vector length mismatch");
        for (size_t i = 0; i < z.bits.size(); ++i) z.bits[i] |= per_speaker[s].bits[i];
    }
    return z;
}

/// Number of partners whose cumulative speaking time over a segment meets
/// the threshold. Overlap is allowed, so the result ranges 0..partner count.
inline int shape_target_count(const std::vector<std::vector<uint8_t>>& partner_vads,
                              double threshold_s, double frame_rate_hz) {
    if (frame_rate_hz <= 0.0) throw std::invalid_argument("frame rate must be positive");
    int qualified = 0;
    for (const auto& vad : partner_vads) {
        double active = 0.0;
        for (auto v : vad) active += v ? 1.0 : 0.0;
        if (active / frame_rate_hz >= threshold_s) ++qualified;
    }
    return qualified;
}

/// Inverse normalized-frequency class weights, k_i = 1 / (f_i / sum f).
/// Bins never observed positive get the largest observed weight.
inline std::vector<double> class_weights(const std::vector<ZoneLabel>& labels) {
    if (labels.empty()) throw std::invalid_argument("class_weights on empty dataset");
    size_t n = labels.front().bits.size();
    std::vector<double> freq(n, 0.0);
    for (const auto& l : labels) {
        if (l.bits.size() != n) throw std::invalid_argument("label length mismatch");
        for (size_t i = 0; i < n; ++i) freq[i] += l.bits[i] ? 1.0 : 0.0;
    }
    double total = 0.0;
    for (double f : freq) total += f;
    if (total == 0.0) throw std::invalid_argument("no positive labels in dataset");

    std::vector<double> k(n, 0.0);
    double cap = 0.0;
    for (size_t i = 0; i < n; ++i)
        if (freq[i] > 0.0) {
            k[i] = total / freq[i];
            cap = std::max(cap, k[i]);
        }
    for (size_t i = 0; i < n; ++i)
        if (freq[i] == 0.0) k[i] = cap;
    return k;
}

}  // namespace azil
