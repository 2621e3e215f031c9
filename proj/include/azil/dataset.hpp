#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "azil/nn.hpp"
#include "azil/rng.hpp"
#include "azil/sim.hpp"
#include "azil/targets.hpp"
#include "azil/tensor.hpp"

namespace azil {

struct DatasetConfig {
    BinConfig bins = BinConfig::six_zone();
    bool target_shaping = true;
    double shaping_threshold_s = 8.0;  // cumulative speech needed to count a partner
    double frame_rate_hz = 5.0;
};

// One model-ready segment. Features hold all four channels (az, el, self vad,
// any-partner vad), each standardized over the segment; batch assembly slices
// off the leading channels a model wants. Raw traces stay around for the rule
// baseline and the flat azimuth-vector model.
struct SegmentExample {
    Tensor features;  // [4, T]
    ZoneLabel zones;
    int count = 0;
    std::vector<double> raw_azimuth;
    std::vector<double> raw_elevation;
    std::vector<uint8_t> self_vad;
    uint64_t session_seed = 0;
    int segment_index = 0;
};

inline Tensor segment_features(const Segment& seg) {
    int t = static_cast<int>(seg.n_frames());
    if (t == 0) throw std::invalid_argument("empty segment");
    Tensor x({4, t});
    for (int f = 0; f < t; ++f) {
        size_t sf = static_cast<size_t>(f);
        x.at(0, f) = seg.azimuth_deg[sf];
        x.at(1, f) = seg.elevation_deg[sf];
        x.at(2, f) = seg.self_vad[sf];
        uint8_t any = 0;
        for (const auto& pv : seg.partner_vad) any |= pv[sf];
        x.at(3, f) = any;
    }
    return normalize_input(x);
}

inline ZoneLabel segment_zones(const Segment& seg, const BinConfig& bins) {
    std::vector<BinVector> per;
    per.reserve(seg.partner_positions.size());
    for (const auto& positions : seg.partner_positions)
        per.push_back(bin_vector(median_azimuth(positions), bins));
    return zone_label(per);
}

inline int segment_count_target(const Segment& seg, const DatasetConfig& cfg) {
    // without shaping any voiced frame counts a partner
    double threshold = cfg.target_shaping ? cfg.shaping_threshold_s : 1.0 / cfg.frame_rate_hz;
    return shape_target_count(seg.partner_vad, threshold, cfg.frame_rate_hz);
}

inline SegmentExample make_example(const Segment& seg, const DatasetConfig& cfg) {
    SegmentExample ex;
    ex.features = segment_features(seg);
    ex.zones = segment_zones(seg, cfg.bins);
    ex.count = segment_count_target(seg, cfg);
    ex.raw_azimuth = seg.azimuth_deg;
    ex.raw_elevation = seg.elevation_deg;
    ex.self_vad = seg.self_vad;
    ex.session_seed = seg.session_seed;
    ex.segment_index = seg.index;
    return ex;
}

inline std::vector<SegmentExample> examples_from_trace(const SessionTrace& trace,
                                                       const DatasetConfig& cfg) {
    std::vector<SegmentExample> out;
    for (const auto& seg : segment_session(trace)) out.push_back(make_example(seg, cfg));
    return out;
}

inline uint64_t session_seed_for(uint64_t root_seed, size_t index) {
    uint64_t s = root_seed ^ fnv1a64("session");
    uint64_t mixed = splitmix64(s) + index;
    return splitmix64(mixed);
}

enum class Split { train, val, test };

// Session-level assignment, 7:3 train:test with 20% of train held out for
// validation. Depends only on (session id, seed): no session's fate changes
// when others are added or removed.
inline Split split_for_session(uint64_t session_id, uint64_t seed) {
    Rng r = Rng::stream(seed, "split", session_id);
    if (r.uniform() >= 0.7) return Split::test;
    return r.uniform() < 0.2 ? Split::val : Split::train;
}

struct SplitDataset {
    std::vector<SegmentExample> train, val, test;
};

inline SplitDataset split_examples(const std::vector<SegmentExample>& all, uint64_t seed) {
    SplitDataset out;
    for (const auto& ex : all) {
        switch (split_for_session(ex.session_seed, seed)) {
            case Split::train: out.train.push_back(ex); break;
            case Split::val: out.val.push_back(ex); break;
            case Split::test: out.test.push_back(ex); break;
        }
    }
    return out;
}

inline std::vector<ZoneLabel> zone_labels_of(const std::vector<SegmentExample>& pool) {
    std::vector<ZoneLabel> out;
    out.reserve(pool.size());
    for (const auto& ex : pool) out.push_back(ex.zones);
    return out;
}

struct Batch {
    Tensor x;        // [C, B, T]
    Tensor zones;    // [n_bins, B]
    Tensor statics;  // [1, B], true shaped counts
    std::vector<int> counts;
    std::vector<size_t> indices;
};

inline Batch make_batch(const std::vector<SegmentExample>& pool,
                        const std::vector<size_t>& idx, int n_channels) {
    if (idx.empty()) throw std::invalid_argument("empty batch");
    if (n_channels < 1 || n_channels > 4)
        throw std::invalid_argument("n_channels must be in [1,4]");
    int b = static_cast<int>(idx.size());
    int t = pool[idx[0]].features.dim(1);
    int n_bins = static_cast<int>(pool[idx[0]].zones.bits.size());

    Batch out;
    out.x = Tensor({n_channels, b, t});
    out.zones = Tensor({n_bins, b});
    out.statics = Tensor({1, b});
    out.indices = idx;
    for (int bb = 0; bb < b; ++bb) {
        const SegmentExample& ex = pool[idx[static_cast<size_t>(bb)]];
        if (ex.features.dim(1) != t || static_cast<int>(ex.zones.bits.size()) != n_bins)
            throw std::invalid_argument("mixed segment shapes in one batch");
        for (int c = 0; c < n_channels; ++c)
            for (int f = 0; f < t; ++f)
                out.x.data[(static_cast<size_t>(c) * b + bb) * t + f] = ex.features.at(c, f);
        for (int i = 0; i < n_bins; ++i)
            out.zones.at(i, bb) = ex.zones.bits[static_cast<size_t>(i)];
        out.statics.at(0, bb) = ex.count;
        out.counts.push_back(ex.count);
    }
    return out;
}

// Flat azimuth-vector input for the perceptron baseline, scaled to ~unit range.
inline Tensor make_flat_azimuth_batch(const std::vector<SegmentExample>& pool,
                                      const std::vector<size_t>& idx) {
    if (idx.empty()) throw std::invalid_argument("empty batch");
    int t = static_cast<int>(pool[idx[0]].raw_azimuth.size());
    Tensor out({t, static_cast<int>(idx.size())});
    for (size_t bb = 0; bb < idx.size(); ++bb) {
        const auto& az = pool[idx[bb]].raw_azimuth;
        if (static_cast<int>(az.size()) != t)
            throw std::invalid_argument("mixed segment lengths in one batch");
        for (int f = 0; f < t; ++f)
            out.at(f, static_cast<int>(bb)) = az[static_cast<size_t>(f)] / 100.0;
    }
    return out;
}

inline std::vector<std::vector<size_t>> epoch_batches(size_t n, size_t batch_size, Rng& rng) {
    if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
    std::vector<size_t> perm(n);
    for (size_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(perm);
    std::vector<std::vector<size_t>> out;
    for (size_t start = 0; start < n; start += batch_size) {
        size_t end = std::min(n, start + batch_size);
        out.emplace_back(perm.begin() + static_cast<long>(start),
                         perm.begin() + static_cast<long>(end));
    }
    return out;
}

}  // namespace azil
