#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "azil/geom.hpp"
#include "azil/rng.hpp"
#include "azil/sim.hpp"

using namespace azil;

namespace {

double angdiff(double a, double b) { return std::abs(wrap_deg(a - b)); }

std::vector<std::vector<SphericalDirection>> constant_positions(
    const std::vector<SphericalDirection>& dirs, size_t frames) {
    std::vector<std::vector<SphericalDirection>> out;
    for (const auto& d : dirs) out.emplace_back(frames, d);
    return out;
}

}  // namespace

TEST_CASE("layout sampling respects bounds and separation") {
    Rng rng(11);
    Layout two = sample_layout(2, rng);
    REQUIRE(two.partner_azimuths.size() == 1);
    REQUIRE(two.partner_elevations == std::vector<double>{0.0});

    for (int rep = 0; rep < 200; ++rep) {
        Layout l = sample_layout(5, rng);
        REQUIRE(l.partner_azimuths.size() == 4);
        for (double a : l.partner_azimuths) {
            REQUIRE(a >= -100.0);
            REQUIRE(a <= 100.0);
        }
        for (size_t i = 0; i < 4; ++i)
            for (size_t j = i + 1; j < 4; ++j)
                REQUIRE(std::abs(l.partner_azimuths[i] - l.partner_azimuths[j]) >= 15.0);
    }

    Rng a(7), b(7);
    REQUIRE(sample_layout(4, a).partner_azimuths == sample_layout(4, b).partner_azimuths);

    REQUIRE_THROWS_AS(sample_layout(1, rng), std::invalid_argument);
    REQUIRE_THROWS_AS(sample_layout(6, rng), std::invalid_argument);
    LayoutParams narrow;
    narrow.az_min = 0.0;
    narrow.az_max = 40.0;
    REQUIRE_THROWS_AS(sample_layout(5, rng, narrow), std::invalid_argument);
}

TEST_CASE("turn taking exclusivity and degenerate weights") {
    TurnTakingParams tt;
    tt.overlap_probability = 0.0;
    tt.talkativeness_weights = {0.4, 0.35, 0.25};
    Rng rng(23);
    VadStreams v = simulate_turn_taking(tt, 3, 120.0, rng);
    REQUIRE(v.self.size() == 600);
    REQUIRE(v.partners.size() == 3);
    for (size_t f = 0; f < v.self.size(); ++f) {
        int active = v.self[f];
        for (const auto& pv : v.partners) active += pv[f];
        REQUIRE(active <= 1);
    }

    TurnTakingParams solo;
    solo.talkativeness_weights = {1.0, 0.0, 0.0};
    solo.self_weight = 0.0;
    Rng rng2(29);
    VadStreams s = simulate_turn_taking(solo, 3, 60.0, rng2);
    size_t others = 0, first = 0;
    for (size_t f = 0; f < s.partners[0].size(); ++f) {
        first += s.partners[0][f];
        others += s.partners[1][f] + s.partners[2][f] + s.self[f];
    }
    REQUIRE(others == 0);
    REQUIRE(first > 0);

    REQUIRE_THROWS_AS(simulate_turn_taking(tt, 3, -1.0, rng), std::invalid_argument);
    REQUIRE_THROWS_AS(simulate_turn_taking(tt, 2, 10.0, rng), std::invalid_argument);
}

TEST_CASE("speaking-time shares follow talkativeness over long runs") {
    TurnTakingParams tt;
    tt.overlap_probability = 0.0;
    tt.talkativeness_weights = {0.5, 0.3, 0.2};
    tt.self_weight = 0.25;
    Rng rng(31);
    VadStreams v = simulate_turn_taking(tt, 3, 600.0, rng);
    double total = 0;
    std::vector<double> frames(3, 0.0);
    for (int p = 0; p < 3; ++p) {
        for (auto b : v.partners[static_cast<size_t>(p)]) frames[static_cast<size_t>(p)] += b;
        total += frames[static_cast<size_t>(p)];
    }
    REQUIRE(total > 0);
    for (int p = 0; p < 3; ++p)
        REQUIRE(frames[static_cast<size_t>(p)] / total ==
                Catch::Approx(tt.talkativeness_weights[static_cast<size_t>(p)]).margin(0.05));
}

TEST_CASE("head tracking converges to the undershot talker direction") {
    size_t frames = 60;  // 12 s
    VadStreams v;
    v.self.assign(frames, 0);
    v.partners.push_back(std::vector<uint8_t>(frames, 1));
    auto pos = constant_positions({{40.0, 30.0}}, frames);

    BehaviorParams b;
    b.orientation_noise_std = 0.0;
    b.idle_event_rate = 0.0;
    b.undershoot_factor = 1.0;
    Rng rng(37);
    auto traj = simulate_head_orientation(pos, v, b, 100.0, 5.0, rng);
    REQUIRE(traj.size() == 1200);
    REQUIRE(traj[0].azimuth_deg == 0.0);
    REQUIRE(traj.back().azimuth_deg == Catch::Approx(40.0).margin(1.0));
    REQUIRE(traj.back().elevation_deg == Catch::Approx(30.0).margin(1.0));

    b.undershoot_factor = 0.75;
    Rng rng2(37);
    auto traj2 = simulate_head_orientation(pos, v, b, 100.0, 5.0, rng2);
    REQUIRE(traj2.back().azimuth_deg == Catch::Approx(30.0).margin(1.0));
}

TEST_CASE("silence recenters the head when the bias gain allows") {
    size_t frames = 75;  // 15 s: 5 s of speech then silence
    VadStreams v;
    v.self.assign(frames, 0);
    std::vector<uint8_t> pv(frames, 0);
    for (size_t f = 0; f < 25; ++f) pv[f] = 1;
    v.partners.push_back(pv);
    auto pos = constant_positions({{60.0, 0.0}}, frames);

    BehaviorParams b;
    b.orientation_noise_std = 0.0;
    b.idle_event_rate = 0.0;
    b.undershoot_factor = 1.0;
    b.central_bias_gain = 1.0;
    Rng rng(41);
    auto traj = simulate_head_orientation(pos, v, b, 100.0, 5.0, rng);
    REQUIRE(traj[499].azimuth_deg == Catch::Approx(60.0).margin(2.0));
    REQUIRE(std::abs(traj.back().azimuth_deg) < 1.0);

    b.central_bias_gain = 0.0;
    Rng rng2(41);
    auto frozen = simulate_head_orientation(pos, v, b, 100.0, 5.0, rng2);
    REQUIRE(frozen.back().azimuth_deg == Catch::Approx(60.0).margin(2.0));
}

TEST_CASE("idle events drop elevation toward the shoes") {
    size_t frames = 300;  // 60 s
    VadStreams v;
    v.self.assign(frames, 0);
    v.partners.push_back(std::vector<uint8_t>(frames, 1));
    auto pos = constant_positions({{0.0, 0.0}}, frames);

    BehaviorParams b;
    b.orientation_noise_std = 0.0;
    b.idle_event_rate = 20.0;  // frequent, so one lands in the window
    b.idle_duration = 2.0;
    Rng rng(43);
    auto traj = simulate_head_orientation(pos, v, b, 100.0, 5.0, rng);
    double min_el = 0.0;
    for (const auto& d : traj) min_el = std::min(min_el, d.elevation_deg);
    REQUIRE(min_el < -45.0);
    REQUIRE(min_el >= -70.5);
}

TEST_CASE("gyro synthesis and integration are inverse maps") {
    SessionParams p;
    p.group_size = 4;
    p.duration_s = 30.0;
    SessionTrace trace = simulate_session(p, 2711);
    REQUIRE(trace.gyro.size() == 3000);
    REQUIRE(trace.true_orientation.size() == 3000);
    REQUIRE(trace.gyro[0].omega.norm() == 0.0);

    auto qs = integrate_gyro(trace.gyro);
    double worst = 0.0;
    for (size_t k = 0; k < qs.size(); ++k) {
        SphericalDirection got = head_orientation(qs[k]);
        worst = std::max(worst, angdiff(got.azimuth_deg, trace.true_orientation[k].azimuth_deg));
        worst = std::max(worst,
                         std::abs(got.elevation_deg - trace.true_orientation[k].elevation_deg));
    }
    REQUIRE(worst < 0.1);
}

TEST_CASE("constant gyro bias drifts the integrated azimuth linearly") {
    std::vector<SphericalDirection> still(1000, SphericalDirection{0.0, 0.0});
    Rng rng(47);
    double bias = 0.01;  // rad/s about +z
    auto gyro = orientation_to_gyro(still, 100.0, {0.0, 0.0, bias}, 0.0, rng);
    auto qs = integrate_gyro(gyro);
    double expected = bias * 10.0 * 180.0 / kPi;
    REQUIRE(head_orientation(qs.back()).azimuth_deg == Catch::Approx(expected).margin(0.05));

    size_t mid = 499;
    double t_mid = 5.0;
    REQUIRE(head_orientation(qs[mid]).azimuth_deg ==
            Catch::Approx(bias * t_mid * 180.0 / kPi).margin(0.05));
}

TEST_CASE("sessions are deterministic in the seed") {
    SessionParams p;
    p.duration_s = 40.0;
    SessionTrace a = simulate_session(p, 99);
    SessionTrace b = simulate_session(p, 99);
    REQUIRE(a.layout.partner_azimuths == b.layout.partner_azimuths);
    REQUIRE(a.self_vad == b.self_vad);
    REQUIRE(a.gyro.size() == b.gyro.size());
    for (size_t i = 0; i < a.gyro.size(); ++i) {
        REQUIRE(a.gyro[i].omega.x == b.gyro[i].omega.x);
        REQUIRE(a.gyro[i].omega.y == b.gyro[i].omega.y);
        REQUIRE(a.gyro[i].omega.z == b.gyro[i].omega.z);
    }
    SessionTrace c = simulate_session(p, 100);
    bool differs = a.layout.partner_azimuths != c.layout.partner_azimuths;
    for (size_t i = 0; !differs && i < a.gyro.size(); ++i)
        differs = a.gyro[i].omega.z != c.gyro[i].omega.z;
    REQUIRE(differs);
}

TEST_CASE("segmentation slices 30 s windows and drops the remainder") {
    SessionParams p;
    p.duration_s = 75.0;
    SessionTrace trace = simulate_session(p, 55);
    auto segs = segment_session(trace);
    REQUIRE(segs.size() == 2);
    for (const auto& s : segs) {
        REQUIRE(s.n_frames() == 150);
        REQUIRE(s.self_vad.size() == 150);
        REQUIRE(s.partner_vad.size() == trace.partner_vad.size());
        REQUIRE(s.partner_positions[0].size() == 150);
        REQUIRE(s.true_orientation.size() == 150);
        REQUIRE(s.session_seed == 55);
    }
    REQUIRE(segs[0].index == 0);
    REQUIRE(segs[1].index == 1);

    // vad alignment with the parent trace
    for (size_t f = 0; f < 150; ++f) {
        REQUIRE(segs[1].self_vad[f] == trace.self_vad[150 + f]);
        REQUIRE(segs[1].partner_vad[0][f] == trace.partner_vad[0][150 + f]);
    }

    p.duration_s = 29.0;
    REQUIRE(segment_session(simulate_session(p, 55)).empty());
}

TEST_CASE("each segment is anchored to its own starting pose") {
    SessionParams p;
    p.duration_s = 60.0;
    SessionTrace trace = simulate_session(p, 77);
    auto segs = segment_session(trace);
    REQUIRE(segs.size() == 2);

    // bias- and noise-free: segment 1's frames equal the true orientation
    // composed against the pose one sample before the window
    auto qs_true = integrate_gyro(trace.gyro);
    Quaternion anchor = qs_true[2999];
    for (size_t f = 0; f < 150; ++f) {
        size_t g = 3000 + f * 20 + 19;
        Quaternion rel = qs_true[g] * anchor.conjugate();
        SphericalDirection want = head_orientation(rel);
        REQUIRE(angdiff(segs[1].azimuth_deg[f], want.azimuth_deg) < 1e-6);
        REQUIRE(std::abs(segs[1].elevation_deg[f] - want.elevation_deg) < 1e-6);
    }

    // segment 0 shares the session anchor, so it matches the truth directly
    for (size_t f = 0; f < 150; ++f) {
        size_t g = f * 20 + 19;
        REQUIRE(angdiff(segs[0].azimuth_deg[f], trace.true_orientation[g].azimuth_deg) < 0.1);
    }
}

TEST_CASE("noise level scales latency and wander") {
    BehaviorParams b;
    b.reaction_latency = 0.4;
    b.orientation_noise_std = 2.0;
    BehaviorParams loud = apply_noise_level(b, 1.5);
    REQUIRE(loud.reaction_latency == Catch::Approx(0.6));
    REQUIRE(loud.orientation_noise_std == Catch::Approx(3.0));
    REQUIRE(loud.undershoot_factor == b.undershoot_factor);
    REQUIRE_THROWS_AS(apply_noise_level(b, -1.0), std::invalid_argument);
}
