#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "azil/geom.hpp"
#include "azil/rng.hpp"

namespace azil {

struct Layout {
    std::vector<double> partner_azimuths;   // degrees, within the discretized field
    std::vector<double> partner_elevations; // degrees
    int group_size = 2;                     // focal user + partners

    int n_partners() const { return group_size - 1; }

    void validate() const {
        if (group_size < 2 || group_size > 5)
            throw std::invalid_argument("group_size must be in [2,5]");
        if (partner_azimuths.size() != static_cast<size_t>(group_size - 1))
            throw std::invalid_argument("partner count must be group_size - 1");
        if (partner_elevations.size() != partner_azimuths.size())
            throw std::invalid_argument("elevation count must match azimuth count");
        for (double a : partner_azimuths)
            if (!(a >= -100.0 && a <= 100.0))
                throw std::invalid_argument("partner azimuth outside [-100, 100]");
    }
};

struct LayoutParams {
    double az_min = -100.0;
    double az_max = 100.0;
    double min_separation = 15.0;  // degrees between any two partners
};

struct BehaviorParams {
    double reaction_latency = 0.3;        // s before the head starts toward a new talker
    double undershoot_factor = 0.9;       // head target = factor * talker direction
    double idle_event_rate = 2.0;         // spontaneous look-away events per minute
    double idle_duration = 1.5;           // s spent looking down per event
    double orientation_noise_std = 1.5;   // degrees, stationary sd of the wander term
    double central_bias_gain = 0.5;       // recentering rate multiplier when nobody talks
    double smoothing_time_constant = 0.25; // s, first-order tracking lag

    void validate() const {
        if (reaction_latency < 0 || idle_event_rate < 0 || idle_duration < 0 ||
            orientation_noise_std < 0 || central_bias_gain < 0 ||
            smoothing_time_constant <= 0)
            throw std::invalid_argument("behavior params must be non-negative");
        if (undershoot_factor <= 0 || undershoot_factor > 1)
            throw std::invalid_argument("undershoot_factor must be in (0,1]");
    }
};

// Background noise level enters as a scalar multiplier: louder rooms slow
// reactions and add head wander.
inline BehaviorParams apply_noise_level(BehaviorParams b, double multiplier) {
    if (multiplier < 0) throw std::invalid_argument("noise multiplier must be >= 0");
    b.reaction_latency *= multiplier;
    b.orientation_noise_std *= multiplier;
    return b;
}

struct TurnTakingParams {
    double mean_turn_length = 3.0;          // s, exponential mean
    double turn_gap = 1.0;                  // s, exponential mean between turns
    double overlap_probability = 0.08;
    std::vector<double> talkativeness_weights;  // per partner, normalized; empty = drawn
    double self_weight = 0.3;               // focal user's weight vs the partner total of 1

    void validate() const {
        if (mean_turn_length <= 0 || turn_gap < 0)
            throw std::invalid_argument("turn durations must be positive");
        if (overlap_probability < 0 || overlap_probability > 1)
            throw std::invalid_argument("overlap_probability must be in [0,1]");
        if (self_weight < 0) throw std::invalid_argument("self_weight must be >= 0");
        if (!talkativeness_weights.empty()) {
            double s = 0;
            for (double w : talkativeness_weights) {
                if (w < 0) throw std::invalid_argument("talkativeness weights must be >= 0");
                s += w;
            }
            if (std::abs(s - 1.0) > 1e-9)
                throw std::invalid_argument("talkativeness weights must sum to 1");
        }
    }
};

struct VadStreams {
    std::vector<uint8_t> self;
    std::vector<std::vector<uint8_t>> partners;  // [partner][frame]
};

struct SessionTrace {
    Layout layout;
    double frame_rate = 5.0;   // Hz, VAD and model-input frames
    double gyro_rate = 100.0;  // Hz, simulated IMU
    double duration = 0.0;     // s
    std::vector<AngularVelocitySample> gyro;
    std::vector<SphericalDirection> true_orientation;            // at gyro_rate
    std::vector<std::vector<SphericalDirection>> partner_positions;  // [partner][frame]
    std::vector<uint8_t> self_vad;
    std::vector<std::vector<uint8_t>> partner_vad;
    Vec3 gyro_bias{0, 0, 0};  // rad/s
    uint64_t seed = 0;
};

struct Segment {
    uint64_t session_seed = 0;
    int index = 0;
    std::vector<double> azimuth_deg;    // 150 frames, IMU-integrated, segment-anchored
    std::vector<double> elevation_deg;
    std::vector<uint8_t> self_vad;
    std::vector<std::vector<uint8_t>> partner_vad;
    std::vector<std::vector<SphericalDirection>> partner_positions;  // ground truth
    std::vector<SphericalDirection> true_orientation;                // ground truth at 5 Hz

    size_t n_frames() const { return azimuth_deg.size(); }
};

struct SessionParams {
    int group_size = 4;
    double duration_s = 120.0;
    double gyro_rate_hz = 100.0;
    double frame_rate_hz = 5.0;
    LayoutParams layout;
    BehaviorParams behavior;
    TurnTakingParams turns;
    Vec3 gyro_bias{0, 0, 0};     // rad/s
    double gyro_noise_std = 0.0; // rad/s per sample
    double noise_level = 1.0;    // background-noise multiplier, see apply_noise_level
};

inline Layout sample_layout(int group_size, Rng& rng, const LayoutParams& p = {}) {
    if (group_size < 2 || group_size > 5)
        throw std::invalid_argument("group_size must be in [2,5]");
    if (p.az_max <= p.az_min || p.az_min < -100.0 || p.az_max > 100.0)
        throw std::invalid_argument("layout azimuth range must lie inside [-100, 100]");
    int n = group_size - 1;
    if ((n - 1) * p.min_separation > (p.az_max - p.az_min))
        throw std::invalid_argument("separation constraint infeasible for this range");

    Layout out;
    out.group_size = group_size;
    for (int attempt = 0; attempt < 1000; ++attempt) {
        std::vector<double> az(static_cast<size_t>(n));
        for (auto& a : az) a = rng.uniform(p.az_min, p.az_max);
        bool ok = true;
        for (int i = 0; i < n && ok; ++i)
            for (int j = i + 1; j < n; ++j)
                if (std::abs(az[i] - az[j]) < p.min_separation) {
                    ok = false;
                    break;
                }
        if (ok) {
            out.partner_azimuths = std::move(az);
            out.partner_elevations.assign(static_cast<size_t>(n), 0.0);
            out.validate();
            return out;
        }
    }
    throw std::runtime_error("could not satisfy the separation constraint");
}

// Semi-Markov alternation: one speaker (partners plus the focal user) is drawn
// by talkativeness, holds the floor for an exponential turn, then a gap;
// occasionally a second voice overlaps the tail of the turn.
inline VadStreams simulate_turn_taking(const TurnTakingParams& params, int n_partners,
                                       double duration, Rng& rng,
                                       double frame_rate = 5.0) {
    params.validate();
    if (duration <= 0) throw std::invalid_argument("duration must be positive");
    if (n_partners < 1 || n_partners > 4)
        throw std::invalid_argument("n_partners must be in [1,4]");
    if (!params.talkativeness_weights.empty() &&
        params.talkativeness_weights.size() != static_cast<size_t>(n_partners))
        throw std::invalid_argument("weight count must match n_partners");

    std::vector<double> w = params.talkativeness_weights;
    if (w.empty()) w.assign(static_cast<size_t>(n_partners), 1.0 / n_partners);
    w.push_back(params.self_weight);  // last slot is the focal user

    int n_frames = static_cast<int>(std::llround(duration * frame_rate));
    VadStreams out;
    out.self.assign(static_cast<size_t>(n_frames), 0);
    out.partners.assign(static_cast<size_t>(n_partners),
                        std::vector<uint8_t>(static_cast<size_t>(n_frames), 0));

    auto mark = [&](int speaker, double t0, double t1) {
        auto& stream = speaker == n_partners ? out.self : out.partners[speaker];
        for (int f = 0; f < n_frames; ++f) {
            double mid = (f + 0.5) / frame_rate;
            if (mid >= t0 && mid < t1) stream[static_cast<size_t>(f)] = 1;
        }
    };

    double t = 0.0;
    while (t < duration) {
        int speaker = static_cast<int>(rng.weighted(w));
        double len = std::max(0.3, rng.exponential(params.mean_turn_length));
        mark(speaker, t, t + len);
        if (w.size() > 1 && rng.uniform() < params.overlap_probability) {
            int other = static_cast<int>(rng.weighted(w));
            if (other != speaker) {
                double olen = std::min(len, std::max(0.2, rng.exponential(
                                                              params.mean_turn_length / 2)));
                mark(other, t + len - olen, t + len);
            }
        }
        t += len + rng.exponential(params.turn_gap);
    }
    return out;
}

namespace detail {

// Attended partner per frame: the active partner with the most recent onset,
// -1 when nobody but the focal user is talking.
inline std::vector<int> attended_partner(const VadStreams& vads) {
    int n = static_cast<int>(vads.partners.size());
    size_t frames = vads.partners.empty() ? 0 : vads.partners[0].size();
    std::vector<int> onset(static_cast<size_t>(n), -1);
    std::vector<int> out(frames, -1);
    for (size_t f = 0; f < frames; ++f) {
        for (int p = 0; p < n; ++p)
            if (vads.partners[p][f] && (f == 0 || !vads.partners[p][f - 1]))
                onset[static_cast<size_t>(p)] = static_cast<int>(f);
        int best = -1;
        for (int p = 0; p < n; ++p)
            if (vads.partners[p][f] &&
                (best < 0 || onset[static_cast<size_t>(p)] > onset[static_cast<size_t>(best)]))
                best = p;
        out[f] = best;
    }
    return out;
}

}  // namespace detail

// Head pointing trace at the gyro rate. The head tracks the attended talker's
// (undershot) direction with a first-order lag after a reaction delay, wanders
// with a smooth noise term, recenters when nobody is talking, and occasionally
// drops to shoe-gazing elevation for an idle event.
inline std::vector<SphericalDirection> simulate_head_orientation(
    const std::vector<std::vector<SphericalDirection>>& partner_positions,
    const VadStreams& vads, const BehaviorParams& b, double gyro_rate,
    double frame_rate, Rng& rng) {
    b.validate();
    if (partner_positions.size() != vads.partners.size())
        throw std::invalid_argument("positions and vad streams disagree on partner count");
    size_t n_frames = vads.self.size();
    for (const auto& pv : vads.partners)
        if (pv.size() != n_frames) throw std::invalid_argument("vad streams misaligned");
    for (const auto& pp : partner_positions)
        if (pp.size() != n_frames)
            throw std::invalid_argument("partner positions must be per frame");

    std::vector<int> attended = detail::attended_partner(vads);
    double dt = 1.0 / gyro_rate;
    size_t n_steps = static_cast<size_t>(
        std::llround(static_cast<double>(n_frames) / frame_rate * gyro_rate));

    double az = 0.0, el = 0.0;
    double naz = 0.0, nel = 0.0;  // smooth wander state
    const double wander_tau = 0.3;
    double wander_blend = std::exp(-dt / wander_tau);
    double wander_kick = b.orientation_noise_std * std::sqrt(1.0 - wander_blend * wander_blend);

    double idle_until = -1.0;
    double next_idle = std::numeric_limits<double>::infinity();
    if (b.idle_event_rate > 0) next_idle = rng.exponential(60.0 / b.idle_event_rate);

    std::vector<SphericalDirection> out;
    out.reserve(n_steps);
    for (size_t k = 0; k < n_steps; ++k) {
        out.push_back({az + naz, el + 0.5 * nel});  // elevation wander is gentler

        double t = static_cast<double>(k) * dt;
        double t_delayed = t - b.reaction_latency;
        int a = -1;
        if (t_delayed >= 0) {
            size_t f = std::min(n_frames - 1,
                                static_cast<size_t>(t_delayed * frame_rate));
            a = attended[f];
        }
        size_t f_now = std::min(n_frames - 1, static_cast<size_t>(t * frame_rate));

        if (t >= next_idle && t >= idle_until) {
            idle_until = t + b.idle_duration;
            next_idle = idle_until + rng.exponential(60.0 / b.idle_event_rate);
        }

        double target_az, target_el, rate_gain = 1.0;
        if (t < idle_until) {
            target_az = az;  // hold azimuth, look down
            target_el = -70.0;
        } else if (a >= 0) {
            const auto& pos = partner_positions[static_cast<size_t>(a)][f_now];
            target_az = b.undershoot_factor * pos.azimuth_deg;
            target_el = b.undershoot_factor * pos.elevation_deg;
        } else {
            target_az = 0.0;
            target_el = 0.0;
            rate_gain = b.central_bias_gain;
        }

        double alpha = 1.0 - std::exp(-rate_gain * dt / b.smoothing_time_constant);
        az += alpha * (target_az - az);
        el += alpha * (target_el - el);

        if (b.orientation_noise_std > 0) {
            naz = wander_blend * naz + wander_kick * rng.normal();
            nel = wander_blend * nel + wander_kick * rng.normal();
        }
    }
    return out;
}

inline Quaternion orientation_quaternion(const SphericalDirection& d) {
    Quaternion yaw = Quaternion::from_axis_angle({0, 0, 1}, deg2rad(d.azimuth_deg));
    Quaternion pitch = Quaternion::from_axis_angle({0, 1, 0}, -deg2rad(d.elevation_deg));
    return yaw * pitch;
}

// Recover per-sample body rates from successive orientation increments, then
// add bias and measurement noise. Paired with integrate_gyro: the first
// sample carries zero true rate so integration reproduces the trajectory.
inline std::vector<AngularVelocitySample> orientation_to_gyro(
    const std::vector<SphericalDirection>& orientation, double rate, const Vec3& bias,
    double noise_std, Rng& rng) {
    if (rate <= 0) throw std::invalid_argument("rate must be positive");
    std::vector<AngularVelocitySample> out;
    out.reserve(orientation.size());
    Quaternion prev = Quaternion::identity();
    for (size_t k = 0; k < orientation.size(); ++k) {
        double t = static_cast<double>(k) / rate;
        Vec3 w{0, 0, 0};
        Quaternion q = orientation_quaternion(orientation[k]);
        if (k > 0) {
            double dt = t - (static_cast<double>(k - 1) / rate);
            Vec3 lg = (q * prev.conjugate()).log();
            w = {lg.x / dt, lg.y / dt, lg.z / dt};
        }
        prev = q;
        w.x += bias.x;
        w.y += bias.y;
        w.z += bias.z;
        if (noise_std > 0) {
            w.x += noise_std * rng.normal();
            w.y += noise_std * rng.normal();
            w.z += noise_std * rng.normal();
        }
        out.push_back({w, t});
    }
    return out;
}

inline SessionTrace simulate_session(const SessionParams& p, uint64_t seed) {
    if (p.duration_s <= 0) throw std::invalid_argument("duration must be positive");
    if (p.gyro_rate_hz <= 0 || p.frame_rate_hz <= 0)
        throw std::invalid_argument("rates must be positive");
    BehaviorParams behavior = apply_noise_level(p.behavior, p.noise_level);
    behavior.validate();

    SessionTrace trace;
    trace.frame_rate = p.frame_rate_hz;
    trace.gyro_rate = p.gyro_rate_hz;
    trace.duration = p.duration_s;
    trace.gyro_bias = p.gyro_bias;
    trace.seed = seed;

    Rng rng_layout = Rng::stream(seed, "layout");
    trace.layout = sample_layout(p.group_size, rng_layout, p.layout);
    int n = trace.layout.n_partners();

    TurnTakingParams turns = p.turns;
    if (turns.talkativeness_weights.empty()) {
        Rng rng_w = Rng::stream(seed, "talkativeness");
        std::vector<double> w(static_cast<size_t>(n));
        double s = 0;
        for (auto& v : w) {
            v = 0.25 + rng_w.exponential(1.0);  // floor keeps every partner audible
            s += v;
        }
        for (auto& v : w) v /= s;
        turns.talkativeness_weights = std::move(w);
    }

    Rng rng_turns = Rng::stream(seed, "turns");
    VadStreams vads =
        simulate_turn_taking(turns, n, p.duration_s, rng_turns, p.frame_rate_hz);
    trace.self_vad = vads.self;
    trace.partner_vad = vads.partners;

    size_t n_frames = vads.self.size();
    Rng rng_sway = Rng::stream(seed, "sway");
    trace.partner_positions.assign(static_cast<size_t>(n), {});
    for (int pi = 0; pi < n; ++pi) {
        double amp = rng_sway.uniform(1.0, 8.0);
        double freq = rng_sway.uniform(0.02, 0.08);
        double phase = rng_sway.uniform(0.0, 2.0 * kPi);
        double amp_el = rng_sway.uniform(0.0, 3.0);
        double freq_el = rng_sway.uniform(0.02, 0.08);
        double phase_el = rng_sway.uniform(0.0, 2.0 * kPi);
        auto& pos = trace.partner_positions[static_cast<size_t>(pi)];
        pos.reserve(n_frames);
        for (size_t f = 0; f < n_frames; ++f) {
            double t = static_cast<double>(f) / p.frame_rate_hz;
            pos.push_back(
                {trace.layout.partner_azimuths[static_cast<size_t>(pi)] +
                     amp * std::sin(2.0 * kPi * freq * t + phase),
                 trace.layout.partner_elevations[static_cast<size_t>(pi)] +
                     amp_el * std::sin(2.0 * kPi * freq_el * t + phase_el)});
        }
    }

    Rng rng_behavior = Rng::stream(seed, "behavior");
    trace.true_orientation = simulate_head_orientation(
        trace.partner_positions, vads, behavior, p.gyro_rate_hz, p.frame_rate_hz,
        rng_behavior);

    Rng rng_gyro = Rng::stream(seed, "gyro");
    trace.gyro = orientation_to_gyro(trace.true_orientation, p.gyro_rate_hz, p.gyro_bias,
                                     p.gyro_noise_std, rng_gyro);
    return trace;
}

// Slice a session into non-overlapping 30 s windows; each window's head pose
// is re-integrated from identity so drift cannot accumulate across windows.
// A trailing remainder shorter than 30 s is dropped.
inline std::vector<Segment> segment_session(const SessionTrace& trace,
                                            double segment_s = 30.0) {
    if (segment_s <= 0) throw std::invalid_argument("segment length must be positive");
    int gyro_per_seg = static_cast<int>(std::llround(segment_s * trace.gyro_rate));
    int frames_per_seg = static_cast<int>(std::llround(segment_s * trace.frame_rate));
    int rate_in = static_cast<int>(std::llround(trace.gyro_rate));
    int rate_out = static_cast<int>(std::llround(trace.frame_rate));
    size_t n_segments = trace.gyro.size() / static_cast<size_t>(gyro_per_seg);

    std::vector<Segment> out;
    for (size_t s = 0; s < n_segments; ++s) {
        size_t g0 = s * static_cast<size_t>(gyro_per_seg);
        size_t f0 = s * static_cast<size_t>(frames_per_seg);
        if (f0 + static_cast<size_t>(frames_per_seg) > trace.self_vad.size()) break;

        std::span<const AngularVelocitySample> window(trace.gyro.data() + g0,
                                                      static_cast<size_t>(gyro_per_seg));
        std::vector<Quaternion> qs = integrate_gyro(window);
        std::vector<SphericalDirection> pointing;
        pointing.reserve(qs.size());
        for (const auto& q : qs) pointing.push_back(head_orientation(q));
        std::vector<SphericalDirection> frames = downsample(pointing, rate_in, rate_out);

        Segment seg;
        seg.session_seed = trace.seed;
        seg.index = static_cast<int>(s);
        seg.azimuth_deg.reserve(frames.size());
        seg.elevation_deg.reserve(frames.size());
        for (const auto& d : frames) {
            seg.azimuth_deg.push_back(d.azimuth_deg);
            seg.elevation_deg.push_back(d.elevation_deg);
        }
        seg.self_vad.assign(trace.self_vad.begin() + static_cast<long>(f0),
                            trace.self_vad.begin() + static_cast<long>(f0) +
                                frames_per_seg);
        for (const auto& pv : trace.partner_vad)
            seg.partner_vad.emplace_back(pv.begin() + static_cast<long>(f0),
                                         pv.begin() + static_cast<long>(f0) +
                                             frames_per_seg);
        for (const auto& pp : trace.partner_positions)
            seg.partner_positions.emplace_back(pp.begin() + static_cast<long>(f0),
                                               pp.begin() + static_cast<long>(f0) +
                                                   frames_per_seg);
        if (trace.true_orientation.size() >= g0 + static_cast<size_t>(gyro_per_seg)) {
            std::vector<SphericalDirection> truth(
                trace.true_orientation.begin() + static_cast<long>(g0),
                trace.true_orientation.begin() + static_cast<long>(g0) + gyro_per_seg);
            seg.true_orientation = downsample(truth, rate_in, rate_out);
        }
        out.push_back(std::move(seg));
    }
    return out;
}

}  // namespace azil
