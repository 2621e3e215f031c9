#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include "azil/geom.hpp"
#include "azil/rng.hpp"
#include "azil/targets.hpp"

// Microphone-array playground: free-field scene synthesis, delay-and-sum
// steering, and the classic DoA estimators it is compared against.

namespace azil {

struct ArrayGeometry {
    std::vector<Vec3> mics;  // meters, head frame: x forward, y left, z up
    double sample_rate = 16000.0;
    double speed_of_sound = 343.0;

    /// Six capsules on a glasses-frame arc, 8 cm from the head center.
    static ArrayGeometry glasses_frame() {
        ArrayGeometry g;
        double r = 0.08;
        for (double az : {-75.0, -45.0, -15.0, 15.0, 45.0, 75.0})
            g.mics.push_back({r * std::cos(deg2rad(az)), r * std::sin(deg2rad(az)), 0.0});
        return g;
    }

    /// Two capsules split across the y axis, broadside toward x.
    static ArrayGeometry broadside_pair(double spacing = 0.1) {
        ArrayGeometry g;
        g.mics.push_back({0.0, spacing / 2.0, 0.0});
        g.mics.push_back({0.0, -spacing / 2.0, 0.0});
        return g;
    }

    int n_mics() const { return static_cast<int>(mics.size()); }

    void validate() const {
        if (mics.size() < 2) throw std::invalid_argument("array needs >= 2 mics");
        if (sample_rate <= 0.0 || speed_of_sound <= 0.0)
            throw std::invalid_argument("rates must be positive");
        for (size_t i = 0; i < mics.size(); ++i)
            for (size_t j = i + 1; j < mics.size(); ++j)
                if ((mics[i] - mics[j]).norm() < 1e-9)
                    throw std::invalid_argument("mic positions must be distinct");
    }
};

struct MultichannelFrame {
    std::vector<std::vector<double>> samples;  // [mic][time]
    double fs = 16000.0;

    int n_mics() const { return static_cast<int>(samples.size()); }
    size_t n_samples() const { return samples.empty() ? 0 : samples[0].size(); }

    void validate() const {
        if (samples.empty()) throw std::invalid_argument("frame needs >= 1 channel");
        for (const auto& ch : samples)
            if (ch.size() != samples[0].size())
                throw std::invalid_argument("channel lengths differ");
    }
};

struct SteeringResult {
    std::string method;
    std::vector<double> azimuths_deg;
    std::vector<double> enhanced;
    double snr_db = 0.0;
};

namespace detail {

inline size_t next_pow2(size_t n) {
    size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

inline void fft_radix2(std::vector<std::complex<double>>& a, bool inverse) {
    size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0)
        throw std::invalid_argument("fft length must be a power of two");
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j |= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        double ang = 2.0 * kPi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t j = 0; j < len / 2; ++j) {
                std::complex<double> u = a[i + j];
                std::complex<double> v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse)
        for (auto& v : a) v /= static_cast<double>(n);
}

/// PHAT-whitened cross spectrum of b against a (length next_pow2(2 len)).
inline std::vector<std::complex<double>> phat_spectrum(const std::vector<double>& a,
                                                       const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty())
        throw std::invalid_argument("phat wants equal nonempty channels");
    size_t N = next_pow2(2 * a.size());
    std::vector<std::complex<double>> A(N), B(N);
    for (size_t i = 0; i < a.size(); ++i) {
        A[i] = a[i];
        B[i] = b[i];
    }
    fft_radix2(A, false);
    fft_radix2(B, false);
    for (size_t k = 0; k < N; ++k) {
        std::complex<double> g = std::conj(A[k]) * B[k];
        double m = std::abs(g);
        A[k] = m < 1e-12 ? std::complex<double>(0.0, 0.0) : g / m;
    }
    return A;
}

/// Continuous-lag evaluation of the correlation a whitened spectrum encodes.
inline double phat_at(const std::vector<std::complex<double>>& G, double lag) {
    size_t N = G.size();
    double step = 2.0 * kPi * lag / static_cast<double>(N);
    std::complex<double> w(std::cos(step), std::sin(step));
    std::complex<double> e = w;
    double acc = G[0].real();
    for (size_t k = 1; k < N / 2; ++k) {
        acc += 2.0 * (G[k] * e).real();
        e *= w;
    }
    acc += (G[N / 2] * e).real();
    return acc / static_cast<double>(N);
}

/// Correlation curve over integer lags; r[n] peaks at the lag (in samples,
/// n > N/2 meaning negative) by which b trails a.
inline std::vector<double> phat_xcorr(const std::vector<double>& a,
                                      const std::vector<double>& b) {
    std::vector<std::complex<double>> G = phat_spectrum(a, b);
    fft_radix2(G, true);
    std::vector<double> r(G.size());
    for (size_t n = 0; n < G.size(); ++n) r[n] = G[n].real();
    return r;
}

inline double sample_circular(const std::vector<double>& r, double lag) {
    double n = static_cast<double>(r.size());
    double idx = std::fmod(lag, n);
    if (idx < 0.0) idx += n;
    size_t lo = static_cast<size_t>(idx) % r.size();
    size_t hi = (lo + 1) % r.size();
    double frac = idx - std::floor(idx);
    return (1.0 - frac) * r[lo] + frac * r[hi];
}

/// Cyclic Jacobi eigensolver for a symmetric matrix (row-major n x n).
/// Eigenvalues land on the diagonal of a; v holds eigenvectors as columns.
inline void jacobi_eig(std::vector<double>& a, int n, std::vector<double>& v) {
    v.assign(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) v[static_cast<size_t>(i) * n + i] = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0, diag = 1e-300;
        for (int p = 0; p < n; ++p) {
            diag = std::max(diag, std::abs(a[static_cast<size_t>(p) * n + p]));
            for (int q = p + 1; q < n; ++q)
                off = std::max(off, std::abs(a[static_cast<size_t>(p) * n + q]));
        }
        if (off < 1e-13 * diag) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double apq = a[static_cast<size_t>(p) * n + q];
                if (std::abs(apq) < 1e-300) continue;
                double tau = (a[static_cast<size_t>(q) * n + q] -
                              a[static_cast<size_t>(p) * n + p]) /
                             (2.0 * apq);
                double t = (tau >= 0.0 ? 1.0 : -1.0) /
                           (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                double c = 1.0 / std::sqrt(1.0 + t * t);
                double s = t * c;
                for (int k = 0; k < n; ++k) {
                    double akp = a[static_cast<size_t>(k) * n + p];
                    double akq = a[static_cast<size_t>(k) * n + q];
                    a[static_cast<size_t>(k) * n + p] = c * akp - s * akq;
                    a[static_cast<size_t>(k) * n + q] = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    double apk = a[static_cast<size_t>(p) * n + k];
                    double aqk = a[static_cast<size_t>(q) * n + k];
                    a[static_cast<size_t>(p) * n + k] = c * apk - s * aqk;
                    a[static_cast<size_t>(q) * n + k] = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    double vkp = v[static_cast<size_t>(k) * n + p];
                    double vkq = v[static_cast<size_t>(k) * n + q];
                    v[static_cast<size_t>(k) * n + p] = c * vkp - s * vkq;
                    v[static_cast<size_t>(k) * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
}

}  // namespace detail

/// Plane-wave arrival time at a mic, relative to the head center, for a
/// source at the given horizontal azimuth. Negative means earlier.
inline double propagation_delay(const Vec3& mic, double azimuth_deg, double speed_of_sound) {
    Vec3 s{std::cos(deg2rad(azimuth_deg)), std::sin(deg2rad(azimuth_deg)), 0.0};
    return -mic.dot(s) / speed_of_sound;
}

/// Shift a signal by a (possibly fractional) number of seconds using a
/// frequency-domain phase ramp. Meant for sub-millisecond array delays.
inline std::vector<double> fractional_delay(const std::vector<double>& x, double delay_s,
                                            double fs) {
    if (x.empty() || delay_s == 0.0) return x;
    size_t pad = x.size() + static_cast<size_t>(std::ceil(std::abs(delay_s) * fs)) + 64;
    size_t N = detail::next_pow2(pad);
    std::vector<std::complex<double>> X(N);
    for (size_t i = 0; i < x.size(); ++i) X[i] = x[i];
    detail::fft_radix2(X, false);
    for (size_t k = 0; k < N; ++k) {
        if (k == N / 2) {
            X[k] *= std::cos(kPi * fs * delay_s);
            continue;
        }
        double f = (k < N / 2 ? static_cast<double>(k)
                              : static_cast<double>(k) - static_cast<double>(N)) *
                   fs / static_cast<double>(N);
        double ph = -2.0 * kPi * f * delay_s;
        X[k] *= std::complex<double>(std::cos(ph), std::sin(ph));
    }
    detail::fft_radix2(X, true);
    std::vector<double> out(x.size());
    for (size_t i = 0; i < x.size(); ++i) out[i] = X[i].real();
    return out;
}

struct SceneSource {
    double azimuth_deg = 0.0;
    std::vector<double> signal;
};

struct Scene {
    MultichannelFrame mixture;
    std::vector<std::vector<double>> clean;  // per source, as heard at mic 0
    std::vector<double> noise;               // the mic-0 noise realization
};

/// Far-field free-field scene: each source is fractionally delayed per mic and
/// summed, then independent Gaussian noise of the given level is added per mic.
inline Scene synthesize_scene(const std::vector<SceneSource>& sources,
                              const ArrayGeometry& geom, double noise_level, Rng& rng) {
    if (geom.mics.empty()) throw std::invalid_argument("geometry has no mics");
    if (sources.empty()) throw std::invalid_argument("scene needs >= 1 source");
    if (noise_level < 0.0) throw std::invalid_argument("noise_level must be >= 0");
    size_t n = sources[0].signal.size();
    if (n == 0) throw std::invalid_argument("empty source signal");
    for (const auto& s : sources)
        if (s.signal.size() != n) throw std::invalid_argument("source lengths differ");

    Scene out;
    out.mixture.fs = geom.sample_rate;
    out.mixture.samples.assign(geom.mics.size(), std::vector<double>(n, 0.0));
    for (const auto& src : sources) {
        for (size_t m = 0; m < geom.mics.size(); ++m) {
            double d = propagation_delay(geom.mics[m], src.azimuth_deg, geom.speed_of_sound);
            std::vector<double> delayed = fractional_delay(src.signal, d, geom.sample_rate);
            if (m == 0) out.clean.push_back(delayed);
            for (size_t i = 0; i < n; ++i) out.mixture.samples[m][i] += delayed[i];
        }
    }
    out.noise.assign(n, 0.0);
    if (noise_level > 0.0) {
        for (size_t m = 0; m < geom.mics.size(); ++m)
            for (size_t i = 0; i < n; ++i) {
                double w = noise_level * rng.normal();
                out.mixture.samples[m][i] += w;
                if (m == 0) out.noise[i] = w;
            }
    }
    return out;
}

/// Align every channel to mic 0 for the steering direction, then average.
inline std::vector<double> delay_and_sum(const MultichannelFrame& frame,
                                         const ArrayGeometry& geom, double steer_azimuth_deg) {
    frame.validate();
    if (frame.n_mics() != geom.n_mics())
        throw std::invalid_argument("frame and geometry disagree on mic count");
    if (frame.n_mics() == 1) return frame.samples[0];
    double d0 = propagation_delay(geom.mics[0], steer_azimuth_deg, geom.speed_of_sound);
    std::vector<double> out(frame.n_samples(), 0.0);
    for (int m = 0; m < frame.n_mics(); ++m) {
        double rel = propagation_delay(geom.mics[static_cast<size_t>(m)], steer_azimuth_deg,
                                       geom.speed_of_sound) -
                     d0;
        std::vector<double> aligned = fractional_delay(frame.samples[static_cast<size_t>(m)],
                                                       -rel, frame.fs);
        for (size_t i = 0; i < out.size(); ++i) out[i] += aligned[i];
    }
    for (double& v : out) v /= static_cast<double>(frame.n_mics());
    return out;
}

/// TDOA of channel b relative to a (positive: b trails a), PHAT-weighted with
/// parabolic peak interpolation. max_tdoa_s of 0 searches every lag.
inline double gcc_phat(const std::vector<double>& a, const std::vector<double>& b, double fs,
                       double max_tdoa_s = 0.0) {
    std::vector<std::complex<double>> G = detail::phat_spectrum(a, b);
    std::vector<std::complex<double>> tmp = G;
    detail::fft_radix2(tmp, true);
    size_t N = G.size();
    long half = static_cast<long>(N / 2);
    long max_lag = half - 1;
    if (max_tdoa_s > 0.0)
        max_lag = std::min<long>(max_lag, static_cast<long>(std::ceil(max_tdoa_s * fs)));
    long best = 0;
    double best_v = -1e300;
    for (long lag = -max_lag; lag <= max_lag; ++lag) {
        size_t idx = static_cast<size_t>(lag >= 0 ? lag : static_cast<long>(N) + lag);
        if (tmp[idx].real() > best_v) {
            best_v = tmp[idx].real();
            best = lag;
        }
    }
    // sub-sample refinement: continuous evaluation near the coarse peak, then
    // a parabola on the fine grid (a bare parabola on integer lags carries a
    // ~0.1-sample bias on the whitened peak's sinc shape)
    double fine_step = 0.25;
    double fine_best = static_cast<double>(best);
    double fine_v = best_v;
    for (double off = -1.0; off <= 1.0 + 1e-9; off += fine_step) {
        double lag = static_cast<double>(best) + off;
        double v = detail::phat_at(G, lag);
        if (v > fine_v) {
            fine_v = v;
            fine_best = lag;
        }
    }
    double y0 = detail::phat_at(G, fine_best - fine_step);
    double y1 = detail::phat_at(G, fine_best);
    double y2 = detail::phat_at(G, fine_best + fine_step);
    double denom = y0 - 2.0 * y1 + y2;
    double shift = std::abs(denom) < 1e-12 ? 0.0 : fine_step * 0.5 * (y0 - y2) / denom;
    shift = std::clamp(shift, -fine_step / 2.0, fine_step / 2.0);
    double lag = std::clamp(fine_best + shift, -static_cast<double>(max_lag),
                            static_cast<double>(max_lag));
    return lag / fs;
}

/// Far-field azimuth for a pair TDOA as returned by gcc_phat(ch_a, ch_b).
/// The cone ambiguity is resolved toward the front hemisphere.
inline double doa_from_tdoa(double tdoa_s, const Vec3& mic_a, const Vec3& mic_b,
                            double speed_of_sound) {
    Vec3 d = mic_a - mic_b;
    double L = std::hypot(d.x, d.y);
    if (L < 1e-9) throw std::invalid_argument("pair has no horizontal baseline");
    double u = std::clamp(tdoa_s * speed_of_sound / L, -1.0, 1.0);
    double phi = std::atan2(d.y, d.x);
    double alpha = std::acos(u);
    double c1 = phi + alpha, c2 = phi - alpha;
    double az = std::cos(c1) >= std::cos(c2) ? c1 : c2;
    return wrap_deg(rad2deg(az));
}

/// GCC-PHAT DoA over the whole array: per-pair TDOAs, then a least-squares
/// fit of the horizontal propagation direction. A single pair turns endfire
/// blind; mixing baseline orientations keeps the error flat across azimuths.
inline double gcc_phat_doa(const MultichannelFrame& frame, const ArrayGeometry& geom) {
    frame.validate();
    geom.validate();
    if (frame.n_mics() != geom.n_mics())
        throw std::invalid_argument("frame and geometry disagree on mic count");
    double mxx = 0.0, mxy = 0.0, myy = 0.0, vx = 0.0, vy = 0.0;
    for (size_t i = 0; i < geom.mics.size(); ++i)
        for (size_t j = i + 1; j < geom.mics.size(); ++j) {
            Vec3 d = geom.mics[i] - geom.mics[j];
            if (std::hypot(d.x, d.y) < 1e-9) continue;
            double bound = d.norm() / geom.speed_of_sound + 1.0 / frame.fs;
            double tau = gcc_phat(frame.samples[i], frame.samples[j], frame.fs, bound);
            double target = tau * geom.speed_of_sound;  // ideally s . d
            mxx += d.x * d.x;
            mxy += d.x * d.y;
            myy += d.y * d.y;
            vx += d.x * target;
            vy += d.y * target;
        }
    double det = mxx * myy - mxy * mxy;
    if (std::abs(det) < 1e-12) {
        // collinear horizontal baselines: fall back to the widest pair
        size_t bi = 0, bj = 1;
        double best = -1.0;
        for (size_t i = 0; i < geom.mics.size(); ++i)
            for (size_t j = i + 1; j < geom.mics.size(); ++j)
                if ((geom.mics[i] - geom.mics[j]).norm() > best) {
                    best = (geom.mics[i] - geom.mics[j]).norm();
                    bi = i;
                    bj = j;
                }
        double tdoa = gcc_phat(frame.samples[bi], frame.samples[bj], frame.fs,
                               best / geom.speed_of_sound * 1.05);
        return doa_from_tdoa(tdoa, geom.mics[bi], geom.mics[bj], geom.speed_of_sound);
    }
    double sx = (myy * vx - mxy * vy) / det;
    double sy = (mxx * vy - mxy * vx) / det;
    if (sx == 0.0 && sy == 0.0) return 0.0;
    return wrap_deg(rad2deg(std::atan2(sy, sx)));
}

struct SrpResult {
    double azimuth_deg = 0.0;
    double confidence = 0.0;  // peak height in standard deviations above the mean
    bool low_confidence = true;
    std::vector<double> grid_deg;
    std::vector<double> response;
};

/// Steered response power: PHAT correlation of every mic pair sampled at the
/// pair's expected lag, summed over pairs on a 1 degree azimuth grid.
inline SrpResult srp_phat(const MultichannelFrame& frame, const ArrayGeometry& geom,
                          double grid_step_deg = 1.0, double confidence_threshold = 4.0) {
    frame.validate();
    geom.validate();
    if (frame.n_mics() != geom.n_mics())
        throw std::invalid_argument("frame and geometry disagree on mic count");
    if (grid_step_deg <= 0.0) throw std::invalid_argument("grid step must be positive");

    struct PairCurve {
        size_t i, j;
        std::vector<double> r;
    };
    std::vector<PairCurve> pairs;
    for (size_t i = 0; i < geom.mics.size(); ++i)
        for (size_t j = i + 1; j < geom.mics.size(); ++j)
            pairs.push_back({i, j, detail::phat_xcorr(frame.samples[i], frame.samples[j])});

    SrpResult out;
    for (double az = -180.0 + grid_step_deg; az <= 180.0 + 1e-9; az += grid_step_deg) {
        Vec3 s{std::cos(deg2rad(az)), std::sin(deg2rad(az)), 0.0};
        double acc = 0.0;
        for (const auto& p : pairs) {
            double tdoa = s.dot(geom.mics[p.i] - geom.mics[p.j]) / geom.speed_of_sound;
            acc += detail::sample_circular(p.r, tdoa * frame.fs);
        }
        out.grid_deg.push_back(az);
        out.response.push_back(acc);
    }
    size_t arg = 0;
    double mean = 0.0;
    for (size_t k = 0; k < out.response.size(); ++k) {
        mean += out.response[k];
        if (out.response[k] > out.response[arg]) arg = k;
    }
    mean /= static_cast<double>(out.response.size());
    double var = 0.0;
    for (double v : out.response) var += (v - mean) * (v - mean);
    double sd = std::sqrt(var / static_cast<double>(out.response.size()));
    out.azimuth_deg = out.grid_deg[arg];
    out.confidence = (out.response[arg] - mean) / (sd + 1e-12);
    out.low_confidence = out.confidence < confidence_threshold;
    return out;
}

/// Circular local maxima of a response curve, strongest first.
inline std::vector<size_t> peak_indices(const std::vector<double>& response) {
    size_t n = response.size();
    std::vector<size_t> peaks;
    for (size_t k = 0; k < n; ++k) {
        double prev = response[(k + n - 1) % n];
        double next = response[(k + 1) % n];
        if (response[k] > prev && response[k] >= next) peaks.push_back(k);
    }
    std::sort(peaks.begin(), peaks.end(),
              [&](size_t a, size_t b) { return response[a] > response[b]; });
    return peaks;
}

struct MusicParams {
    int fft_size = 512;
    int hop = 256;
    double f_min = 500.0;
    double f_max = 3500.0;
    double grid_step_deg = 1.0;
};

/// Narrowband MUSIC on the dominant frequency bin: covariance across STFT
/// snapshots, noise-subspace pseudospectrum scan, top-n peak pick.
inline std::vector<double> music(const MultichannelFrame& frame, const ArrayGeometry& geom,
                                 int n_sources, const MusicParams& params = {}) {
    frame.validate();
    geom.validate();
    if (frame.n_mics() != geom.n_mics())
        throw std::invalid_argument("frame and geometry disagree on mic count");
    if (n_sources < 0) throw std::invalid_argument("n_sources must be >= 0");
    if (n_sources == 0) return {};
    int M = frame.n_mics();
    if (n_sources >= M) throw std::invalid_argument("music needs n_sources < mic count");
    size_t nfft = static_cast<size_t>(params.fft_size);
    if (nfft == 0 || (nfft & (nfft - 1)) != 0 || params.hop <= 0)
        throw std::invalid_argument("fft_size must be a power of two, hop positive");
    if (frame.n_samples() < nfft) throw std::invalid_argument("frame shorter than fft_size");

    size_t n_snap = (frame.n_samples() - nfft) / static_cast<size_t>(params.hop) + 1;
    size_t k_lo = static_cast<size_t>(std::ceil(params.f_min * static_cast<double>(nfft) /
                                                frame.fs));
    size_t k_hi = static_cast<size_t>(std::floor(
        std::min(params.f_max, 0.45 * frame.fs) * static_cast<double>(nfft) / frame.fs));
    k_lo = std::max<size_t>(k_lo, 1);
    k_hi = std::min(k_hi, nfft / 2 - 1);
    if (k_lo > k_hi) throw std::invalid_argument("empty analysis band");

    // per-channel, per-snapshot spectra
    std::vector<std::vector<std::vector<std::complex<double>>>> spec(
        static_cast<size_t>(M));
    for (int m = 0; m < M; ++m) {
        spec[static_cast<size_t>(m)].resize(n_snap);
        for (size_t s = 0; s < n_snap; ++s) {
            std::vector<std::complex<double>> buf(nfft);
            size_t start = s * static_cast<size_t>(params.hop);
            for (size_t i = 0; i < nfft; ++i)
                buf[i] = frame.samples[static_cast<size_t>(m)][start + i];
            detail::fft_radix2(buf, false);
            spec[static_cast<size_t>(m)][s] = std::move(buf);
        }
    }
    size_t k_star = k_lo;
    double best_pow = -1.0;
    for (size_t k = k_lo; k <= k_hi; ++k) {
        double p = 0.0;
        for (int m = 0; m < M; ++m)
            for (size_t s = 0; s < n_snap; ++s)
                p += std::norm(spec[static_cast<size_t>(m)][s][k]);
        if (p > best_pow) {
            best_pow = p;
            k_star = k;
        }
    }
    double f_star = static_cast<double>(k_star) * frame.fs / static_cast<double>(nfft);

    std::vector<std::complex<double>> R(static_cast<size_t>(M) * M,
                                        std::complex<double>(0.0, 0.0));
    for (size_t s = 0; s < n_snap; ++s)
        for (int i = 0; i < M; ++i)
            for (int j = 0; j < M; ++j)
                R[static_cast<size_t>(i) * M + j] +=
                    spec[static_cast<size_t>(i)][s][k_star] *
                    std::conj(spec[static_cast<size_t>(j)][s][k_star]);
    for (auto& v : R) v /= static_cast<double>(n_snap);

    // real embedding [[Re, -Im], [Im, Re]] keeps projection powers intact
    int n2 = 2 * M;
    std::vector<double> A(static_cast<size_t>(n2) * n2, 0.0);
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < M; ++j) {
            double re = R[static_cast<size_t>(i) * M + j].real();
            double im = R[static_cast<size_t>(i) * M + j].imag();
            A[static_cast<size_t>(i) * n2 + j] = re;
            A[static_cast<size_t>(i + M) * n2 + (j + M)] = re;
            A[static_cast<size_t>(i) * n2 + (j + M)] = -im;
            A[static_cast<size_t>(i + M) * n2 + j] = im;
        }
    std::vector<double> V;
    detail::jacobi_eig(A, n2, V);
    std::vector<std::pair<double, int>> order;
    for (int i = 0; i < n2; ++i)
        order.push_back({A[static_cast<size_t>(i) * n2 + i], i});
    std::sort(order.begin(), order.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    // noise subspace: everything past the 2 * n_sources strongest real pairs
    std::vector<int> noise_cols;
    for (int i = 2 * n_sources; i < n2; ++i) noise_cols.push_back(order[static_cast<size_t>(i)].second);

    std::vector<double> grid, pspec;
    for (double az = -180.0 + params.grid_step_deg; az <= 180.0 + 1e-9;
         az += params.grid_step_deg) {
        std::vector<double> atil(static_cast<size_t>(n2));
        double scale = 1.0 / std::sqrt(static_cast<double>(M));
        for (int m = 0; m < M; ++m) {
            double ph = -2.0 * kPi * f_star *
                        propagation_delay(geom.mics[static_cast<size_t>(m)], az,
                                          geom.speed_of_sound);
            atil[static_cast<size_t>(m)] = scale * std::cos(ph);
            atil[static_cast<size_t>(m + M)] = scale * std::sin(ph);
        }
        double proj = 0.0;
        for (int col : noise_cols) {
            double dot = 0.0;
            for (int i = 0; i < n2; ++i)
                dot += V[static_cast<size_t>(i) * n2 + col] * atil[static_cast<size_t>(i)];
            proj += dot * dot;
        }
        grid.push_back(az);
        pspec.push_back(1.0 / (proj + 1e-12));
    }
    std::vector<size_t> peaks = peak_indices(pspec);
    std::vector<double> out;
    for (size_t k = 0; k < peaks.size() && out.size() < static_cast<size_t>(n_sources); ++k)
        out.push_back(grid[peaks[k]]);
    return out;
}

/// Least-squares split of the enhanced signal against the clean and noise
/// references; ratio of the clean component to everything else, capped at
/// +-60 dB.
inline double snr_db(const std::vector<double>& enhanced, const std::vector<double>& clean_ref,
                     const std::vector<double>& noise_ref) {
    if (enhanced.size() != clean_ref.size() || enhanced.size() != noise_ref.size() ||
        enhanced.empty())
        throw std::invalid_argument("snr_db wants equal-length nonempty signals");
    auto dot = [](const std::vector<double>& u, const std::vector<double>& w) {
        double s = 0.0;
        for (size_t i = 0; i < u.size(); ++i) s += u[i] * w[i];
        return s;
    };
    double cc = dot(clean_ref, clean_ref);
    if (cc == 0.0) return -60.0;
    double nn = dot(noise_ref, noise_ref);
    double cn = dot(clean_ref, noise_ref);
    double ce = dot(clean_ref, enhanced);
    double ne = dot(noise_ref, enhanced);
    double det = cc * nn - cn * cn;
    double a = det > 1e-12 * cc * nn ? (ce * nn - cn * ne) / det : ce / cc;
    double ps = a * a * cc;
    if (ps <= 0.0) return -60.0;
    double pr = 0.0;
    for (size_t i = 0; i < enhanced.size(); ++i) {
        double r = enhanced[i] - a * clean_ref[i];
        pr += r * r;
    }
    if (pr <= ps * 1e-6) return 60.0;
    return std::clamp(10.0 * std::log10(ps / pr), -60.0, 60.0);
}

/// Steering directions for a zone estimate: the center of every set bin, or
/// straight ahead when no zone is active.
inline std::vector<double> steer_from_zones(const ZoneLabel& zones, const BinConfig& config) {
    config.validate();
    if (zones.bits.size() != static_cast<size_t>(config.n_bins()))
        throw std::invalid_argument("zone label does not match the bin config");
    std::vector<double> out;
    for (size_t i = 0; i < zones.bits.size(); ++i)
        if (zones.bits[i]) out.push_back(config.center(static_cast<int>(i)));
    if (out.empty()) out.push_back(0.0);
    return out;
}

inline std::vector<double> white_signal(size_t n, Rng& rng) {
    std::vector<double> out(n);
    for (double& v : out) v = rng.normal();
    return out;
}

inline std::vector<double> tone_signal(size_t n, double freq_hz, double fs,
                                       double amplitude = 1.0) {
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i)
        out[i] = amplitude * std::sin(2.0 * kPi * freq_hz * static_cast<double>(i) / fs);
    return out;
}

}  // namespace azil
