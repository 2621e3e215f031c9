// Sequence models over head-orientation segments: a zone-localization
// network (conv summarizer, BiLSTM, temporal self-attention, static-feature
// fusion, per-zone sigmoid heads), a partner-count classifier sharing the
// trunk but using a temporal mean, a flat MLP baseline, and the stage-wise
// composition feeding the counter's penultimate embedding into the fusion
// block. Plus input normalization, static perturbation, and a
// finite-difference gradient checker.

#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "azil/rng.hpp"
#include "azil/tensor.hpp"

namespace azil {

struct ModelConfig {
    int input_channels = 2;  // az, el; count models add self_vad, speaker_vad
    int conv_blocks = 2;
    int conv_kernel = 5;
    int conv_channels = 32;  // F
    int lstm_hidden = 64;    // H
    int reduced_dim = 8;     // K, constrained to K < H/4
    int static_dim = 1;      // 0 none, 1 scalar count, embed_dim for fusion
    int head_hidden = 256;
    int n_bins = 6;
    int n_classes = 5;   // counting classes 0..4
    int embed_dim = 16;  // D, the counter's penultimate width

    void validate() const {
        if (input_channels < 1 || conv_blocks < 1 || conv_kernel < 1)
            throw std::invalid_argument("bad conv config");
        if (lstm_hidden < 1 || reduced_dim < 1 || n_bins < 1)
            throw std::invalid_argument("bad model dims");
        if (reduced_dim * 4 >= lstm_hidden)
            throw std::invalid_argument("reduced dim must satisfy K < H/4");
        if (static_dim < 0 || head_hidden < 1 || n_classes < 2 || embed_dim < 1)
            throw std::invalid_argument("bad head config");
    }

    /// Peripheral zones get the deeper two-hidden-layer heads.
    bool peripheral(int bin) const { return std::min(bin, n_bins - 1 - bin) < 2; }
};

struct ModelParams {
    ModelConfig config;
    uint64_t seed = 0;
    std::map<std::string, VarPtr> params;  // sorted names, deterministic sweeps

    VarPtr at(const std::string& name) const {
        auto it = params.find(name);
        if (it == params.end()) throw std::invalid_argument("unknown parameter " + name);
        return it->second;
    }

    size_t total_count() const {
        size_t n = 0;
        for (const auto& [_, p] : params) n += p->value.size();
        return n;
    }

    void freeze() {
        for (auto& [_, p] : params) {
            p->requires_grad = false;
            p->grad = Tensor();
        }
    }
};

namespace detail {

inline VarPtr init_param(ModelParams& mp, const std::string& name, std::vector<int> shape,
                         Rng& rng, int fan_in, int fan_out) {
    Tensor t(shape);
    double a = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& v : t.data) v = rng.uniform(-a, a);
    auto p = make_param(std::move(t));
    mp.params.emplace(name, p);
    return p;
}

inline VarPtr init_bias(ModelParams& mp, const std::string& name, int n, double fill = 0.0) {
    Tensor t({n});
    for (auto& v : t.data) v = fill;
    auto p = make_param(std::move(t));
    mp.params.emplace(name, p);
    return p;
}

inline void init_lstm(ModelParams& mp, const std::string& prefix, int in, int hidden, Rng& rng) {
    init_param(mp, prefix + ".w", {4 * hidden, in + hidden}, rng, in + hidden, hidden);
    // forget-gate bias starts open
    auto b = init_bias(mp, prefix + ".b", 4 * hidden);
    for (int i = hidden; i < 2 * hidden; ++i) b->value.data[i] = 1.0;
}

inline void init_trunk(ModelParams& mp, Rng& rng) {
    const auto& c = mp.config;
    int in = c.input_channels;
    for (int blk = 1; blk <= c.conv_blocks; ++blk) {
        std::string name = "conv" + std::to_string(blk);
        init_param(mp, name + ".w", {c.conv_channels, in, c.conv_kernel}, rng,
                   in * c.conv_kernel, c.conv_channels);
        init_bias(mp, name + ".b", c.conv_channels);
        in = c.conv_channels;
    }
    init_lstm(mp, "lstm_f", c.conv_channels, c.lstm_hidden, rng);
    init_lstm(mp, "lstm_r", c.conv_channels, c.lstm_hidden, rng);
}

}  // namespace detail

/// Localization model parameters.
inline ModelParams init_halo(const ModelConfig& config, uint64_t seed) {
    config.validate();
    ModelParams mp;
    mp.config = config;
    mp.seed = seed;
    Rng rng = Rng::stream(seed, "init");
    detail::init_trunk(mp, rng);

    int h = config.lstm_hidden, k = config.reduced_dim;
    detail::init_param(mp, "attn_q.w", {h, h}, rng, h, h);
    detail::init_bias(mp, "attn_q.b", h);
    detail::init_param(mp, "attn_k.w", {h, h}, rng, h, h);
    detail::init_bias(mp, "attn_k.b", h);
    detail::init_param(mp, "reduce.w", {k, h}, rng, h, k);
    detail::init_bias(mp, "reduce.b", k);

    int r = k + config.static_dim;
    detail::init_param(mp, "fuse1.w", {r, r}, rng, r, r);
    detail::init_bias(mp, "fuse1.b", r);
    detail::init_param(mp, "fuse2.w", {r, r}, rng, r, r);
    detail::init_bias(mp, "fuse2.b", r);

    int w = config.head_hidden;
    for (int i = 0; i < config.n_bins; ++i) {
        std::string head = "head" + std::to_string(i);
        detail::init_param(mp, head + ".l1.w", {w, r}, rng, r, w);
        detail::init_bias(mp, head + ".l1.b", w);
        if (config.peripheral(i)) {
            detail::init_param(mp, head + ".l2.w", {w, w}, rng, w, w);
            detail::init_bias(mp, head + ".l2.b", w);
        }
        detail::init_param(mp, head + ".out.w", {1, w}, rng, w, 1);
        detail::init_bias(mp, head + ".out.b", 1);
    }
    return mp;
}

/// Partner-count model parameters (expects vad-augmented input channels).
inline ModelParams init_coco(const ModelConfig& config, uint64_t seed) {
    config.validate();
    ModelParams mp;
    mp.config = config;
    mp.seed = seed;
    Rng rng = Rng::stream(seed, "init");
    detail::init_trunk(mp, rng);
    detail::init_param(mp, "clf1.w", {config.embed_dim, config.lstm_hidden}, rng,
                       config.lstm_hidden, config.embed_dim);
    detail::init_bias(mp, "clf1.b", config.embed_dim);
    detail::init_param(mp, "clf2.w", {config.n_classes, config.embed_dim}, rng,
                       config.embed_dim, config.n_classes);
    detail::init_bias(mp, "clf2.b", config.n_classes);
    return mp;
}

/// Flat segment-level baseline over the raw 150-frame azimuth vector.
/// Default widths land within 10% of 200k parameters.
inline ModelParams init_mlp(int input_len, int n_outputs, uint64_t seed, int h1 = 448,
                            int h2 = 320) {
    ModelParams mp;
    mp.config = ModelConfig{};
    mp.config.n_bins = n_outputs;
    mp.seed = seed;
    Rng rng = Rng::stream(seed, "init");
    detail::init_param(mp, "l1.w", {h1, input_len}, rng, input_len, h1);
    detail::init_bias(mp, "l1.b", h1);
    detail::init_param(mp, "l2.w", {h2, h1}, rng, h1, h2);
    detail::init_bias(mp, "l2.b", h2);
    detail::init_param(mp, "out.w", {n_outputs, h2}, rng, h2, n_outputs);
    detail::init_bias(mp, "out.b", n_outputs);
    return mp;
}

/// Per-channel standardization of one segment [channels, T] over its own
/// frames; a constant channel maps to zeros.
inline Tensor normalize_input(const Tensor& x) {
    if (x.shape.size() != 2) throw std::invalid_argument("normalize_input wants [C,T]");
    int c = x.dim(0), t = x.dim(1);
    if (t < 1) throw std::invalid_argument("empty segment");
    Tensor out({c, t});
    for (int i = 0; i < c; ++i) {
        double mean = 0.0;
        for (int j = 0; j < t; ++j) mean += x.at(i, j);
        mean /= t;
        double var = 0.0;
        for (int j = 0; j < t; ++j) {
            double d = x.at(i, j) - mean;
            var += d * d;
        }
        double sd = std::sqrt(var / t);
        if (sd < 1e-12) continue;  // leave the row zero
        for (int j = 0; j < t; ++j) out.at(i, j) = (x.at(i, j) - mean) / sd;
    }
    return out;
}

/// Conv(+ReLU)+maxpool stack: [C,B,T] -> [F,B,T'].
inline VarPtr feature_summarize(Graph& g, const ModelParams& mp, const VarPtr& x) {
    VarPtr h = x;
    for (int blk = 1; blk <= mp.config.conv_blocks; ++blk) {
        std::string name = "conv" + std::to_string(blk);
        h = g.conv1d_same(h, mp.at(name + ".w"), mp.at(name + ".b"));
        h = g.relu(h);
        h = g.maxpool_time(h, 2, 2);
    }
    return h;
}

namespace detail {

inline std::vector<VarPtr> lstm_scan(Graph& g, const ModelParams& mp, const std::string& prefix,
                                     const std::vector<VarPtr>& xs, bool reverse) {
    int h = mp.config.lstm_hidden;
    int b = xs.front()->value.dim(1);
    VarPtr hh = g.input(Tensor({h, b}));
    VarPtr cc = g.input(Tensor({h, b}));
    VarPtr w = mp.at(prefix + ".w");
    VarPtr bias = mp.at(prefix + ".b");
    std::vector<VarPtr> out(xs.size());
    for (size_t step = 0; step < xs.size(); ++step) {
        size_t t = reverse ? xs.size() - 1 - step : step;
        VarPtr gates = g.linear(w, g.concat_rows(xs[t], hh), bias);
        VarPtr ig = g.sigmoid(g.slice_rows(gates, 0, h));
        VarPtr fg = g.sigmoid(g.slice_rows(gates, h, 2 * h));
        VarPtr gg = g.tanh_(g.slice_rows(gates, 2 * h, 3 * h));
        VarPtr og = g.sigmoid(g.slice_rows(gates, 3 * h, 4 * h));
        cc = g.add(g.mul(fg, cc), g.mul(ig, gg));
        hh = g.mul(og, g.tanh_(cc));
        out[t] = hh;
    }
    return out;
}

}  // namespace detail

/// Bidirectional LSTM whose two passes are averaged per timestep:
/// h_t = (h_t^forward + h_t^reverse) / 2. Input and output are per-timestep
/// [F,B] / [H,B] columns.
inline std::vector<VarPtr> bilstm(Graph& g, const ModelParams& mp,
                                  const std::vector<VarPtr>& xs) {
    auto fwd = detail::lstm_scan(g, mp, "lstm_f", xs, false);
    auto rev = detail::lstm_scan(g, mp, "lstm_r", xs, true);
    std::vector<VarPtr> out(xs.size());
    for (size_t t = 0; t < xs.size(); ++t) out[t] = g.scale(g.add(fwd[t], rev[t]), 0.5);
    return out;
}

inline std::vector<VarPtr> split_time(Graph& g, const VarPtr& x) {
    int t = x->value.dim(2);
    std::vector<VarPtr> out(t);
    for (int i = 0; i < t; ++i) out[i] = g.time_slice(x, i);
    return out;
}

/// Temporal self-attention collapsed to one weight per timestep:
/// a = softmax_t(mean over query rows of QK^T / sqrt(H)), m = sum_t a_t h_t.
/// Returns (a [T,B], m [H,B]).
inline std::pair<VarPtr, VarPtr> self_attention(Graph& g, const ModelParams& mp,
                                                const std::vector<VarPtr>& hs) {
    int h = mp.config.lstm_hidden;
    VarPtr wq = mp.at("attn_q.w"), bq = mp.at("attn_q.b");
    VarPtr wk = mp.at("attn_k.w"), bk = mp.at("attn_k.b");
    std::vector<VarPtr> qs(hs.size()), scores(hs.size());
    for (size_t t = 0; t < hs.size(); ++t) qs[t] = g.linear(wq, hs[t], bq);
    VarPtr qbar = g.mean_vars(qs);
    double inv_sqrt_h = 1.0 / std::sqrt(static_cast<double>(h));
    for (size_t t = 0; t < hs.size(); ++t)
        scores[t] = g.rows_dot(qbar, g.linear(wk, hs[t], bk), inv_sqrt_h);
    VarPtr a = g.softmax_cols(g.vstack(scores));
    VarPtr m;
    for (size_t t = 0; t < hs.size(); ++t) {
        VarPtr term = g.mul_rowbcast(hs[t], g.row(a, static_cast<int>(t)));
        m = t == 0 ? term : g.add(m, term);
    }
    return {a, m};
}

/// Reduce the collapsed representation, fuse the static vector, normalize,
/// and run the shared fusion layers: r = fuse(normalize(concat(ReLU(Wm),
/// static))).
inline VarPtr fuse_static(Graph& g, const ModelParams& mp, const VarPtr& m,
                          const VarPtr& static_vec) {
    VarPtr p = g.relu(g.linear(mp.at("reduce.w"), m, mp.at("reduce.b")));
    VarPtr joined = p;
    if (mp.config.static_dim > 0) {
        if (static_vec == nullptr || static_vec->value.dim(0) != mp.config.static_dim ||
            static_vec->value.dim(1) != m->value.dim(1))
            throw std::invalid_argument("static vector dimension mismatch");
        joined = g.concat_rows(p, static_vec);
    }
    VarPtr r = g.l2_normalize_cols(joined);
    r = g.relu(g.linear(mp.at("fuse1.w"), r, mp.at("fuse1.b")));
    r = g.relu(g.linear(mp.at("fuse2.w"), r, mp.at("fuse2.b")));
    return r;
}

/// Per-zone sigmoid probabilities [n_bins, B] from normalized segment input
/// [C,B,T] and optional static features [static_dim, B].
inline VarPtr halo_forward(Graph& g, const ModelParams& mp, const VarPtr& x,
                           const VarPtr& static_vec = nullptr) {
    auto e = feature_summarize(g, mp, x);
    auto hs = bilstm(g, mp, split_time(g, e));
    auto [a, m] = self_attention(g, mp, hs);
    (void)a;
    VarPtr r = fuse_static(g, mp, m, static_vec);
    std::vector<VarPtr> logits(mp.config.n_bins);
    for (int i = 0; i < mp.config.n_bins; ++i) {
        std::string head = "head" + std::to_string(i);
        VarPtr h = g.relu(g.linear(mp.at(head + ".l1.w"), r, mp.at(head + ".l1.b")));
        if (mp.config.peripheral(i))
            h = g.relu(g.linear(mp.at(head + ".l2.w"), h, mp.at(head + ".l2.b")));
        logits[i] = g.linear(mp.at(head + ".out.w"), h, mp.at(head + ".out.b"));
    }
    return g.sigmoid(g.vstack(logits));
}

/// Count-class logits [C,B] plus the penultimate embedding d [D,B]. The
/// trunk matches the localizer but collapses time with a plain mean.
inline std::pair<VarPtr, VarPtr> coco_forward(Graph& g, const ModelParams& mp, const VarPtr& x) {
    auto e = feature_summarize(g, mp, x);
    auto hs = bilstm(g, mp, split_time(g, e));
    VarPtr m = g.mean_vars(hs);
    VarPtr d = g.relu(g.linear(mp.at("clf1.w"), m, mp.at("clf1.b")));
    VarPtr logits = g.linear(mp.at("clf2.w"), d, mp.at("clf2.b"));
    return {logits, d};
}

/// Stage-wise composition: the frozen counter supplies its penultimate
/// embedding as the localizer's static features. x_loc carries the base
/// channels, x_cnt the vad-augmented ones, over the same batch.
inline VarPtr halo_coco_forward(Graph& g, const ModelParams& halo, const ModelParams& coco,
                                const VarPtr& x_loc, const VarPtr& x_cnt) {
    if (halo.config.static_dim != coco.config.embed_dim)
        throw std::invalid_argument("fusion width must equal the counter's embedding width");
    auto [logits, d] = coco_forward(g, coco, x_cnt);
    (void)logits;
    return halo_forward(g, halo, x_loc, d);
}

/// MLP baseline on a flat input [L, B]; returns raw head outputs [n_out, B].
inline VarPtr mlp_forward(Graph& g, const ModelParams& mp, const VarPtr& x) {
    if (x->value.dim(0) != mp.at("l1.w")->value.dim(1))
        throw std::invalid_argument("mlp input length mismatch");
    VarPtr h = g.relu(g.linear(mp.at("l1.w"), x, mp.at("l1.b")));
    h = g.relu(g.linear(mp.at("l2.w"), h, mp.at("l2.b")));
    return g.linear(mp.at("out.w"), h, mp.at("out.b"));
}

/// Perturb exactly round(fraction * B) samples (columns) of a static batch
/// with uniform noise in [-1, 1] per entry.
inline Tensor perturb_static(const Tensor& batch_static, double fraction, Rng& rng) {
    if (batch_static.shape.size() != 2)
        throw std::invalid_argument("perturb_static wants [S,B]");
    if (fraction < 0.0 || fraction > 1.0) throw std::invalid_argument("fraction in [0,1]");
    int s = batch_static.dim(0), b = batch_static.dim(1);
    int k = static_cast<int>(std::lround(fraction * b));
    std::vector<int> idx(b);
    for (int i = 0; i < b; ++i) idx[i] = i;
    rng.shuffle(idx);
    Tensor out = batch_static;
    for (int j = 0; j < k; ++j)
        for (int i = 0; i < s; ++i) out.at(i, idx[j]) += rng.uniform(-1.0, 1.0);
    return out;
}

/// Max relative error between analytic gradients and central finite
/// differences, over every element of every parameter.
template <typename LossFn>
double grad_check(ModelParams& mp, LossFn loss_fn, double h = 1e-5) {
    for (auto& [_, p] : mp.params) p->zero_grad();
    {
        Graph g;
        VarPtr loss = loss_fn(g);
        g.backward(loss);
    }
    double worst = 0.0;
    for (auto& [name, p] : mp.params) {
        for (size_t i = 0; i < p->value.size(); ++i) {
            double saved = p->value.data[i];
            p->value.data[i] = saved + h;
            double up;
            {
                Graph g;
                up = loss_fn(g)->value.data[0];
            }
            p->value.data[i] = saved - h;
            double down;
            {
                Graph g;
                down = loss_fn(g)->value.data[0];
            }
            p->value.data[i] = saved;
            double numeric = (up - down) / (2.0 * h);
            double analytic = p->grad.data[i];
            double denom = std::max({1.0, std::abs(numeric), std::abs(analytic)});
            worst = std::max(worst, std::abs(numeric - analytic) / denom);
        }
    }
    return worst;
}

}  // namespace azil
