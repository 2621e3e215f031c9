#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "azil/dataset.hpp"
#include "azil/dbscan.hpp"
#include "azil/metrics.hpp"
#include "azil/nn.hpp"
#include "azil/tensor.hpp"

namespace azil {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::map<std::string, Tensor> m, v;
    long step = 0;
};

inline void adam_step(ModelParams& mp, AdamState& st, const AdamConfig& cfg) {
    ++st.step;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
    for (auto& [name, p] : mp.params) {
        if (!p->requires_grad) continue;
        Tensor& m = st.m[name];
        Tensor& v = st.v[name];
        if (m.size() == 0) m = Tensor(p->value.shape);
        if (v.size() == 0) v = Tensor(p->value.shape);
        for (size_t i = 0; i < p->value.size(); ++i) {
            double g = p->grad.data[i];
            m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * g;
            v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * g * g;
            double mhat = m.data[i] / bc1;
            double vhat = v.data[i] / bc2;
            p->value.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

using ParamSnapshot = std::map<std::string, Tensor>;

inline ParamSnapshot snapshot(const ModelParams& mp) {
    ParamSnapshot out;
    for (const auto& [name, p] : mp.params) out[name] = p->value;
    return out;
}

inline void restore(ModelParams& mp, const ParamSnapshot& snap) {
    for (auto& [name, p] : mp.params) {
        auto it = snap.find(name);
        if (it == snap.end() || it->second.shape != p->value.shape)
            throw std::invalid_argument("snapshot does not match the model: " + name);
        p->value = it->second;
    }
}

struct TrainConfig {
    int epochs = 20;
    int batch_size = 64;
    double lr = 1e-3;
    uint64_t seed = 2711;
    std::string static_mode = "none";  // none | true_count | noisy | coco
    double perturb_fraction = 0.30;
};

struct TrainHistory {
    std::vector<double> train_loss, val_loss;
    int best_epoch = -1;
    double best_val = 0.0;
};

namespace detail {

inline std::vector<std::vector<size_t>> sequential_batches(size_t n, size_t batch_size) {
    std::vector<std::vector<size_t>> out;
    for (size_t start = 0; start < n; start += batch_size) {
        std::vector<size_t> idx;
        for (size_t i = start; i < std::min(n, start + batch_size); ++i) idx.push_back(i);
        out.push_back(std::move(idx));
    }
    return out;
}

// Epoch loop shared by every trainable model. make_loss builds the loss graph
// for the given indices, drawn from the train pool when training is true and
// from the validation pool otherwise. The model is left holding the weights
// of the epoch with the lowest validation loss.
template <typename LossFn>
TrainHistory run_training(ModelParams& mp, size_t n_train, size_t n_val,
                          const TrainConfig& cfg, LossFn&& make_loss) {
    if (n_train == 0 || n_val == 0) throw std::invalid_argument("empty split");
    if (cfg.epochs < 1 || cfg.batch_size < 1)
        throw std::invalid_argument("epochs and batch_size must be positive");

    AdamConfig ac;
    ac.lr = cfg.lr;
    AdamState st;
    TrainHistory hist;
    ParamSnapshot best;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng = Rng::stream(cfg.seed, "shuffle", static_cast<uint64_t>(epoch));
        double tsum = 0.0;
        size_t tn = 0;
        for (const auto& idx :
             epoch_batches(n_train, static_cast<size_t>(cfg.batch_size), shuffle_rng)) {
            for (auto& [name, p] : mp.params) p->zero_grad();
            Graph g;
            VarPtr loss = make_loss(g, idx, true);
            g.backward(loss);
            adam_step(mp, st, ac);
            tsum += loss->value.data[0] * static_cast<double>(idx.size());
            tn += idx.size();
        }

        double vsum = 0.0;
        for (const auto& idx :
             sequential_batches(n_val, static_cast<size_t>(cfg.batch_size))) {
            Graph g;
            vsum += make_loss(g, idx, false)->value.data[0] *
                    static_cast<double>(idx.size());
        }
        double vloss = vsum / static_cast<double>(n_val);
        hist.train_loss.push_back(tsum / static_cast<double>(tn));
        hist.val_loss.push_back(vloss);
        if (hist.best_epoch < 0 || vloss < hist.best_val) {
            hist.best_epoch = epoch;
            hist.best_val = vloss;
            best = snapshot(mp);
        }
    }
    restore(mp, best);
    return hist;
}

}  // namespace detail

// Localizer training. static_mode selects what feeds the fusion stage:
// nothing, the true shaped count, the true count with train-time uniform
// perturbation on a fraction of each batch, or a frozen counter's embedding.
inline TrainHistory train_halo(ModelParams& mp, const SplitDataset& ds,
                               const TrainConfig& cfg,
                               const ModelParams* coco = nullptr) {
    if (cfg.static_mode != "none" && cfg.static_mode != "true_count" &&
        cfg.static_mode != "noisy" && cfg.static_mode != "coco")
        throw std::invalid_argument("unknown static_mode: " + cfg.static_mode);
    if (cfg.static_mode == "coco" && coco == nullptr)
        throw std::invalid_argument("static_mode coco needs a trained counter");
    if (cfg.static_mode == "none" && mp.config.static_dim != 0)
        throw std::invalid_argument("static_mode none requires static_dim 0");

    std::vector<double> weights = class_weights(zone_labels_of(ds.train));
    int n_ch = mp.config.input_channels;
    Rng perturb_rng = Rng::stream(cfg.seed, "perturb");

    auto make_loss = [&, n_ch](Graph& g, const std::vector<size_t>& idx, bool training) {
        const auto& pool = training ? ds.train : ds.val;
        Batch b = make_batch(pool, idx, n_ch);
        VarPtr x = g.input(b.x);
        VarPtr probs;
        if (cfg.static_mode == "none") {
            probs = halo_forward(g, mp, x);
        } else if (cfg.static_mode == "coco") {
            Batch b4 = make_batch(pool, idx, coco->config.input_channels);
            probs = halo_coco_forward(g, mp, *coco, x, g.input(b4.x));
        } else {
            Tensor s = b.statics;
            if (cfg.static_mode == "noisy" && training)
                s = perturb_static(s, cfg.perturb_fraction, perturb_rng);
            probs = halo_forward(g, mp, x, g.input(s));
        }
        return g.weighted_bce(probs, b.zones, weights);
    };
    return detail::run_training(mp, ds.train.size(), ds.val.size(), cfg, make_loss);
}

inline TrainHistory train_coco(ModelParams& mp, const SplitDataset& ds,
                               const TrainConfig& cfg) {
    int n_ch = mp.config.input_channels;
    auto make_loss = [&, n_ch](Graph& g, const std::vector<size_t>& idx, bool training) {
        const auto& pool = training ? ds.train : ds.val;
        Batch b = make_batch(pool, idx, n_ch);
        auto [logits, d] = coco_forward(g, mp, g.input(b.x));
        (void)d;
        return g.softmax_ce(logits, b.counts);
    };
    return detail::run_training(mp, ds.train.size(), ds.val.size(), cfg, make_loss);
}

inline TrainHistory train_mlp_zones(ModelParams& mp, const SplitDataset& ds,
                                    const TrainConfig& cfg) {
    std::vector<double> weights = class_weights(zone_labels_of(ds.train));
    auto make_loss = [&](Graph& g, const std::vector<size_t>& idx, bool training) {
        const auto& pool = training ? ds.train : ds.val;
        Batch b = make_batch(pool, idx, 1);  // only for targets
        Tensor x = make_flat_azimuth_batch(pool, idx);
        VarPtr probs = g.sigmoid(mlp_forward(g, mp, g.input(x)));
        return g.weighted_bce(probs, b.zones, weights);
    };
    return detail::run_training(mp, ds.train.size(), ds.val.size(), cfg, make_loss);
}

inline TrainHistory train_mlp_counts(ModelParams& mp, const SplitDataset& ds,
                                     const TrainConfig& cfg) {
    auto make_loss = [&](Graph& g, const std::vector<size_t>& idx, bool training) {
        const auto& pool = training ? ds.train : ds.val;
        Batch b = make_batch(pool, idx, 1);
        Tensor x = make_flat_azimuth_batch(pool, idx);
        return g.softmax_ce(mlp_forward(g, mp, g.input(x)), b.counts);
    };
    return detail::run_training(mp, ds.train.size(), ds.val.size(), cfg, make_loss);
}

inline std::vector<ZoneLabel> predict_zones(const ModelParams& mp,
                                            const std::vector<SegmentExample>& pool,
                                            const std::string& static_mode,
                                            const ModelParams* coco = nullptr,
                                            double threshold = 0.5, int batch_size = 64) {
    std::vector<ZoneLabel> out;
    for (const auto& idx :
         detail::sequential_batches(pool.size(), static_cast<size_t>(batch_size))) {
        Batch b = make_batch(pool, idx, mp.config.input_channels);
        Graph g;
        VarPtr x = g.input(b.x);
        VarPtr probs;
        if (static_mode == "none") {
            probs = halo_forward(g, mp, x);
        } else if (static_mode == "coco") {
            Batch b4 = make_batch(pool, idx, coco->config.input_channels);
            probs = halo_coco_forward(g, mp, *coco, x, g.input(b4.x));
        } else {
            probs = halo_forward(g, mp, x, g.input(b.statics));
        }
        for (size_t bb = 0; bb < idx.size(); ++bb) {
            ZoneLabel z;
            for (int i = 0; i < mp.config.n_bins; ++i)
                z.bits.push_back(probs->value.at(i, static_cast<int>(bb)) > threshold);
            out.push_back(std::move(z));
        }
    }
    return out;
}

inline std::vector<int> predict_counts(const ModelParams& mp,
                                       const std::vector<SegmentExample>& pool,
                                       int batch_size = 64) {
    std::vector<int> out;
    for (const auto& idx :
         detail::sequential_batches(pool.size(), static_cast<size_t>(batch_size))) {
        Batch b = make_batch(pool, idx, mp.config.input_channels);
        Graph g;
        auto [logits, d] = coco_forward(g, mp, g.input(b.x));
        (void)d;
        for (size_t bb = 0; bb < idx.size(); ++bb) {
            int arg = 0;
            for (int c = 1; c < mp.config.n_classes; ++c)
                if (logits->value.at(c, static_cast<int>(bb)) >
                    logits->value.at(arg, static_cast<int>(bb)))
                    arg = c;
            out.push_back(arg);
        }
    }
    return out;
}

inline std::vector<ZoneLabel> predict_zones_mlp(const ModelParams& mp,
                                                const std::vector<SegmentExample>& pool,
                                                double threshold = 0.5,
                                                int batch_size = 64) {
    std::vector<ZoneLabel> out;
    int n_bins = static_cast<int>(pool.empty() ? 0 : pool[0].zones.bits.size());
    for (const auto& idx :
         detail::sequential_batches(pool.size(), static_cast<size_t>(batch_size))) {
        Tensor x = make_flat_azimuth_batch(pool, idx);
        Graph g;
        VarPtr probs = g.sigmoid(mlp_forward(g, mp, g.input(x)));
        for (size_t bb = 0; bb < idx.size(); ++bb) {
            ZoneLabel z;
            for (int i = 0; i < n_bins; ++i)
                z.bits.push_back(probs->value.at(i, static_cast<int>(bb)) > threshold);
            out.push_back(std::move(z));
        }
    }
    return out;
}

inline std::vector<SphericalDirection> example_orientation(const SegmentExample& ex) {
    std::vector<SphericalDirection> out;
    out.reserve(ex.raw_azimuth.size());
    for (size_t f = 0; f < ex.raw_azimuth.size(); ++f)
        out.push_back({ex.raw_azimuth[f], ex.raw_elevation[f]});
    return out;
}

inline std::vector<ZoneLabel> rule_zone_predictions(const std::vector<SegmentExample>& pool,
                                                    const BinConfig& bins,
                                                    const DbscanParams& params) {
    std::vector<ZoneLabel> out;
    out.reserve(pool.size());
    for (const auto& ex : pool)
        out.push_back(rule_localize(example_orientation(ex), ex.self_vad, bins, params));
    return out;
}

inline std::vector<int> rule_count_predictions(const std::vector<SegmentExample>& pool,
                                               const DbscanParams& params) {
    std::vector<int> out;
    out.reserve(pool.size());
    for (const auto& ex : pool)
        out.push_back(rule_count(example_orientation(ex), ex.self_vad, params));
    return out;
}

inline std::vector<int> counts_of(const std::vector<SegmentExample>& pool) {
    std::vector<int> out;
    out.reserve(pool.size());
    for (const auto& ex : pool) out.push_back(ex.count);
    return out;
}

}  // namespace azil
