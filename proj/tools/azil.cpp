// Command-line front end: simulation, training, evaluation, rule baselines,
// beam-steering demos, gradient verification, threshold sweeps, and
// plot-ready exports. Exit codes: 0 success, 2 configuration error, 3 data
// error. AZIL_DATA_DIR sets the default data directory.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "azil/dbscan.hpp"
#include "azil/io.hpp"
#include "azil/metrics.hpp"
#include "azil/steering.hpp"
#include "azil/train.hpp"

namespace fs = std::filesystem;
using namespace azil;

namespace {

std::string data_root() {
    const char* env = std::getenv("AZIL_DATA_DIR");
    return env && *env ? env : "data";
}

std::string fixed6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::vector<SegmentExample> pool_from_dir(const std::string& dir, const DatasetConfig& dc) {
    std::vector<SegmentExample> pool;
    for (const auto& trace : load_sessions(dir)) {
        auto ex = examples_from_trace(trace, dc);
        pool.insert(pool.end(), ex.begin(), ex.end());
    }
    if (pool.empty())
        throw DataError("sessions in " + dir + " are shorter than one segment");
    return pool;
}

std::vector<SegmentExample> select_split(const std::vector<SegmentExample>& pool,
                                         const std::string& which, uint64_t seed) {
    if (which == "all") return pool;
    SplitDataset ds = split_examples(pool, seed);
    if (which == "train") return ds.train;
    if (which == "val") return ds.val;
    if (which == "test") return ds.test;
    throw ConfigError("unknown split '" + which + "' (expected train, val, test, or all)");
}

int static_dim_for(const std::string& mode, const ModelConfig& m) {
    if (mode == "none") return 0;
    if (mode == "coco") return m.embed_dim;
    return 1;  // true_count, noisy
}

ModelConfig counter_config(const RunConfig& cfg) {
    ModelConfig m = cfg.model;
    m.input_channels = 4;  // az, el, self vad, any-partner vad
    m.static_dim = 0;
    return m;
}

RunConfig config_or_defaults(const std::string& path) {
    return path.empty() ? RunConfig{} : load_run_config(path);
}

EvalReport count_report(const std::vector<int>& y, const std::vector<int>& yhat,
                        int n_classes) {
    auto onehot = [&](const std::vector<int>& v) {
        std::vector<ZoneLabel> out;
        out.reserve(v.size());
        for (int c : v) {
            ZoneLabel z;
            z.bits.assign(static_cast<size_t>(n_classes), 0);
            if (c >= 0 && c < n_classes) z.bits[static_cast<size_t>(c)] = 1;
            out.push_back(std::move(z));
        }
        return out;
    };
    EvalReport r = evaluate_multilabel(onehot(y), onehot(yhat));
    r.accuracy = multiclass_accuracy(y, yhat);
    return r;
}

std::vector<int> predict_counts_mlp(const ModelParams& mp,
                                    const std::vector<SegmentExample>& pool,
                                    int batch_size = 64) {
    std::vector<int> out;
    int n_out = mp.config.n_bins;  // init_mlp records its output width here
    for (const auto& idx :
         detail::sequential_batches(pool.size(), static_cast<size_t>(batch_size))) {
        Tensor x = make_flat_azimuth_batch(pool, idx);
        Graph g;
        VarPtr logits = mlp_forward(g, mp, g.input(x));
        for (size_t bb = 0; bb < idx.size(); ++bb) {
            int arg = 0;
            for (int c = 1; c < n_out; ++c)
                if (logits->value.at(c, static_cast<int>(bb)) >
                    logits->value.at(arg, static_cast<int>(bb)))
                    arg = c;
            out.push_back(arg);
        }
    }
    return out;
}

std::vector<double> to_double(const std::vector<int>& v) {
    return std::vector<double>(v.begin(), v.end());
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
    int sessions = 4;
    int group_size = 0;  // 0 = take from config
    uint64_t seed = 0;
    bool seed_given = false;
    std::string config_path, out_dir;
    bool gyro_jsonl = false;
};

int cmd_simulate(const SimulateArgs& a) {
    RunConfig cfg = config_or_defaults(a.config_path);
    uint64_t seed = a.seed_given ? a.seed : cfg.seed;
    SessionParams params = cfg.sim;
    if (a.group_size > 0) params.group_size = a.group_size;
    std::string out = a.out_dir.empty() ? data_root() : a.out_dir;
    fs::create_directories(out);

    for (int i = 0; i < a.sessions; ++i) {
        uint64_t s = session_seed_for(seed, static_cast<size_t>(i));
        SessionTrace trace = simulate_session(params, s);
        char name[48];
        std::snprintf(name, sizeof(name), "session_%04d.json", i);
        save_session((fs::path(out) / name).string(), trace);
        if (a.gyro_jsonl) {
            std::snprintf(name, sizeof(name), "session_%04d.gyro.jsonl", i);
            save_gyro_jsonl((fs::path(out) / name).string(), trace.gyro);
        }
    }
    std::cout << "wrote " << a.sessions << " session(s) to " << out << " (seed " << seed
              << ", group size " << params.group_size << ")\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string task = "halo";
    std::string config_path, data_dir, out_path;
    uint64_t seed = 0;
    bool seed_given = false;
};

int cmd_train(const TrainArgs& a) {
    RunConfig cfg = config_or_defaults(a.config_path);
    uint64_t seed = a.seed_given ? a.seed : cfg.seed;
    cfg.training.seed = seed;
    std::string data = a.data_dir.empty() ? data_root() : a.data_dir;

    auto pool = pool_from_dir(data, cfg.dataset_config());
    SplitDataset ds = split_examples(pool, seed);
    // With a handful of sessions the session-level split can leave a bucket
    // empty. Fall back so tiny smoke datasets still train, and say so.
    if (ds.train.empty()) {
        std::cerr << "warning: no training sessions after the split; training on all "
                  << pool.size() << " segments (split purity not meaningful)\n";
        ds.train = pool;
    }
    if (ds.val.empty()) {
        std::cerr << "warning: no validation sessions after the split; validating on the "
                     "training set\n";
        ds.val = ds.train;
    }

    Checkpoint ck;
    ck.task = a.task;
    ck.seed = seed;

    if (a.task == "halo" || a.task == "halo-coco") {
        TrainConfig tc = cfg.training;
        if (a.task == "halo-coco") tc.static_mode = "coco";
        ModelParams counter;
        bool fused = tc.static_mode == "coco";
        if (fused) {
            counter = init_coco(counter_config(cfg), seed);
            TrainHistory ch = train_coco(counter, ds, cfg.training);
            counter.freeze();
            ck.has_coco = true;
            ck.coco_config = counter.config;
            ck.coco_params = snapshot(counter);
            std::cout << "counter best val loss " << ch.best_val << " at epoch "
                      << ch.best_epoch << "\n";
        }
        ModelConfig mcfg = cfg.model;
        mcfg.static_dim = static_dim_for(tc.static_mode, cfg.model);
        ModelParams mp = init_halo(mcfg, seed);
        ck.history = train_halo(mp, ds, tc, fused ? &counter : nullptr);
        ck.config = mcfg;
        ck.params = snapshot(mp);
    } else if (a.task == "coco") {
        ModelParams mp = init_coco(counter_config(cfg), seed);
        ck.history = train_coco(mp, ds, cfg.training);
        ck.config = mp.config;
        ck.params = snapshot(mp);
    } else if (a.task == "mlp") {
        int t = static_cast<int>(pool.front().raw_azimuth.size());
        ModelParams mp = init_mlp(t, cfg.bins.n_bins(), seed);
        ck.history = train_mlp_zones(mp, ds, cfg.training);
        ck.config = mp.config;
        ck.params = snapshot(mp);
    } else if (a.task == "mlp-count") {
        int t = static_cast<int>(pool.front().raw_azimuth.size());
        ModelParams mp = init_mlp(t, cfg.model.n_classes, seed);
        ck.history = train_mlp_counts(mp, ds, cfg.training);
        ck.config = mp.config;
        ck.params = snapshot(mp);
    } else {
        throw ConfigError("unknown task '" + a.task +
                          "' (expected halo, coco, halo-coco, mlp, or mlp-count)");
    }

    std::string out =
        a.out_path.empty() ? (fs::path(data) / ("checkpoint_" + a.task + ".json")).string()
                           : a.out_path;
    save_checkpoint(out, ck);
    std::cout << a.task << ": " << ds.train.size() << " train / " << ds.val.size()
              << " val segments, best val loss " << ck.history.best_val << " at epoch "
              << ck.history.best_epoch << "\nwrote " << out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string checkpoint, config_path, data_dir, split = "test";
    std::string out_path, csv_path, agreement_path;
    uint64_t seed = 0;
    bool seed_given = false;
};

int cmd_eval(const EvalArgs& a) {
    Checkpoint ck = load_checkpoint(a.checkpoint);
    RunConfig cfg = config_or_defaults(a.config_path);
    uint64_t seed = a.seed_given ? a.seed : cfg.seed;
    std::string data = a.data_dir.empty() ? data_root() : a.data_dir;

    auto pool = pool_from_dir(data, cfg.dataset_config());
    auto part = select_split(pool, a.split, seed);
    if (part.empty()) throw DataError("selected split '" + a.split + "' has no segments");

    bool zone_task = ck.task == "halo" || ck.task == "halo-coco" || ck.task == "mlp";
    EvalReport report;
    AgreementReport agreement;
    bool have_agreement = false;

    if (zone_task && ck.task != "mlp" && ck.config.n_bins != cfg.bins.n_bins())
        throw ConfigError("checkpoint has " + std::to_string(ck.config.n_bins) +
                          " bins but the config declares " + std::to_string(cfg.bins.n_bins()));

    if (ck.task == "halo" || ck.task == "halo-coco") {
        ModelParams mp = model_from_parts(ck.config, ck.seed, ck.params);
        ModelParams counter;
        const ModelParams* cp = nullptr;
        std::string mode = "none";
        if (ck.has_coco) {
            counter = model_from_parts(ck.coco_config, ck.seed, ck.coco_params);
            cp = &counter;
            mode = "coco";
        } else if (ck.config.static_dim == 1) {
            mode = "true_count";
        } else if (ck.config.static_dim != 0) {
            throw DataError("checkpoint static_dim " + std::to_string(ck.config.static_dim) +
                            " has no stored counter to drive it");
        }
        auto yhat = predict_zones(mp, part, mode, cp);
        report = evaluate_multilabel(zone_labels_of(part), yhat);
    } else if (ck.task == "mlp") {
        ModelParams mp = model_from_parts(ck.config, ck.seed, ck.params);
        auto yhat = predict_zones_mlp(mp, part);
        report = evaluate_multilabel(zone_labels_of(part), yhat);
    } else if (ck.task == "coco" || ck.task == "mlp-count") {
        ModelParams mp = model_from_parts(ck.config, ck.seed, ck.params);
        std::vector<int> preds = ck.task == "coco" ? predict_counts(mp, part)
                                                   : predict_counts_mlp(mp, part);
        std::vector<int> truth = counts_of(part);
        int n_classes = ck.task == "coco" ? ck.config.n_classes : ck.config.n_bins;
        report = count_report(truth, preds, n_classes);
        agreement = bland_altman(to_double(truth), to_double(preds));
        have_agreement = true;
    } else {
        throw DataError("checkpoint task '" + ck.task + "' is not evaluable");
    }

    std::string out =
        a.out_path.empty() ? (fs::path(data) / "report.json").string() : a.out_path;
    write_text_file(out, eval_report_to_json(report).dump(2) + "\n");
    if (!a.csv_path.empty()) {
        const BinConfig* bins = zone_task ? &cfg.bins : nullptr;
        write_text_file(a.csv_path, eval_report_csv(report, bins));
    }
    if (!a.agreement_path.empty()) {
        if (!have_agreement)
            throw ConfigError("--agreement only applies to counting checkpoints");
        write_text_file(a.agreement_path, agreement_to_json(agreement).dump(2) + "\n");
    }

    std::cout << ck.task << " on " << part.size() << " " << a.split
              << " segments: macro F1 " << fixed6(report.macro_f1);
    if (have_agreement)
        std::cout << ", accuracy " << fixed6(report.accuracy) << ", MAE "
                  << fixed6(agreement.mae);
    std::cout << "\nwrote " << out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct BaselineArgs {
    std::string task = "localize";
    std::string in_dir, out_path, config_path, split = "all";
    double eps = 8.0;
    int min_pts = 10;
    uint64_t seed = 0;
    bool seed_given = false;
};

int cmd_baseline(const BaselineArgs& a) {
    RunConfig cfg = config_or_defaults(a.config_path);
    uint64_t seed = a.seed_given ? a.seed : cfg.seed;
    std::string data = a.in_dir.empty() ? data_root() : a.in_dir;
    auto pool = pool_from_dir(data, cfg.dataset_config());
    auto part = select_split(pool, a.split, seed);
    if (part.empty()) throw DataError("selected split '" + a.split + "' has no segments");

    DbscanParams dp;
    dp.eps = a.eps;
    dp.min_pts = a.min_pts;
    if (dp.eps <= 0 || dp.min_pts < 1)
        throw ConfigError("--eps must be positive and --min-pts at least 1");

    json doc;
    doc["task"] = a.task;
    doc["eps"] = dp.eps;
    doc["min_pts"] = dp.min_pts;
    doc["segments"] = part.size();

    EvalReport report;
    if (a.task == "localize") {
        auto yhat = rule_zone_predictions(part, cfg.bins, dp);
        report = evaluate_multilabel(zone_labels_of(part), yhat);
    } else if (a.task == "count") {
        auto yhat = rule_count_predictions(part, dp);
        auto truth = counts_of(part);
        report = count_report(truth, yhat, cfg.model.n_classes);
        doc["agreement"] = agreement_to_json(bland_altman(to_double(truth), to_double(yhat)));
    } else {
        throw ConfigError("unknown task '" + a.task + "' (expected localize or count)");
    }
    doc["report"] = eval_report_to_json(report);

    std::string out = a.out_path.empty()
                          ? (fs::path(data) / ("baseline_" + a.task + ".json")).string()
                          : a.out_path;
    write_text_file(out, doc.dump(2) + "\n");
    std::cout << "rule " << a.task << " on " << part.size() << " segments: macro F1 "
              << fixed6(report.macro_f1);
    if (a.task == "count") std::cout << ", accuracy " << fixed6(report.accuracy);
    std::cout << "\nwrote " << out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct SteerArgs {
    std::string scene_path, out_path = "results.csv";
    std::vector<std::string> methods = {"frontal", "zones", "music", "gccphat", "srp"};
};

int cmd_steer(const SteerArgs& a) {
    SceneSpec spec = load_scene(a.scene_path);
    ArrayGeometry geom = scene_geometry(spec);
    std::string base = fs::path(a.scene_path).parent_path().string();
    if (base.empty()) base = ".";

    Rng rng = Rng::stream(spec.seed, "scene");
    auto sources = scene_sources(spec, rng, base);
    Scene sc = synthesize_scene(sources, geom, spec.noise_level, rng);
    const std::vector<double>& clean = sc.clean[0];

    auto das_snr = [&](double az) {
        return snr_db(delay_and_sum(sc.mixture, geom, az), clean, sc.noise);
    };

    std::string csv = "method,snr_db\n";
    auto emit = [&](const std::string& method, double az, double snr, bool has_az) {
        csv += method + "," + fixed6(snr) + "\n";
        std::cout << method;
        if (has_az) std::cout << " (steered to " << fixed6(az) << " deg)";
        std::cout << ": " << fixed6(snr) << " dB\n";
    };

    emit("raw", 0.0, snr_db(sc.mixture.samples[0], clean, sc.noise), false);
    for (const std::string& m : a.methods) {
        if (m == "frontal") {
            emit(m, 0.0, das_snr(0.0), true);
        } else if (m == "zones") {
            auto centers = steer_from_zones(scene_zone_label(spec), spec.bins);
            double best_az = centers.front(), best = das_snr(centers.front());
            for (size_t i = 1; i < centers.size(); ++i) {
                double s = das_snr(centers[i]);
                if (s > best) {
                    best = s;
                    best_az = centers[i];
                }
            }
            emit(m, best_az, best, true);
        } else if (m == "gccphat") {
            double az = gcc_phat_doa(sc.mixture, geom);
            emit(m, az, das_snr(az), true);
        } else if (m == "srp") {
            double az = srp_phat(sc.mixture, geom).azimuth_deg;
            emit(m, az, das_snr(az), true);
        } else if (m == "music") {
            auto peaks = music(sc.mixture, geom, 1);
            double az = peaks.empty() ? 0.0 : peaks.front();
            emit(m, az, das_snr(az), true);
        } else {
            throw ConfigError("unknown method '" + m +
                              "' (expected frontal, zones, music, gccphat, srp)");
        }
    }
    write_text_file(a.out_path, csv);
    std::cout << "wrote " << a.out_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct GradcheckArgs {
    uint64_t seed = 7;
    double tolerance = 1e-4;
    int per_tensor = 4;
};

double check_model(ModelParams& mp, const std::function<VarPtr(Graph&)>& make_loss, Rng& rng,
                   int per_tensor) {
    // keep ReLU inputs away from their kinks, where finite differences lie
    for (auto& [name, p] : mp.params)
        for (double& v : p->value.data) v += rng.uniform(-0.05, 0.05);

    for (auto& [name, p] : mp.params) p->zero_grad();
    {
        Graph g;
        g.backward(make_loss(g));
    }

    const double h = 1e-5;
    double worst = 0.0;
    for (auto& [name, p] : mp.params) {
        for (int k = 0; k < per_tensor; ++k) {
            size_t i = static_cast<size_t>(rng.below(p->value.size()));
            double keep = p->value.data[i];
            p->value.data[i] = keep + h;
            Graph gp;
            double up = make_loss(gp)->value.data[0];
            p->value.data[i] = keep - h;
            Graph gm;
            double dn = make_loss(gm)->value.data[0];
            p->value.data[i] = keep;
            double fd = (up - dn) / (2.0 * h);
            double an = p->grad.data[i];
            double rel = std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

int cmd_gradcheck(const GradcheckArgs& a) {
    Rng rng = Rng::stream(a.seed, "gradcheck");

    ModelConfig zc;
    zc.input_channels = 2;
    zc.conv_blocks = 1;
    zc.conv_kernel = 3;
    zc.conv_channels = 6;
    zc.lstm_hidden = 16;
    zc.reduced_dim = 3;
    zc.static_dim = 0;
    zc.head_hidden = 8;
    zc.n_bins = 4;
    zc.n_classes = 3;
    zc.embed_dim = 4;

    const int b = 3, t = 20;
    auto rand_tensor = [&](std::vector<int> shape) {
        Tensor x(std::move(shape));
        for (double& v : x.data) v = rng.normal();
        return x;
    };
    Tensor x2 = rand_tensor({zc.input_channels, b, t});
    Tensor x4 = rand_tensor({4, b, t});
    Tensor targets({zc.n_bins, b});
    for (double& v : targets.data) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
    std::vector<double> weights(static_cast<size_t>(zc.n_bins), 1.0);
    std::vector<int> labels(static_cast<size_t>(b));
    for (int& l : labels) l = static_cast<int>(rng.below(static_cast<uint64_t>(zc.n_classes)));

    struct Row {
        std::string name;
        double err;
    };
    std::vector<Row> rows;

    {
        ModelParams mp = init_halo(zc, a.seed);
        rows.push_back({"localizer", check_model(
                                         mp,
                                         [&](Graph& g) {
                                             return g.weighted_bce(
                                                 halo_forward(g, mp, g.input(x2)), targets,
                                                 weights);
                                         },
                                         rng, a.per_tensor)});
    }
    {
        ModelConfig cc = zc;
        cc.input_channels = 4;
        ModelParams mp = init_coco(cc, a.seed + 1);
        rows.push_back({"counter", check_model(
                                       mp,
                                       [&](Graph& g) {
                                           return g.softmax_ce(
                                               coco_forward(g, mp, g.input(x4)).first, labels);
                                       },
                                       rng, a.per_tensor)});
    }
    {
        ModelConfig hc = zc;
        hc.static_dim = hc.embed_dim;
        ModelParams halo = init_halo(hc, a.seed + 2);
        ModelConfig cc = zc;
        cc.input_channels = 4;
        ModelParams counter = init_coco(cc, a.seed + 3);
        // jitter and check the localizer half of the fused graph; the frozen
        // counter still participates in the forward pass
        counter.freeze();
        rows.push_back({"fused", check_model(
                                     halo,
                                     [&](Graph& g) {
                                         return g.weighted_bce(
                                             halo_coco_forward(g, halo, counter, g.input(x2),
                                                               g.input(x4)),
                                             targets, weights);
                                     },
                                     rng, a.per_tensor)});
    }
    {
        ModelParams mp = init_mlp(15, zc.n_classes, a.seed + 4, 12, 10);
        Tensor xm = rand_tensor({15, b});
        rows.push_back({"mlp", check_model(
                                   mp,
                                   [&](Graph& g) {
                                       return g.softmax_ce(mlp_forward(g, mp, g.input(xm)),
                                                           labels);
                                   },
                                   rng, a.per_tensor)});
    }

    bool ok = true;
    for (const auto& r : rows) {
        bool pass = r.err < a.tolerance;
        ok = ok && pass;
        std::printf("%-10s max relative error %.3e  %s\n", r.name.c_str(), r.err,
                    pass ? "ok" : "FAIL");
    }
    if (!ok) {
        std::cerr << "gradient check failed (tolerance " << a.tolerance << ")\n";
        return 1;
    }
    return 0;
}

// ---------------------------------------------------------------------------

struct SweepArgs {
    std::string config_path, data_dir, out_path;
    std::vector<double> thresholds = {0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0};
    double eps = 8.0;
};

int cmd_sweep_threshold(const SweepArgs& a) {
    RunConfig cfg = config_or_defaults(a.config_path);
    std::string data = a.data_dir.empty() ? data_root() : a.data_dir;
    auto sessions = load_sessions(data);

    std::string csv = "threshold_s,mean_target,rule_count_accuracy,rule_count_mae\n";
    for (double v : a.thresholds) {
        if (v < 0) throw ConfigError("thresholds must be non-negative");
        DatasetConfig dc = cfg.dataset_config();
        dc.target_shaping = true;
        dc.shaping_threshold_s = v;

        std::vector<SegmentExample> pool;
        for (const auto& trace : sessions) {
            auto ex = examples_from_trace(trace, dc);
            pool.insert(pool.end(), ex.begin(), ex.end());
        }
        if (pool.empty()) throw DataError("sessions too short to form segments");

        DbscanParams dp;
        dp.eps = a.eps;
        dp.min_pts =
            std::max(1, DbscanParams::min_pts_for_threshold(v, dc.frame_rate_hz));
        auto preds = rule_count_predictions(pool, dp);
        auto truth = counts_of(pool);

        double acc = multiclass_accuracy(truth, preds);
        double mae = 0.0, mean_target = 0.0;
        for (size_t i = 0; i < truth.size(); ++i) {
            mae += std::abs(truth[i] - preds[i]);
            mean_target += truth[i];
        }
        mae /= static_cast<double>(truth.size());
        mean_target /= static_cast<double>(truth.size());

        csv += fixed6(v) + "," + fixed6(mean_target) + "," + fixed6(acc) + "," + fixed6(mae) +
               "\n";
        std::cout << "threshold " << fixed6(v) << " s: mean target " << fixed6(mean_target)
                  << ", rule accuracy " << fixed6(acc) << ", MAE " << fixed6(mae) << "\n";
    }

    std::string out = a.out_path.empty()
                          ? (fs::path(data) / "threshold_sweep.csv").string()
                          : a.out_path;
    write_text_file(out, csv);
    std::cout << "wrote " << out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct ExportArgs {
    std::string config_path, out_dir;
};

struct SeriesStats {
    double mean = 0.0, sd = 0.0;
};

SeriesStats stats_of(const std::vector<double>& v) {
    SeriesStats s;
    if (v.empty()) return s;
    for (double x : v) s.mean += x;
    s.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        double acc = 0.0;
        for (double x : v) acc += (x - s.mean) * (x - s.mean);
        s.sd = std::sqrt(acc / static_cast<double>(v.size() - 1));
    }
    return s;
}

int cmd_export(const ExportArgs& a) {
    RunConfig cfg = config_or_defaults(a.config_path);
    std::string out = a.out_dir.empty() ? (fs::path(data_root()) / "export").string()
                                        : a.out_dir;
    fs::create_directories(out);

    std::vector<uint64_t> seeds = cfg.seed_list();
    int n_bins = cfg.bins.n_bins();
    std::map<std::string, std::vector<EvalReport>> reports;  // method -> per-seed

    for (uint64_t seed : seeds) {
        std::vector<SegmentExample> pool;
        for (int i = 0; i < cfg.sessions; ++i) {
            SessionTrace trace =
                simulate_session(cfg.sim, session_seed_for(seed, static_cast<size_t>(i)));
            auto ex = examples_from_trace(trace, cfg.dataset_config());
            pool.insert(pool.end(), ex.begin(), ex.end());
        }
        SplitDataset ds = split_examples(pool, seed);
        if (ds.train.empty() || ds.val.empty() || ds.test.empty())
            throw ConfigError("config yields an empty split; increase sessions or duration");

        TrainConfig tc = cfg.training;
        tc.seed = seed;
        ModelParams counter;
        bool fused = tc.static_mode == "coco";
        if (fused) {
            counter = init_coco(counter_config(cfg), seed);
            train_coco(counter, ds, tc);
            counter.freeze();
        }
        ModelConfig mcfg = cfg.model;
        mcfg.static_dim = static_dim_for(tc.static_mode, cfg.model);
        ModelParams mp = init_halo(mcfg, seed);
        train_halo(mp, ds, tc, fused ? &counter : nullptr);

        auto y = zone_labels_of(ds.test);
        EvalReport model_r = evaluate_multilabel(
            y, predict_zones(mp, ds.test, tc.static_mode, fused ? &counter : nullptr));
        EvalReport rule_r =
            evaluate_multilabel(y, rule_zone_predictions(ds.test, cfg.bins, DbscanParams{}));
        reports["model"].push_back(model_r);
        reports["rule"].push_back(rule_r);

        for (const auto& [method, r] :
             {std::pair<std::string, const EvalReport*>{"model", &model_r},
              {"rule", &rule_r}}) {
            std::string path =
                (fs::path(out) / ("report_" + method + "_" + std::to_string(seed) + ".json"))
                    .string();
            write_text_file(path, eval_report_to_json(*r).dump(2) + "\n");
        }
        std::cout << "seed " << seed << ": model macro F1 " << fixed6(model_r.macro_f1)
                  << ", rule macro F1 " << fixed6(rule_r.macro_f1) << " ("
                  << ds.train.size() << "/" << ds.val.size() << "/" << ds.test.size()
                  << " train/val/test)\n";
    }

    std::string summary = "method,metric,mean,std\n";
    for (const auto& [method, rs] : reports) {
        std::vector<double> f1, ham;
        for (const auto& r : rs) {
            f1.push_back(r.macro_f1);
            ham.push_back(r.hamming);
        }
        SeriesStats sf = stats_of(f1), sh = stats_of(ham);
        summary += method + ",macro_f1," + fixed6(sf.mean) + "," + fixed6(sf.sd) + "\n";
        summary += method + ",hamming," + fixed6(sh.mean) + "," + fixed6(sh.sd) + "\n";
        std::cout << method << ": macro F1 " << fixed6(sf.mean) << " +/- " << fixed6(sf.sd)
                  << ", hamming " << fixed6(sh.mean) << " +/- " << fixed6(sh.sd) << "\n";
    }
    write_text_file((fs::path(out) / "summary.csv").string(), summary);

    std::string bins_csv =
        "method,bin,zone,f1_mean,f1_std,accuracy_mean,accuracy_std,support_total\n";
    for (const auto& [method, rs] : reports) {
        for (int i = 0; i < n_bins; ++i) {
            std::vector<double> f1, acc;
            int support = 0;
            for (const auto& r : rs) {
                f1.push_back(r.logitwise_f1[static_cast<size_t>(i)]);
                acc.push_back(r.logitwise_accuracy[static_cast<size_t>(i)]);
                support += r.support[static_cast<size_t>(i)];
            }
            SeriesStats sf = stats_of(f1), sa = stats_of(acc);
            bins_csv += method + "," + std::to_string(i) + ",[" +
                        fixed6(cfg.bins.edges[static_cast<size_t>(i)]) + ";" +
                        fixed6(cfg.bins.edges[static_cast<size_t>(i) + 1]) + ")," +
                        fixed6(sf.mean) + "," + fixed6(sf.sd) + "," + fixed6(sa.mean) + "," +
                        fixed6(sa.sd) + "," + std::to_string(support) + "\n";
        }
    }
    write_text_file((fs::path(out) / "bins.csv").string(), bins_csv);
    std::cout << "wrote " << (fs::path(out) / "summary.csv").string() << " and "
              << (fs::path(out) / "bins.csv").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acoustic zone-of-interest toolkit: head-orientation simulation, "
                 "sequence models, rule baselines, and beam-steering demos"};
    app.require_subcommand(1);
    bool deterministic = false;
    app.add_flag("--deterministic", deterministic,
                 "Single-threaded bit-reproducible execution (always on; flag "
                 "documents intent)");

    SimulateArgs sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Generate synthetic conversation sessions");
    sim_cmd->fallthrough();
    sim_cmd->add_option("--sessions", sim.sessions, "Number of sessions")
        ->check(CLI::PositiveNumber);
    sim_cmd->add_option("--group-size", sim.group_size, "Participants including the wearer");
    auto* sim_seed = sim_cmd->add_option("--seed", sim.seed, "Root seed");
    sim_cmd->add_option("--config", sim.config_path, "Run config JSON");
    sim_cmd->add_option("--out", sim.out_dir, "Output directory (default AZIL_DATA_DIR)");
    sim_cmd->add_flag("--gyro-jsonl", sim.gyro_jsonl, "Also write per-session gyro JSON Lines");

    TrainArgs tr;
    auto* tr_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
    tr_cmd->fallthrough();
    tr_cmd->add_option("--task", tr.task, "halo | coco | halo-coco | mlp | mlp-count");
    tr_cmd->add_option("--config", tr.config_path, "Run config JSON");
    tr_cmd->add_option("--data", tr.data_dir, "Session directory (default AZIL_DATA_DIR)");
    auto* tr_seed = tr_cmd->add_option("--seed", tr.seed, "Training seed");
    tr_cmd->add_option("--out", tr.out_path, "Checkpoint path");

    EvalArgs ev;
    auto* ev_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
    ev_cmd->fallthrough();
    ev_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint JSON")->required();
    ev_cmd->add_option("--config", ev.config_path, "Run config JSON");
    ev_cmd->add_option("--data", ev.data_dir, "Session directory (default AZIL_DATA_DIR)");
    ev_cmd->add_option("--split", ev.split, "train | val | test | all");
    auto* ev_seed = ev_cmd->add_option("--seed", ev.seed, "Split seed");
    ev_cmd->add_option("--out", ev.out_path, "Report JSON path");
    ev_cmd->add_option("--csv", ev.csv_path, "Per-bin CSV path");
    ev_cmd->add_option("--agreement", ev.agreement_path, "Agreement JSON (counting tasks)");

    BaselineArgs bl;
    auto* bl_cmd = app.add_subcommand("baseline", "Run the clustering rule baseline");
    bl_cmd->fallthrough();
    bl_cmd->add_option("--task", bl.task, "localize | count");
    bl_cmd->add_option("--in", bl.in_dir, "Session directory (default AZIL_DATA_DIR)");
    bl_cmd->add_option("--eps", bl.eps, "Neighborhood radius, degrees");
    bl_cmd->add_option("--min-pts", bl.min_pts, "Density threshold, frames");
    bl_cmd->add_option("--config", bl.config_path, "Run config JSON");
    bl_cmd->add_option("--split", bl.split, "train | val | test | all");
    auto* bl_seed = bl_cmd->add_option("--seed", bl.seed, "Split seed");
    bl_cmd->add_option("--out", bl.out_path, "Results JSON path");

    SteerArgs st;
    auto* st_cmd = app.add_subcommand("steer", "Beamform a synthetic scene and score SNR");
    st_cmd->fallthrough();
    st_cmd->add_option("--scene", st.scene_path, "Scene JSON")->required();
    st_cmd->add_option("--methods", st.methods, "Comma-separated steering methods")
        ->delimiter(',');
    st_cmd->add_option("--out", st.out_path, "Results CSV path");

    GradcheckArgs gc;
    auto* gc_cmd =
        app.add_subcommand("gradcheck", "Verify gradients against finite differences");
    gc_cmd->fallthrough();
    gc_cmd->add_option("--seed", gc.seed, "Seed for the probe models");
    gc_cmd->add_option("--tolerance", gc.tolerance, "Max relative error allowed");
    gc_cmd->add_option("--samples", gc.per_tensor, "Probed elements per tensor");

    SweepArgs sw;
    auto* sw_cmd = app.add_subcommand(
        "sweep-threshold", "Sweep the cumulative voice-activity counting threshold");
    sw_cmd->fallthrough();
    sw_cmd->add_option("--config", sw.config_path, "Run config JSON");
    sw_cmd->add_option("--data", sw.data_dir, "Session directory (default AZIL_DATA_DIR)");
    sw_cmd->add_option("--thresholds", sw.thresholds, "Threshold values, seconds")
        ->delimiter(',');
    sw_cmd->add_option("--eps", sw.eps, "Rule-baseline neighborhood radius, degrees");
    sw_cmd->add_option("--out", sw.out_path, "CSV path");

    ExportArgs ex;
    auto* ex_cmd = app.add_subcommand(
        "export", "Run the full pipeline per seed and export plot-ready CSV");
    ex_cmd->fallthrough();
    ex_cmd->add_option("--config", ex.config_path, "Run config JSON");
    ex_cmd->add_option("--out", ex.out_dir, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    (void)deterministic;  // execution is single-threaded and seeded throughout

    sim.seed_given = sim_seed->count() > 0;
    tr.seed_given = tr_seed->count() > 0;
    ev.seed_given = ev_seed->count() > 0;
    bl.seed_given = bl_seed->count() > 0;

    try {
        if (sim_cmd->parsed()) return cmd_simulate(sim);
        if (tr_cmd->parsed()) return cmd_train(tr);
        if (ev_cmd->parsed()) return cmd_eval(ev);
        if (bl_cmd->parsed()) return cmd_baseline(bl);
        if (st_cmd->parsed()) return cmd_steer(st);
        if (gc_cmd->parsed()) return cmd_gradcheck(gc);
        if (sw_cmd->parsed()) return cmd_sweep_threshold(sw);
        if (ex_cmd->parsed()) return cmd_export(ex);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
