#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "azil/dataset.hpp"
#include "azil/io.hpp"
#include "azil/nn.hpp"
#include "azil/sim.hpp"
#include "azil/train.hpp"

using namespace azil;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
    fs::path d = fs::temp_directory_path() / ("azil_io_" + tag);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

SessionTrace small_session(uint64_t seed) {
    SessionParams p;
    p.group_size = 3;
    p.duration_s = 8.0;
    p.gyro_bias = {0.001, -0.002, 0.0005};
    return simulate_session(p, seed);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int reported_line(const std::string& what) {
    // messages look like "origin:LINE: explanation"
    size_t first = what.find(':');
    REQUIRE(first != std::string::npos);
    size_t second = what.find(':', first + 1);
    REQUIRE(second != std::string::npos);
    return std::stoi(what.substr(first + 1, second - first - 1));
}

}  // namespace

TEST_CASE("session save and load round trip exactly") {
    SessionTrace t = small_session(9001);
    fs::path dir = fresh_dir("session_rt");
    std::string path = (dir / "session_000.json").string();
    save_session(path, t);
    SessionTrace r = load_session(path);

    CHECK(r.seed == t.seed);
    CHECK(r.duration == t.duration);
    CHECK(r.gyro_rate == t.gyro_rate);
    CHECK(r.frame_rate == t.frame_rate);
    CHECK(r.layout.group_size == t.layout.group_size);
    REQUIRE(r.layout.partner_azimuths == t.layout.partner_azimuths);
    REQUIRE(r.layout.partner_elevations == t.layout.partner_elevations);
    CHECK(r.gyro_bias.x == t.gyro_bias.x);
    CHECK(r.gyro_bias.y == t.gyro_bias.y);
    CHECK(r.gyro_bias.z == t.gyro_bias.z);

    REQUIRE(r.gyro.size() == t.gyro.size());
    for (size_t i = 0; i < t.gyro.size(); i += 97) {
        CHECK(r.gyro[i].t == t.gyro[i].t);
        CHECK(r.gyro[i].omega.x == t.gyro[i].omega.x);
        CHECK(r.gyro[i].omega.y == t.gyro[i].omega.y);
        CHECK(r.gyro[i].omega.z == t.gyro[i].omega.z);
    }
    REQUIRE(r.true_orientation.size() == t.true_orientation.size());
    for (size_t i = 0; i < t.true_orientation.size(); i += 131) {
        CHECK(r.true_orientation[i].azimuth_deg == t.true_orientation[i].azimuth_deg);
        CHECK(r.true_orientation[i].elevation_deg == t.true_orientation[i].elevation_deg);
    }
    REQUIRE(r.self_vad == t.self_vad);
    REQUIRE(r.partner_vad == t.partner_vad);
    REQUIRE(r.partner_positions.size() == t.partner_positions.size());
    for (size_t p = 0; p < t.partner_positions.size(); ++p)
        for (size_t f = 0; f < t.partner_positions[p].size(); f += 11) {
            CHECK(r.partner_positions[p][f].azimuth_deg ==
                  t.partner_positions[p][f].azimuth_deg);
            CHECK(r.partner_positions[p][f].elevation_deg ==
                  t.partner_positions[p][f].elevation_deg);
        }

    // identical input, identical bytes
    std::string again = (dir / "again.json").string();
    save_session(again, r);
    CHECK(slurp(dir / "session_000.json") == slurp(dir / "again.json"));

    // and the reloaded trace segments identically to the original
    DatasetConfig dc;
    auto ex_a = examples_from_trace(t, dc);
    auto ex_b = examples_from_trace(r, dc);
    REQUIRE(ex_a.size() == ex_b.size());
    for (size_t i = 0; i < ex_a.size(); ++i) {
        CHECK(ex_a[i].zones == ex_b[i].zones);
        CHECK(ex_a[i].features.data == ex_b[i].features.data);
    }
}

TEST_CASE("session directory loads sorted by file name") {
    fs::path dir = fresh_dir("session_dir");
    save_session((dir / "session_002.json").string(), small_session(72));
    save_session((dir / "session_000.json").string(), small_session(70));
    save_session((dir / "session_001.json").string(), small_session(71));
    write_text_file((dir / "notes.txt").string(), "ignored");
    write_text_file((dir / "other.json").string(), "{}");

    auto all = load_sessions(dir.string());
    REQUIRE(all.size() == 3);
    CHECK(all[0].seed == 70);
    CHECK(all[1].seed == 71);
    CHECK(all[2].seed == 72);

    CHECK_THROWS_AS(load_sessions((dir / "missing").string()), DataError);
    fs::path empty = fresh_dir("session_empty");
    CHECK_THROWS_AS(load_sessions(empty.string()), DataError);
}

TEST_CASE("session schema violations carry file and line") {
    SessionTrace t = small_session(9002);
    json j = session_to_json(t);
    j["vad"].erase("self");
    fs::path dir = fresh_dir("session_bad");
    std::string path = (dir / "session_000.json").string();
    write_text_file(path, j.dump(2));
    try {
        load_session(path);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        std::string what = e.what();
        CHECK(what.find(path) == 0);
        CHECK(what.find("'self'") != std::string::npos);
        CHECK(reported_line(what) >= 1);
    }

    // truncated file: the parse error points at the right line
    std::string text = session_to_json(t).dump(2);
    std::string broken = text.substr(0, text.size() / 2);
    int last_line = 1;
    for (char c : broken)
        if (c == '\n') ++last_line;
    std::string path2 = (dir / "session_broken.json").string();
    write_text_file(path2, broken);
    try {
        load_session(path2);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(reported_line(e.what()) == last_line);
    }
}

TEST_CASE("gyro jsonl round trip and per-line errors") {
    SessionTrace t = small_session(9003);
    fs::path dir = fresh_dir("gyro");
    std::string path = (dir / "gyro.jsonl").string();
    save_gyro_jsonl(path, t.gyro);

    auto r = load_gyro_jsonl(path);
    REQUIRE(r.size() == t.gyro.size());
    for (size_t i = 0; i < r.size(); i += 53) {
        CHECK(r[i].t == t.gyro[i].t);
        CHECK(r[i].omega.x == t.gyro[i].omega.x);
        CHECK(r[i].omega.y == t.gyro[i].omega.y);
        CHECK(r[i].omega.z == t.gyro[i].omega.z);
    }

    // one line per sample
    std::string text = slurp(dir / "gyro.jsonl");
    size_t lines = 0;
    for (char c : text)
        if (c == '\n') ++lines;
    CHECK(lines == t.gyro.size());

    std::string bad = "{\"t\":0,\"wx\":0,\"wy\":0,\"wz\":0}\n"
                      "{\"t\":0.01,\"wx\":0,\"wy\":0,\"wz\":0}\n"
                      "{\"t\":0.02,\"wx\":broken\n";
    std::string bad_path = (dir / "bad.jsonl").string();
    write_text_file(bad_path, bad);
    try {
        load_gyro_jsonl(bad_path);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(reported_line(e.what()) == 3);
    }

    std::string missing = "{\"t\":0,\"wx\":0,\"wy\":0,\"wz\":0}\n{\"t\":0.01,\"wy\":0,\"wz\":0}\n";
    write_text_file(bad_path, missing);
    try {
        load_gyro_jsonl(bad_path);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(reported_line(e.what()) == 2);
        CHECK(std::string(e.what()).find("'wx'") != std::string::npos);
    }
}

TEST_CASE("checkpoint round trip preserves predictions bitwise") {
    ModelConfig cfg;
    cfg.input_channels = 2;
    cfg.conv_channels = 8;
    cfg.lstm_hidden = 24;
    cfg.reduced_dim = 4;
    cfg.static_dim = 0;
    cfg.head_hidden = 16;
    cfg.n_bins = 6;
    ModelParams mp = init_halo(cfg, 42);

    SessionParams sp;
    sp.group_size = 3;
    sp.duration_s = 70.0;
    auto pool = examples_from_trace(simulate_session(sp, 9004), DatasetConfig{});
    REQUIRE(pool.size() >= 2);

    Checkpoint ck;
    ck.task = "halo";
    ck.seed = 42;
    ck.config = cfg;
    ck.params = snapshot(mp);
    ck.history.train_loss = {0.7, 0.6};
    ck.history.val_loss = {0.71, 0.63};
    ck.history.best_epoch = 1;
    ck.history.best_val = 0.63;

    fs::path dir = fresh_dir("ckpt");
    std::string path = (dir / "halo.json").string();
    save_checkpoint(path, ck);
    Checkpoint r = load_checkpoint(path);

    CHECK(r.task == "halo");
    CHECK(r.seed == 42);
    CHECK(r.config.conv_channels == 8);
    CHECK(r.history.best_epoch == 1);
    CHECK(r.history.best_val == 0.63);
    REQUIRE(r.history.train_loss == ck.history.train_loss);
    CHECK_FALSE(r.has_coco);

    ModelParams mr = model_from_parts(r.config, r.seed, r.params);
    REQUIRE(mr.params.size() == mp.params.size());
    auto before = predict_zones(mp, pool, "none");
    auto after = predict_zones(mr, pool, "none");
    REQUIRE(before.size() == after.size());
    for (size_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);

    // saving the reloaded checkpoint reproduces the file byte for byte
    std::string again = (dir / "halo2.json").string();
    Checkpoint ck2 = r;
    save_checkpoint(again, ck2);
    CHECK(slurp(dir / "halo.json") == slurp(dir / "halo2.json"));
}

TEST_CASE("fused checkpoint stores both models") {
    ModelConfig zcfg;
    zcfg.conv_channels = 8;
    zcfg.lstm_hidden = 24;
    zcfg.reduced_dim = 4;
    zcfg.static_dim = 10;
    zcfg.embed_dim = 10;
    zcfg.head_hidden = 16;
    ModelConfig ccfg = zcfg;
    ccfg.input_channels = 4;
    ccfg.static_dim = 0;

    Checkpoint ck;
    ck.task = "halo-coco";
    ck.seed = 7;
    ck.config = zcfg;
    ck.params = snapshot(init_halo(zcfg, 7));
    ck.has_coco = true;
    ck.coco_config = ccfg;
    ck.coco_params = snapshot(init_coco(ccfg, 8));

    fs::path dir = fresh_dir("ckpt_fused");
    std::string path = (dir / "fused.json").string();
    save_checkpoint(path, ck);
    Checkpoint r = load_checkpoint(path);
    REQUIRE(r.has_coco);
    CHECK(r.coco_config.input_channels == 4);
    CHECK(r.coco_params.size() == ck.coco_params.size());
    for (const auto& [name, tensor] : ck.coco_params) {
        REQUIRE(r.coco_params.count(name) == 1);
        CHECK(r.coco_params.at(name).data == tensor.data);
    }
}

TEST_CASE("checkpoint schema errors name the offending tensor") {
    ModelConfig cfg;
    cfg.conv_channels = 8;
    cfg.lstm_hidden = 24;
    cfg.reduced_dim = 4;
    cfg.head_hidden = 16;
    Checkpoint ck;
    ck.config = cfg;
    ck.params = snapshot(init_halo(cfg, 1));

    json j = checkpoint_to_json(ck);
    std::string first = j["params"].begin().key();
    j["params"][first]["data"].push_back(0.5);

    fs::path dir = fresh_dir("ckpt_bad");
    std::string path = (dir / "bad.json").string();
    write_text_file(path, j.dump(2));
    try {
        load_checkpoint(path);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        std::string what = e.what();
        CHECK(what.find("does not match its shape") != std::string::npos);
        CHECK(reported_line(what) > 1);
    }

    json j2 = checkpoint_to_json(ck);
    j2.erase("params");
    write_text_file(path, j2.dump(2));
    CHECK_THROWS_AS(load_checkpoint(path), DataError);
}

TEST_CASE("run config defaults match the in-memory defaults") {
    JsonSource src{"<config>", "{}", JsonSource::config};
    RunConfig c = run_config_from_json(parse_json(src), src);

    CHECK(c.seed == 2711);
    CHECK(c.seed_list() == std::vector<uint64_t>{2711});
    CHECK(c.sessions == 12);
    CHECK(c.bins.edges == BinConfig::six_zone().edges);
    CHECK(c.sim.group_size == 4);
    CHECK(c.sim.duration_s == 120.0);
    CHECK(c.model.input_channels == 2);
    CHECK(c.model.n_bins == 6);
    CHECK(c.training.epochs == 20);
    CHECK(c.training.batch_size == 64);
    CHECK(c.training.lr == 1e-3);
    CHECK(c.training.seed == 2711);
    CHECK(c.training.static_mode == "none");
    CHECK_FALSE(c.use_self_vad);
    CHECK(c.test_fraction == 0.3);
    CHECK(c.val_fraction == 0.2);

    // round trip through serialization
    json out = run_config_to_json(c);
    JsonSource src2{"<config>", out.dump(), JsonSource::config};
    RunConfig c2 = run_config_from_json(parse_json(src2), src2);
    CHECK(run_config_to_json(c2).dump() == out.dump());
}

TEST_CASE("run config overrides flow into the right places") {
    std::string text = R"({
        "seed": 5,
        "seeds": [5, 6, 7],
        "sessions": 3,
        "bins": "three_zone",
        "simulator": {
            "group_size": 2,
            "duration_s": 60.0,
            "gyro_bias": [0.001, 0.0, -0.001],
            "behavior": {"undershoot_factor": 0.8},
            "turns": {"mean_turn_length": 5.0}
        },
        "dataset": {"use_self_vad": true, "use_speaker_vad": true, "target_shaping": false},
        "model": {"conv_channels": 16, "lstm_hidden": 32, "reduced_dim": 4},
        "training": {"epochs": 3, "lr": 0.01, "static_mode": "true_count"}
    })";
    JsonSource src{"<config>", text, JsonSource::config};
    RunConfig c = run_config_from_json(parse_json(src), src);

    CHECK(c.seed_list() == std::vector<uint64_t>{5, 6, 7});
    CHECK(c.sessions == 3);
    CHECK(c.bins.n_bins() == 3);
    CHECK(c.sim.group_size == 2);
    CHECK(c.sim.duration_s == 60.0);
    CHECK(c.sim.gyro_bias.x == 0.001);
    CHECK(c.sim.behavior.undershoot_factor == 0.8);
    CHECK(c.sim.behavior.reaction_latency == 0.3);
    CHECK(c.sim.turns.mean_turn_length == 5.0);
    CHECK_FALSE(c.target_shaping);
    CHECK(c.model.conv_channels == 16);
    CHECK(c.model.input_channels == 4);  // az, el, self, speaker
    CHECK(c.model.n_bins == 3);          // derived from bins
    CHECK(c.training.epochs == 3);
    CHECK(c.training.lr == 0.01);
    CHECK(c.training.seed == 5);
    CHECK(c.training.static_mode == "true_count");
    CHECK(c.dataset_config().bins.edges == BinConfig::three_zone().edges);
    CHECK_FALSE(c.dataset_config().target_shaping);
}

TEST_CASE("run config rejects contradictions and unknown keys") {
    auto parse = [](const std::string& text) {
        JsonSource src{"<config>", text, JsonSource::config};
        return run_config_from_json(parse_json(src), src);
    };

    CHECK_THROWS_AS(parse(R"({"bogus": 1})"), ConfigError);
    CHECK_THROWS_AS(parse(R"({"training": {"momentum": 0.9}})"), ConfigError);
    CHECK_THROWS_AS(parse(R"({"bins": "five_zone"})"), ConfigError);
    CHECK_THROWS_AS(parse(R"({"training": {"static_mode": "sometimes"}})"), ConfigError);
    CHECK_THROWS_AS(parse(R"({"dataset": {"use_speaker_vad": true}})"), ConfigError);
    CHECK_THROWS_AS(parse(R"({"model": {"input_channels": 3}})"), ConfigError);
    CHECK_THROWS_AS(parse(R"({"model": {"n_bins": 4}})"), ConfigError);
    CHECK_THROWS_AS(parse(R"({"split": {"test_fraction": 0.5}})"), ConfigError);
    CHECK_THROWS_AS(parse(R"({"training": {"epochs": 0}})"), ConfigError);
    CHECK_THROWS_AS(parse(R"({"sessions": 0})"), ConfigError);
    CHECK_THROWS_AS(parse(R"({"model": {"reduced_dim": 64}})"), ConfigError);

    // consistent explicit values are fine
    CHECK_NOTHROW(parse(R"({"dataset": {"use_self_vad": true},
                            "model": {"input_channels": 3}})"));
    CHECK_NOTHROW(parse(R"({"split": {"test_fraction": 0.3, "val_fraction": 0.2}})"));
}

TEST_CASE("config errors point at the offending line") {
    std::string text = "{\n"
                       "  \"seed\": 1,\n"
                       "  \"sessions\": 2,\n"
                       "  \"frobnicate\": true\n"
                       "}\n";
    JsonSource src{"cfg.json", text, JsonSource::config};
    try {
        run_config_from_json(parse_json(src), src);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        std::string what = e.what();
        CHECK(what.substr(0, 9) == "cfg.json:");
        CHECK(reported_line(what) == 4);
        CHECK(what.find("frobnicate") != std::string::npos);
    }

    std::string broken = "{\n  \"seed\": 1,\n  \"sessions\": \n}\n";
    JsonSource src2{"cfg.json", broken, JsonSource::config};
    try {
        parse_json(src2);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(reported_line(e.what()) == 4);
    }

    CHECK_THROWS_AS(load_run_config("/nonexistent/cfg.json"), ConfigError);
}

TEST_CASE("eval report json round trip and csv layout") {
    EvalReport r;
    r.hamming = 0.125;
    r.accuracy = 0.5;
    r.macro_f1 = 0.75;
    r.logitwise_accuracy = {1.0, 0.875, 0.75};
    r.logitwise_f1 = {1.0, 0.8, 0.5};
    r.support = {4, 3, 2};

    json j = eval_report_to_json(r);
    JsonSource src{"report.json", j.dump(), JsonSource::data};
    EvalReport b = eval_report_from_json(parse_json(src), src);
    CHECK(b.hamming == r.hamming);
    CHECK(b.macro_f1 == r.macro_f1);
    CHECK(b.logitwise_accuracy == r.logitwise_accuracy);
    CHECK(b.logitwise_f1 == r.logitwise_f1);
    CHECK(b.support == r.support);

    BinConfig bins = BinConfig::three_zone();
    std::string csv = eval_report_csv(r, &bins);
    std::string expected =
        "bin,zone,accuracy,f1,support\n"
        "0,[-100.000000;-30.000000),1.000000,1.000000,4\n"
        "1,[-30.000000;30.000000),0.875000,0.800000,3\n"
        "2,[30.000000;100.000000),0.750000,0.500000,2\n";
    CHECK(csv == expected);

    std::string csv_plain = eval_report_csv(r);
    CHECK(csv_plain.find("0,0,1.000000") != std::string::npos);

    AgreementReport a{0.1, 0.2, -0.292, 0.492, 0.95, 0.3};
    JsonSource asrc{"agreement.json", agreement_to_json(a).dump(), JsonSource::data};
    AgreementReport a2 = agreement_from_json(parse_json(asrc), asrc);
    CHECK(a2.mean_diff == a.mean_diff);
    CHECK(a2.loa_low == a.loa_low);
    CHECK(a2.pct_within == a.pct_within);
    CHECK(a2.mae == a.mae);
}

TEST_CASE("scene spec parses generators, files, and zones") {
    fs::path dir = fresh_dir("scene");
    write_text_file((dir / "sig.json").string(), "[0.5, -0.5, 0.25, 0.0, 1.0]");

    std::string text = R"({
        "geometry": "glasses_frame",
        "sample_rate": 8000.0,
        "n_samples": 4,
        "noise_level": 0.5,
        "seed": 9,
        "sources": [
            {"azimuth_deg": 35.0, "type": "tone", "freq_hz": 500.0},
            {"azimuth_deg": -20.0, "type": "file", "file": "sig.json", "gain": 2.0}
        ]
    })";
    JsonSource src{"scene.json", text, JsonSource::data};
    SceneSpec s = scene_from_json(parse_json(src), src);

    CHECK(s.geometry == "glasses_frame");
    CHECK(s.sample_rate == 8000.0);
    CHECK(s.n_samples == 4);
    CHECK(s.noise_level == 0.5);
    REQUIRE(s.sources.size() == 2);
    CHECK(s.sources[0].type == "tone");
    CHECK(s.sources[1].gain == 2.0);

    ArrayGeometry g = scene_geometry(s);
    CHECK(g.n_mics() == 6);
    CHECK(g.sample_rate == 8000.0);

    Rng rng = Rng::stream(s.seed, "scene");
    auto sources = scene_sources(s, rng, dir.string());
    REQUIRE(sources.size() == 2);
    REQUIRE(sources[0].signal.size() == 4);
    CHECK(sources[0].signal[1] ==
          Catch::Approx(std::sin(2.0 * kPi * 500.0 / 8000.0)).margin(1e-12));
    // file source: truncated to n_samples, gain applied
    REQUIRE(sources[1].signal.size() == 4);
    CHECK(sources[1].signal[0] == 1.0);
    CHECK(sources[1].signal[1] == -1.0);
    CHECK(sources[1].signal[2] == 0.5);

    // zone label defaults to the bin holding source 0 (35 deg in six_zone)
    CHECK(scene_zone_label(s).to_string() == "000010");

    SceneSpec s2 = s;
    s2.active_zones = "110000";
    CHECK(scene_zone_label(s2).to_string() == "110000");

    auto parse_scene = [](const std::string& body) {
        JsonSource ssrc{"scene.json", body, JsonSource::data};
        return scene_from_json(parse_json(ssrc), ssrc);
    };
    CHECK_THROWS_AS(parse_scene(R"({"geometry": "cube", "sources": [{"azimuth_deg": 0}]})"),
                    DataError);
    CHECK_THROWS_AS(parse_scene(R"({"sources": []})"), DataError);
    CHECK_THROWS_AS(parse_scene(R"({"sources": [{"type": "noise"}]})"), DataError);
    CHECK_THROWS_AS(
        parse_scene(R"({"sources": [{"azimuth_deg": 0}], "active_zones": "11"})"), DataError);
    CHECK_THROWS_AS(parse_scene(R"({"sources": [{"azimuth_deg": 0, "type": "file"}]})"),
                    DataError);

    // a short signal file is an error, not silent padding
    SceneSpec s3 = s;
    s3.n_samples = 50;
    Rng rng3 = Rng::stream(1, "scene");
    CHECK_THROWS_AS(scene_sources(s3, rng3, dir.string()), DataError);
}

TEST_CASE("text file helpers honor the error taxonomy") {
    CHECK_THROWS_AS(read_text_file("/nonexistent/x.json", JsonSource::data), DataError);
    CHECK_THROWS_AS(read_text_file("/nonexistent/x.json", JsonSource::config), ConfigError);

    fs::path dir = fresh_dir("textio");
    std::string nested = (dir / "a" / "b" / "c.txt").string();
    write_text_file(nested, "payload");
    CHECK(read_text_file(nested, JsonSource::data) == "payload");
}
