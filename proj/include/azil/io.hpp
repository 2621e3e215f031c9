// Persistence and configuration: session traces, gyro JSON Lines streams,
// model checkpoints, evaluation reports, run configs, and steering scenes.
// Errors carry the file name and a line number so CLI users can find the
// offending spot; ConfigError and DataError map to distinct exit codes.

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "azil/dataset.hpp"
#include "azil/metrics.hpp"
#include "azil/sim.hpp"
#include "azil/steering.hpp"
#include "azil/targets.hpp"
#include "azil/train.hpp"

namespace azil {

using json = nlohmann::ordered_json;

/// A problem with configuration the user wrote: bad run config, unknown keys,
/// inconsistent settings. CLI exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A problem with data files: missing sessions, unparseable checkpoints,
/// malformed traces. CLI exit code 3.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline int line_of_byte(const std::string& text, size_t byte) {
    int line = 1;
    size_t n = std::min(byte, text.size());
    for (size_t i = 0; i < n; ++i)
        if (text[i] == '\n') ++line;
    return line;
}

// Best-effort location of a key in the original text for schema messages.
inline int line_of_key(const std::string& text, const std::string& key) {
    if (key.empty()) return 1;
    size_t pos = text.find("\"" + key + "\"");
    return pos == std::string::npos ? 1 : line_of_byte(text, pos);
}

}  // namespace detail

/// Where a JSON document came from, for error reporting. `kind` decides which
/// exception class (and therefore which CLI exit code) schema problems get.
struct JsonSource {
    enum Kind { config, data };
    std::string origin;  // file name or a tag like <config>
    std::string text;    // raw document, for line numbers
    Kind kind = data;

    [[noreturn]] void fail(const std::string& near_key, const std::string& msg) const {
        std::string full = origin + ":" +
                           std::to_string(detail::line_of_key(text, near_key)) + ": " + msg;
        if (kind == config) throw ConfigError(full);
        throw DataError(full);
    }
};

namespace detail {

inline const json* find(const json& obj, const std::string& key) {
    if (!obj.is_object()) return nullptr;
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

inline const json& require(const JsonSource& src, const json& obj, const std::string& key,
                           const std::string& where) {
    const json* f = find(obj, key);
    if (!f) src.fail(where, "missing key '" + key + "' in " + where);
    return *f;
}

inline double as_num(const JsonSource& src, const json& j, const std::string& key) {
    if (!j.is_number()) src.fail(key, "'" + key + "' must be a number");
    return j.get<double>();
}

inline int as_int(const JsonSource& src, const json& j, const std::string& key) {
    if (!j.is_number_integer()) src.fail(key, "'" + key + "' must be an integer");
    return j.get<int>();
}

inline uint64_t as_u64(const JsonSource& src, const json& j, const std::string& key) {
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<int64_t>() >= 0))
        src.fail(key, "'" + key + "' must be a non-negative integer");
    return j.get<uint64_t>();
}

inline bool as_bool(const JsonSource& src, const json& j, const std::string& key) {
    if (!j.is_boolean()) src.fail(key, "'" + key + "' must be true or false");
    return j.get<bool>();
}

inline std::string as_str(const JsonSource& src, const json& j, const std::string& key) {
    if (!j.is_string()) src.fail(key, "'" + key + "' must be a string");
    return j.get<std::string>();
}

inline std::vector<double> as_num_array(const JsonSource& src, const json& j,
                                        const std::string& key) {
    if (!j.is_array()) src.fail(key, "'" + key + "' must be an array of numbers");
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& v : j) {
        if (!v.is_number()) src.fail(key, "'" + key + "' must contain only numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

inline std::vector<uint8_t> as_bit_array(const JsonSource& src, const json& j,
                                         const std::string& key) {
    if (!j.is_array()) src.fail(key, "'" + key + "' must be an array of 0/1");
    std::vector<uint8_t> out;
    out.reserve(j.size());
    for (const auto& v : j) {
        if (!v.is_number_integer() || (v.get<int>() != 0 && v.get<int>() != 1))
            src.fail(key, "'" + key + "' must contain only 0 or 1");
        out.push_back(static_cast<uint8_t>(v.get<int>()));
    }
    return out;
}

inline void check_keys(const JsonSource& src, const json& obj,
                       const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) src.fail(where, where + " must be a JSON object");
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            src.fail(it.key(), "unknown key '" + it.key() + "' in " + where);
}

inline json direction_list(const std::vector<SphericalDirection>& dirs) {
    json out = json::array();
    for (const auto& d : dirs) out.push_back({d.azimuth_deg, d.elevation_deg});
    return out;
}

inline std::vector<SphericalDirection> directions(const JsonSource& src, const json& j,
                                                  const std::string& key) {
    if (!j.is_array()) src.fail(key, "'" + key + "' must be an array of [az, el] pairs");
    std::vector<SphericalDirection> out;
    out.reserve(j.size());
    for (const auto& v : j) {
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
            src.fail(key, "'" + key + "' entries must be [azimuth, elevation] pairs");
        out.push_back({v[0].get<double>(), v[1].get<double>()});
    }
    return out;
}

}  // namespace detail

/// Parse a complete JSON document; syntax errors become line-numbered
/// ConfigError or DataError depending on the source kind.
inline json parse_json(const JsonSource& src) {
    try {
        return json::parse(src.text);
    } catch (const nlohmann::json::parse_error& e) {
        std::string what = e.what();
        // nlohmann prefixes messages with an exception id; keep the useful tail.
        size_t cut = what.find("] ");
        if (cut != std::string::npos) what = what.substr(cut + 2);
        std::string full = src.origin + ":" +
                           std::to_string(detail::line_of_byte(src.text, e.byte)) + ": " + what;
        if (src.kind == JsonSource::config) throw ConfigError(full);
        throw DataError(full);
    }
}

inline std::string read_text_file(const std::string& path, JsonSource::Kind kind) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        std::string msg = "cannot read file: " + path;
        if (kind == JsonSource::config) throw ConfigError(msg);
        throw DataError(msg);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(p.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write file: " + path);
    out << content;
    if (!out) throw DataError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Session traces

inline json session_to_json(const SessionTrace& t) {
    json meta;
    meta["seed"] = t.seed;
    meta["duration_s"] = t.duration;
    meta["rates"] = {{"gyro_hz", t.gyro_rate}, {"frame_hz", t.frame_rate}};
    meta["layout"] = {{"group_size", t.layout.group_size},
                      {"partner_azimuths", t.layout.partner_azimuths},
                      {"partner_elevations", t.layout.partner_elevations}};
    meta["bias"] = {t.gyro_bias.x, t.gyro_bias.y, t.gyro_bias.z};

    json gyro = json::array();
    for (const auto& s : t.gyro) gyro.push_back({s.t, s.omega.x, s.omega.y, s.omega.z});

    json partners_vad = json::array();
    for (const auto& pv : t.partner_vad) partners_vad.push_back(pv);

    json partner_positions = json::array();
    for (const auto& pp : t.partner_positions)
        partner_positions.push_back(detail::direction_list(pp));

    json out;
    out["meta"] = std::move(meta);
    out["gyro"] = std::move(gyro);
    out["vad"] = {{"self", t.self_vad}, {"partners", std::move(partners_vad)}};
    out["truth"] = {{"orientation", detail::direction_list(t.true_orientation)},
                    {"partner_positions", std::move(partner_positions)}};
    return out;
}

inline SessionTrace session_from_json(const json& j, const JsonSource& src) {
    using namespace detail;
    SessionTrace t;
    const json& meta = require(src, j, "meta", "session");
    t.seed = as_u64(src, require(src, meta, "seed", "meta"), "seed");
    t.duration = as_num(src, require(src, meta, "duration_s", "meta"), "duration_s");
    const json& rates = require(src, meta, "rates", "meta");
    t.gyro_rate = as_num(src, require(src, rates, "gyro_hz", "rates"), "gyro_hz");
    t.frame_rate = as_num(src, require(src, rates, "frame_hz", "rates"), "frame_hz");

    const json& layout = require(src, meta, "layout", "meta");
    t.layout.group_size = as_int(src, require(src, layout, "group_size", "layout"), "group_size");
    t.layout.partner_azimuths =
        as_num_array(src, require(src, layout, "partner_azimuths", "layout"), "partner_azimuths");
    t.layout.partner_elevations = as_num_array(
        src, require(src, layout, "partner_elevations", "layout"), "partner_elevations");

    std::vector<double> bias = as_num_array(src, require(src, meta, "bias", "meta"), "bias");
    if (bias.size() != 3) src.fail("bias", "'bias' must have exactly 3 components");
    t.gyro_bias = {bias[0], bias[1], bias[2]};

    const json& gyro = require(src, j, "gyro", "session");
    if (!gyro.is_array()) src.fail("gyro", "'gyro' must be an array of [t, wx, wy, wz]");
    t.gyro.reserve(gyro.size());
    for (const auto& s : gyro) {
        if (!s.is_array() || s.size() != 4)
            src.fail("gyro", "'gyro' entries must be [t, wx, wy, wz]");
        for (const auto& v : s)
            if (!v.is_number()) src.fail("gyro", "'gyro' entries must be numeric");
        t.gyro.push_back({{s[1].get<double>(), s[2].get<double>(), s[3].get<double>()},
                          s[0].get<double>()});
    }

    const json& vad = require(src, j, "vad", "session");
    t.self_vad = as_bit_array(src, require(src, vad, "self", "vad"), "self");
    const json& partners = require(src, vad, "partners", "vad");
    if (!partners.is_array()) src.fail("partners", "'partners' must be an array of VAD tracks");
    for (const auto& pv : partners)
        t.partner_vad.push_back(as_bit_array(src, pv, "partners"));

    const json& truth = require(src, j, "truth", "session");
    t.true_orientation =
        directions(src, require(src, truth, "orientation", "truth"), "orientation");
    const json& pp = require(src, truth, "partner_positions", "truth");
    if (!pp.is_array()) src.fail("partner_positions", "'partner_positions' must be an array");
    for (const auto& one : pp)
        t.partner_positions.push_back(directions(src, one, "partner_positions"));

    size_t n_partners = static_cast<size_t>(t.layout.group_size) - 1;
    if (t.layout.partner_azimuths.size() != n_partners ||
        t.layout.partner_elevations.size() != n_partners)
        src.fail("layout", "layout arrays must have group_size - 1 entries");
    if (t.partner_vad.size() != n_partners)
        src.fail("partners", "'partners' must have group_size - 1 VAD tracks");
    if (t.partner_positions.size() != n_partners)
        src.fail("partner_positions", "'partner_positions' must cover every partner");
    if (t.true_orientation.size() != t.gyro.size())
        src.fail("orientation", "'orientation' length must match the gyro stream");
    size_t frames = t.self_vad.size();
    for (const auto& pv : t.partner_vad)
        if (pv.size() != frames) src.fail("partners", "VAD tracks must share one length");
    for (const auto& one : t.partner_positions)
        if (one.size() != frames)
            src.fail("partner_positions", "position tracks must match the frame count");
    return t;
}

inline void save_session(const std::string& path, const SessionTrace& t) {
    write_text_file(path, session_to_json(t).dump(2) + "\n");
}

inline SessionTrace load_session(const std::string& path) {
    JsonSource src{path, read_text_file(path, JsonSource::data), JsonSource::data};
    return session_from_json(parse_json(src), src);
}

/// All session_*.json files in a directory, sorted by file name.
inline std::vector<SessionTrace> load_sessions(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir);
    std::vector<std::string> paths;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        std::string name = e.path().filename().string();
        if (name.rfind("session_", 0) == 0 && e.path().extension() == ".json")
            paths.push_back(e.path().string());
    }
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw DataError("no session_*.json files in " + dir);
    std::vector<SessionTrace> out;
    out.reserve(paths.size());
    for (const auto& p : paths) out.push_back(load_session(p));
    return out;
}

// ---------------------------------------------------------------------------
// Gyro streams as JSON Lines, one sample per line.

inline std::string gyro_to_jsonl(const std::vector<AngularVelocitySample>& gyro) {
    std::string out;
    for (const auto& s : gyro) {
        json line = {{"t", s.t}, {"wx", s.omega.x}, {"wy", s.omega.y}, {"wz", s.omega.z}};
        out += line.dump();
        out += '\n';
    }
    return out;
}

inline std::vector<AngularVelocitySample> gyro_from_jsonl(const std::string& text,
                                                          const std::string& origin) {
    std::vector<AngularVelocitySample> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw DataError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
        for (const char* k : {"t", "wx", "wy", "wz"})
            if (!j.contains(k) || !j[k].is_number())
                throw DataError(origin + ":" + std::to_string(lineno) + ": missing numeric '" +
                                k + "'");
        out.push_back({{j["wx"].get<double>(), j["wy"].get<double>(), j["wz"].get<double>()},
                       j["t"].get<double>()});
    }
    return out;
}

inline void save_gyro_jsonl(const std::string& path,
                            const std::vector<AngularVelocitySample>& gyro) {
    write_text_file(path, gyro_to_jsonl(gyro));
}

inline std::vector<AngularVelocitySample> load_gyro_jsonl(const std::string& path) {
    return gyro_from_jsonl(read_text_file(path, JsonSource::data), path);
}

// ---------------------------------------------------------------------------
// Model configs and checkpoints

inline json model_config_to_json(const ModelConfig& c) {
    return {{"input_channels", c.input_channels},
            {"conv_blocks", c.conv_blocks},
            {"conv_kernel", c.conv_kernel},
            {"conv_channels", c.conv_channels},
            {"lstm_hidden", c.lstm_hidden},
            {"reduced_dim", c.reduced_dim},
            {"static_dim", c.static_dim},
            {"head_hidden", c.head_hidden},
            {"n_bins", c.n_bins},
            {"n_classes", c.n_classes},
            {"embed_dim", c.embed_dim}};
}

inline ModelConfig model_config_from_json(const json& j, const JsonSource& src,
                                          const std::string& where = "model") {
    using namespace detail;
    check_keys(src, j,
               {"input_channels", "conv_blocks", "conv_kernel", "conv_channels", "lstm_hidden",
                "reduced_dim", "static_dim", "head_hidden", "n_bins", "n_classes", "embed_dim"},
               where);
    ModelConfig c;
    auto opt = [&](const char* key, int& field) {
        if (const json* f = find(j, key)) field = as_int(src, *f, key);
    };
    opt("input_channels", c.input_channels);
    opt("conv_blocks", c.conv_blocks);
    opt("conv_kernel", c.conv_kernel);
    opt("conv_channels", c.conv_channels);
    opt("lstm_hidden", c.lstm_hidden);
    opt("reduced_dim", c.reduced_dim);
    opt("static_dim", c.static_dim);
    opt("head_hidden", c.head_hidden);
    opt("n_bins", c.n_bins);
    opt("n_classes", c.n_classes);
    opt("embed_dim", c.embed_dim);
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        src.fail(where, std::string(e.what()));
    }
    return c;
}

inline json snapshot_to_json(const ParamSnapshot& snap) {
    json out = json::object();
    for (const auto& [name, t] : snap)
        out[name] = {{"shape", t.shape}, {"data", t.data}};
    return out;
}

inline ParamSnapshot snapshot_from_json(const json& j, const JsonSource& src) {
    using namespace detail;
    if (!j.is_object()) src.fail("params", "'params' must map names to tensors");
    ParamSnapshot out;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const json& tj = it.value();
        const json& shape_j = require(src, tj, "shape", it.key());
        const json& data_j = require(src, tj, "data", it.key());
        if (!shape_j.is_array()) src.fail(it.key(), "tensor 'shape' must be an array");
        std::vector<int> shape;
        for (const auto& d : shape_j) {
            if (!d.is_number_integer() || d.get<int>() < 0)
                src.fail(it.key(), "tensor 'shape' must hold non-negative integers");
            shape.push_back(d.get<int>());
        }
        std::vector<double> data = as_num_array(src, data_j, "data");
        if (data.size() != Tensor::count(shape))
            src.fail(it.key(), "tensor data length does not match its shape");
        out.emplace(it.key(), Tensor(std::move(shape), std::move(data)));
    }
    return out;
}

/// A trained model on disk. `coco_*` is populated only for fused two-model
/// checkpoints (a zone model plus the frozen counter it consumes).
struct Checkpoint {
    std::string task = "halo";  // halo | coco | halo-coco | mlp | mlp-count
    uint64_t seed = 0;
    ModelConfig config;
    ParamSnapshot params;
    TrainHistory history;
    bool has_coco = false;
    ModelConfig coco_config;
    ParamSnapshot coco_params;
};

inline json checkpoint_to_json(const Checkpoint& c) {
    json out;
    out["task"] = c.task;
    out["seed"] = c.seed;
    out["config"] = model_config_to_json(c.config);
    out["params"] = snapshot_to_json(c.params);
    out["history"] = {{"train_loss", c.history.train_loss},
                      {"val_loss", c.history.val_loss},
                      {"best_epoch", c.history.best_epoch},
                      {"best_val", c.history.best_val}};
    if (c.has_coco) {
        out["coco"] = {{"config", model_config_to_json(c.coco_config)},
                       {"params", snapshot_to_json(c.coco_params)}};
    }
    return out;
}

inline Checkpoint checkpoint_from_json(const json& j, const JsonSource& src) {
    using namespace detail;
    check_keys(src, j, {"task", "seed", "config", "params", "history", "coco"}, "checkpoint");
    Checkpoint c;
    c.task = as_str(src, require(src, j, "task", "checkpoint"), "task");
    c.seed = as_u64(src, require(src, j, "seed", "checkpoint"), "seed");
    c.config = model_config_from_json(require(src, j, "config", "checkpoint"), src, "config");
    c.params = snapshot_from_json(require(src, j, "params", "checkpoint"), src);
    const json& h = require(src, j, "history", "checkpoint");
    c.history.train_loss = as_num_array(src, require(src, h, "train_loss", "history"),
                                        "train_loss");
    c.history.val_loss = as_num_array(src, require(src, h, "val_loss", "history"), "val_loss");
    c.history.best_epoch = as_int(src, require(src, h, "best_epoch", "history"), "best_epoch");
    c.history.best_val = as_num(src, require(src, h, "best_val", "history"), "best_val");
    if (const json* co = find(j, "coco")) {
        c.has_coco = true;
        c.coco_config = model_config_from_json(require(src, *co, "config", "coco"), src, "coco");
        c.coco_params = snapshot_from_json(require(src, *co, "params", "coco"), src);
    }
    return c;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& c) {
    write_text_file(path, checkpoint_to_json(c).dump(2) + "\n");
}

inline Checkpoint load_checkpoint(const std::string& path) {
    JsonSource src{path, read_text_file(path, JsonSource::data), JsonSource::data};
    return checkpoint_from_json(parse_json(src), src);
}

/// Rebuild runnable parameters from stored tensors. Works for any
/// architecture because forward passes look parameters up by name.
inline ModelParams model_from_parts(const ModelConfig& cfg, uint64_t seed,
                                    const ParamSnapshot& snap) {
    ModelParams mp;
    mp.config = cfg;
    mp.seed = seed;
    for (const auto& [name, t] : snap) mp.params.emplace(name, make_param(Tensor(t)));
    return mp;
}

// ---------------------------------------------------------------------------
// Reports

inline json eval_report_to_json(const EvalReport& r) {
    return {{"hamming", r.hamming},
            {"accuracy", r.accuracy},
            {"macro_f1", r.macro_f1},
            {"logitwise_accuracy", r.logitwise_accuracy},
            {"logitwise_f1", r.logitwise_f1},
            {"support", r.support}};
}

inline EvalReport eval_report_from_json(const json& j, const JsonSource& src) {
    using namespace detail;
    EvalReport r;
    r.hamming = as_num(src, require(src, j, "hamming", "report"), "hamming");
    r.accuracy = as_num(src, require(src, j, "accuracy", "report"), "accuracy");
    r.macro_f1 = as_num(src, require(src, j, "macro_f1", "report"), "macro_f1");
    r.logitwise_accuracy = as_num_array(src, require(src, j, "logitwise_accuracy", "report"),
                                        "logitwise_accuracy");
    r.logitwise_f1 = as_num_array(src, require(src, j, "logitwise_f1", "report"),
                                  "logitwise_f1");
    const json& sup = require(src, j, "support", "report");
    if (!sup.is_array()) src.fail("support", "'support' must be an array of integers");
    for (const auto& v : sup) r.support.push_back(as_int(src, v, "support"));
    return r;
}

namespace detail {

inline std::string fixed6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace detail

/// Per-zone scores as CSV, one row per bin. With a BinConfig the zone column
/// shows the azimuth interval, otherwise just the bin index.
inline std::string eval_report_csv(const EvalReport& r, const BinConfig* bins = nullptr) {
    std::string out = "bin,zone,accuracy,f1,support\n";
    for (size_t i = 0; i < r.logitwise_accuracy.size(); ++i) {
        std::string zone = std::to_string(i);
        if (bins && static_cast<int>(i) < bins->n_bins()) {
            zone = "[" + detail::fixed6(bins->edges[i]) + ";" +
                   detail::fixed6(bins->edges[i + 1]) + ")";
        }
        out += std::to_string(i) + "," + zone + "," + detail::fixed6(r.logitwise_accuracy[i]) +
               "," + (i < r.logitwise_f1.size() ? detail::fixed6(r.logitwise_f1[i]) : "") + "," +
               (i < r.support.size() ? std::to_string(r.support[i]) : "") + "\n";
    }
    return out;
}

inline json agreement_to_json(const AgreementReport& r) {
    return {{"mean_diff", r.mean_diff}, {"sd_diff", r.sd_diff},   {"loa_low", r.loa_low},
            {"loa_high", r.loa_high},   {"pct_within", r.pct_within}, {"mae", r.mae}};
}

inline AgreementReport agreement_from_json(const json& j, const JsonSource& src) {
    using namespace detail;
    AgreementReport r;
    r.mean_diff = as_num(src, require(src, j, "mean_diff", "agreement"), "mean_diff");
    r.sd_diff = as_num(src, require(src, j, "sd_diff", "agreement"), "sd_diff");
    r.loa_low = as_num(src, require(src, j, "loa_low", "agreement"), "loa_low");
    r.loa_high = as_num(src, require(src, j, "loa_high", "agreement"), "loa_high");
    r.pct_within = as_num(src, require(src, j, "pct_within", "agreement"), "pct_within");
    r.mae = as_num(src, require(src, j, "mae", "agreement"), "mae");
    return r;
}

// ---------------------------------------------------------------------------
// Run configuration

/// Everything one experiment needs: simulator preset, zone discretization,
/// model and training hyperparameters, feature flags, and the seed(s).
struct RunConfig {
    uint64_t seed = 2711;
    std::vector<uint64_t> seeds;  // empty means just {seed}
    int sessions = 12;
    SessionParams sim;
    BinConfig bins = BinConfig::six_zone();
    bool target_shaping = true;
    double shaping_threshold_s = 8.0;
    ModelConfig model;
    TrainConfig training;
    bool use_self_vad = false;
    bool use_speaker_vad = false;
    // Session-level split. Fractions are fixed properties of the splitter,
    // recorded here so configs are self-describing.
    double test_fraction = 0.3;
    double val_fraction = 0.2;

    std::vector<uint64_t> seed_list() const {
        return seeds.empty() ? std::vector<uint64_t>{seed} : seeds;
    }

    int input_channels() const {
        return 2 + (use_self_vad ? 1 : 0) + (use_speaker_vad ? 1 : 0);
    }

    DatasetConfig dataset_config() const {
        DatasetConfig d;
        d.bins = bins;
        d.target_shaping = target_shaping;
        d.shaping_threshold_s = shaping_threshold_s;
        d.frame_rate_hz = sim.frame_rate_hz;
        return d;
    }
};

namespace detail {

inline BinConfig bins_from_json(const json& j, const JsonSource& src) {
    if (j.is_string()) {
        std::string name = j.get<std::string>();
        if (name == "six_zone") return BinConfig::six_zone();
        if (name == "three_zone") return BinConfig::three_zone();
        if (name == "eight_zone") return BinConfig::eight_zone();
        src.fail("bins", "unknown bins preset '" + name +
                             "' (expected six_zone, three_zone, or eight_zone)");
    }
    check_keys(src, j, {"preset", "edges"}, "bins");
    if (const json* p = find(j, "preset")) return bins_from_json(*p, src);
    const json* e = find(j, "edges");
    if (!e) src.fail("bins", "'bins' needs a 'preset' name or an 'edges' array");
    BinConfig c;
    c.edges = as_num_array(src, *e, "edges");
    try {
        c.validate();
    } catch (const std::invalid_argument& ex) {
        src.fail("edges", ex.what());
    }
    return c;
}

inline void sim_from_json(const json& j, const JsonSource& src, SessionParams& p) {
    check_keys(src, j,
               {"group_size", "duration_s", "gyro_rate_hz", "frame_rate_hz", "layout",
                "behavior", "turns", "gyro_bias", "gyro_noise_std", "noise_level"},
               "simulator");
    if (const json* f = find(j, "group_size")) p.group_size = as_int(src, *f, "group_size");
    if (const json* f = find(j, "duration_s")) p.duration_s = as_num(src, *f, "duration_s");
    if (const json* f = find(j, "gyro_rate_hz")) p.gyro_rate_hz = as_num(src, *f, "gyro_rate_hz");
    if (const json* f = find(j, "frame_rate_hz"))
        p.frame_rate_hz = as_num(src, *f, "frame_rate_hz");
    if (const json* f = find(j, "gyro_noise_std"))
        p.gyro_noise_std = as_num(src, *f, "gyro_noise_std");
    if (const json* f = find(j, "noise_level")) p.noise_level = as_num(src, *f, "noise_level");
    if (const json* f = find(j, "gyro_bias")) {
        std::vector<double> b = as_num_array(src, *f, "gyro_bias");
        if (b.size() != 3) src.fail("gyro_bias", "'gyro_bias' must have 3 components");
        p.gyro_bias = {b[0], b[1], b[2]};
    }
    if (const json* f = find(j, "layout")) {
        check_keys(src, *f, {"az_min", "az_max", "min_separation"}, "layout");
        if (const json* v = find(*f, "az_min")) p.layout.az_min = as_num(src, *v, "az_min");
        if (const json* v = find(*f, "az_max")) p.layout.az_max = as_num(src, *v, "az_max");
        if (const json* v = find(*f, "min_separation"))
            p.layout.min_separation = as_num(src, *v, "min_separation");
    }
    if (const json* f = find(j, "behavior")) {
        check_keys(src, *f,
                   {"reaction_latency", "undershoot_factor", "idle_event_rate", "idle_duration",
                    "orientation_noise_std", "central_bias_gain", "smoothing_time_constant"},
                   "behavior");
        BehaviorParams& b = p.behavior;
        if (const json* v = find(*f, "reaction_latency"))
            b.reaction_latency = as_num(src, *v, "reaction_latency");
        if (const json* v = find(*f, "undershoot_factor"))
            b.undershoot_factor = as_num(src, *v, "undershoot_factor");
        if (const json* v = find(*f, "idle_event_rate"))
            b.idle_event_rate = as_num(src, *v, "idle_event_rate");
        if (const json* v = find(*f, "idle_duration"))
            b.idle_duration = as_num(src, *v, "idle_duration");
        if (const json* v = find(*f, "orientation_noise_std"))
            b.orientation_noise_std = as_num(src, *v, "orientation_noise_std");
        if (const json* v = find(*f, "central_bias_gain"))
            b.central_bias_gain = as_num(src, *v, "central_bias_gain");
        if (const json* v = find(*f, "smoothing_time_constant"))
            b.smoothing_time_constant = as_num(src, *v, "smoothing_time_constant");
    }
    if (const json* f = find(j, "turns")) {
        check_keys(src, *f,
                   {"mean_turn_length", "turn_gap", "overlap_probability",
                    "talkativeness_weights", "self_weight"},
                   "turns");
        TurnTakingParams& t = p.turns;
        if (const json* v = find(*f, "mean_turn_length"))
            t.mean_turn_length = as_num(src, *v, "mean_turn_length");
        if (const json* v = find(*f, "turn_gap")) t.turn_gap = as_num(src, *v, "turn_gap");
        if (const json* v = find(*f, "overlap_probability"))
            t.overlap_probability = as_num(src, *v, "overlap_probability");
        if (const json* v = find(*f, "talkativeness_weights"))
            t.talkativeness_weights = as_num_array(src, *v, "talkativeness_weights");
        if (const json* v = find(*f, "self_weight"))
            t.self_weight = as_num(src, *v, "self_weight");
    }
}

}  // namespace detail

inline json run_config_to_json(const RunConfig& c) {
    json out;
    out["seed"] = c.seed;
    if (!c.seeds.empty()) out["seeds"] = c.seeds;
    out["sessions"] = c.sessions;
    out["bins"] = {{"edges", c.bins.edges}};
    out["simulator"] = {
        {"group_size", c.sim.group_size},
        {"duration_s", c.sim.duration_s},
        {"gyro_rate_hz", c.sim.gyro_rate_hz},
        {"frame_rate_hz", c.sim.frame_rate_hz},
        {"gyro_bias", {c.sim.gyro_bias.x, c.sim.gyro_bias.y, c.sim.gyro_bias.z}},
        {"gyro_noise_std", c.sim.gyro_noise_std},
        {"noise_level", c.sim.noise_level},
        {"layout",
         {{"az_min", c.sim.layout.az_min},
          {"az_max", c.sim.layout.az_max},
          {"min_separation", c.sim.layout.min_separation}}},
        {"behavior",
         {{"reaction_latency", c.sim.behavior.reaction_latency},
          {"undershoot_factor", c.sim.behavior.undershoot_factor},
          {"idle_event_rate", c.sim.behavior.idle_event_rate},
          {"idle_duration", c.sim.behavior.idle_duration},
          {"orientation_noise_std", c.sim.behavior.orientation_noise_std},
          {"central_bias_gain", c.sim.behavior.central_bias_gain},
          {"smoothing_time_constant", c.sim.behavior.smoothing_time_constant}}},
        {"turns",
         {{"mean_turn_length", c.sim.turns.mean_turn_length},
          {"turn_gap", c.sim.turns.turn_gap},
          {"overlap_probability", c.sim.turns.overlap_probability},
          {"talkativeness_weights", c.sim.turns.talkativeness_weights},
          {"self_weight", c.sim.turns.self_weight}}}};
    out["dataset"] = {{"target_shaping", c.target_shaping},
                      {"shaping_threshold_s", c.shaping_threshold_s},
                      {"use_self_vad", c.use_self_vad},
                      {"use_speaker_vad", c.use_speaker_vad}};
    out["model"] = model_config_to_json(c.model);
    out["training"] = {{"epochs", c.training.epochs},
                       {"batch_size", c.training.batch_size},
                       {"lr", c.training.lr},
                       {"static_mode", c.training.static_mode},
                       {"perturb_fraction", c.training.perturb_fraction}};
    out["split"] = {{"test_fraction", c.test_fraction}, {"val_fraction", c.val_fraction}};
    return out;
}

inline RunConfig run_config_from_json(const json& j, const JsonSource& src) {
    using namespace detail;
    check_keys(src, j,
               {"seed", "seeds", "sessions", "bins", "simulator", "dataset", "model", "training",
                "split"},
               "run config");
    RunConfig c;
    if (const json* f = find(j, "seed")) c.seed = as_u64(src, *f, "seed");
    if (const json* f = find(j, "seeds")) {
        if (!f->is_array()) src.fail("seeds", "'seeds' must be an array of seeds");
        for (const auto& s : *f) c.seeds.push_back(as_u64(src, s, "seeds"));
    }
    if (const json* f = find(j, "sessions")) {
        c.sessions = as_int(src, *f, "sessions");
        if (c.sessions < 1) src.fail("sessions", "'sessions' must be >= 1");
    }
    if (const json* f = find(j, "bins")) c.bins = bins_from_json(*f, src);
    if (const json* f = find(j, "simulator")) sim_from_json(*f, src, c.sim);

    bool model_channels_given = false;
    bool model_bins_given = false;
    if (const json* f = find(j, "model")) {
        model_channels_given = find(*f, "input_channels") != nullptr;
        model_bins_given = find(*f, "n_bins") != nullptr;
        c.model = model_config_from_json(*f, src, "model");
    }
    if (const json* f = find(j, "dataset")) {
        check_keys(src, *f,
                   {"target_shaping", "shaping_threshold_s", "use_self_vad", "use_speaker_vad"},
                   "dataset");
        if (const json* v = find(*f, "target_shaping"))
            c.target_shaping = as_bool(src, *v, "target_shaping");
        if (const json* v = find(*f, "shaping_threshold_s"))
            c.shaping_threshold_s = as_num(src, *v, "shaping_threshold_s");
        if (const json* v = find(*f, "use_self_vad"))
            c.use_self_vad = as_bool(src, *v, "use_self_vad");
        if (const json* v = find(*f, "use_speaker_vad"))
            c.use_speaker_vad = as_bool(src, *v, "use_speaker_vad");
    }
    if (const json* f = find(j, "training")) {
        check_keys(src, *f, {"epochs", "batch_size", "lr", "static_mode", "perturb_fraction"},
                   "training");
        if (const json* v = find(*f, "epochs")) c.training.epochs = as_int(src, *v, "epochs");
        if (const json* v = find(*f, "batch_size"))
            c.training.batch_size = as_int(src, *v, "batch_size");
        if (const json* v = find(*f, "lr")) c.training.lr = as_num(src, *v, "lr");
        if (const json* v = find(*f, "static_mode"))
            c.training.static_mode = as_str(src, *v, "static_mode");
        if (const json* v = find(*f, "perturb_fraction"))
            c.training.perturb_fraction = as_num(src, *v, "perturb_fraction");
        if (c.training.epochs < 1 || c.training.batch_size < 1 || c.training.lr <= 0)
            src.fail("training", "epochs, batch_size, and lr must be positive");
    }
    if (const json* f = find(j, "split")) {
        check_keys(src, *f, {"test_fraction", "val_fraction"}, "split");
        if (const json* v = find(*f, "test_fraction"))
            c.test_fraction = as_num(src, *v, "test_fraction");
        if (const json* v = find(*f, "val_fraction"))
            c.val_fraction = as_num(src, *v, "val_fraction");
        // The splitter hashes (session id, seed) against fixed thresholds so
        // assignments never shift; configs may only restate those fractions.
        if (c.test_fraction != 0.3 || c.val_fraction != 0.2)
            src.fail("split", "split fractions are fixed: test 0.3, val 0.2 of train");
    }

    static const std::set<std::string> kStaticModes = {"none", "true_count", "noisy", "coco"};
    if (!kStaticModes.count(c.training.static_mode))
        src.fail("static_mode",
                 "static_mode must be one of none, true_count, noisy, coco");

    c.training.seed = c.seed;
    int derived = c.input_channels();
    if (!model_channels_given)
        c.model.input_channels = derived;
    else if (c.model.input_channels != derived)
        src.fail("input_channels",
                 "input_channels disagrees with the VAD feature flags (expected " +
                     std::to_string(derived) + ")");
    if (!model_bins_given)
        c.model.n_bins = c.bins.n_bins();
    else if (c.model.n_bins != c.bins.n_bins())
        src.fail("n_bins", "model n_bins disagrees with the bins config (expected " +
                               std::to_string(c.bins.n_bins()) + ")");
    if (c.use_speaker_vad && !c.use_self_vad)
        src.fail("use_speaker_vad",
                 "use_speaker_vad requires use_self_vad (channels are ordered az, el, "
                 "self, speaker)");
    try {
        c.model.validate();
    } catch (const std::invalid_argument& e) {
        src.fail("model", e.what());
    }
    return c;
}

inline RunConfig load_run_config(const std::string& path) {
    JsonSource src{path, read_text_file(path, JsonSource::config), JsonSource::config};
    return run_config_from_json(parse_json(src), src);
}

// ---------------------------------------------------------------------------
// Steering scenes

/// Declarative description of a microphone-array scene: geometry preset,
/// sources as generators or sample files, diffuse noise level, and the zone
/// activity used for orientation-driven steering.
struct SceneSpec {
    struct Source {
        double azimuth_deg = 0.0;
        std::string type = "noise";  // noise | tone | file
        double freq_hz = 440.0;      // tone only
        double gain = 1.0;
        std::string file;            // file only: JSON array of samples
    };

    std::string geometry = "glasses_frame";  // or broadside_pair
    double spacing = 0.1;                    // broadside_pair spacing, meters
    double sample_rate = 16000.0;
    int n_samples = 16000;
    double noise_level = 1.0;
    uint64_t seed = 1;
    std::vector<Source> sources;
    BinConfig bins = BinConfig::six_zone();
    std::string active_zones;  // bitstring like "001100"; empty = bin of source 0
};

inline SceneSpec scene_from_json(const json& j, const JsonSource& src) {
    using namespace detail;
    check_keys(src, j,
               {"geometry", "spacing", "sample_rate", "n_samples", "noise_level", "seed",
                "sources", "bins", "active_zones"},
               "scene");
    SceneSpec s;
    if (const json* f = find(j, "geometry")) s.geometry = as_str(src, *f, "geometry");
    if (s.geometry != "glasses_frame" && s.geometry != "broadside_pair")
        src.fail("geometry", "geometry must be glasses_frame or broadside_pair");
    if (const json* f = find(j, "spacing")) s.spacing = as_num(src, *f, "spacing");
    if (const json* f = find(j, "sample_rate")) s.sample_rate = as_num(src, *f, "sample_rate");
    if (const json* f = find(j, "n_samples")) s.n_samples = as_int(src, *f, "n_samples");
    if (s.n_samples < 1) src.fail("n_samples", "'n_samples' must be >= 1");
    if (const json* f = find(j, "noise_level")) s.noise_level = as_num(src, *f, "noise_level");
    if (s.noise_level < 0) src.fail("noise_level", "'noise_level' must be >= 0");
    if (const json* f = find(j, "seed")) s.seed = as_u64(src, *f, "seed");
    if (const json* f = find(j, "bins")) s.bins = bins_from_json(*f, src);
    if (const json* f = find(j, "active_zones")) {
        s.active_zones = as_str(src, *f, "active_zones");
        if (s.active_zones.size() != static_cast<size_t>(s.bins.n_bins()) ||
            s.active_zones.find_first_not_of("01") != std::string::npos)
            src.fail("active_zones", "'active_zones' must be a 0/1 string, one per bin");
    }

    const json& sources = require(src, j, "sources", "scene");
    if (!sources.is_array() || sources.empty())
        src.fail("sources", "'sources' must be a non-empty array");
    for (const auto& one : sources) {
        check_keys(src, one, {"azimuth_deg", "type", "freq_hz", "gain", "file"}, "source");
        SceneSpec::Source out;
        out.azimuth_deg =
            as_num(src, require(src, one, "azimuth_deg", "sources"), "azimuth_deg");
        if (const json* f = find(one, "type")) out.type = as_str(src, *f, "type");
        if (out.type != "noise" && out.type != "tone" && out.type != "file")
            src.fail("type", "source type must be noise, tone, or file");
        if (const json* f = find(one, "freq_hz")) out.freq_hz = as_num(src, *f, "freq_hz");
        if (const json* f = find(one, "gain")) out.gain = as_num(src, *f, "gain");
        if (const json* f = find(one, "file")) out.file = as_str(src, *f, "file");
        if (out.type == "file" && out.file.empty())
            src.fail("file", "file sources need a 'file' path");
        s.sources.push_back(std::move(out));
    }
    return s;
}

inline SceneSpec load_scene(const std::string& path) {
    JsonSource src{path, read_text_file(path, JsonSource::data), JsonSource::data};
    return scene_from_json(parse_json(src), src);
}

inline ArrayGeometry scene_geometry(const SceneSpec& s) {
    ArrayGeometry g = s.geometry == "broadside_pair" ? ArrayGeometry::broadside_pair(s.spacing)
                                                     : ArrayGeometry::glasses_frame();
    g.sample_rate = s.sample_rate;
    return g;
}

/// Materialize the source list. File paths resolve relative to `base_dir`
/// when they are not absolute.
inline std::vector<SceneSource> scene_sources(const SceneSpec& s, Rng& rng,
                                              const std::string& base_dir = ".") {
    std::vector<SceneSource> out;
    size_t n = static_cast<size_t>(s.n_samples);
    for (const auto& src : s.sources) {
        std::vector<double> sig;
        if (src.type == "noise") {
            sig = white_signal(n, rng);
        } else if (src.type == "tone") {
            sig = tone_signal(n, src.freq_hz, s.sample_rate);
        } else {
            std::filesystem::path p(src.file);
            if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
            JsonSource fsrc{p.string(), read_text_file(p.string(), JsonSource::data),
                            JsonSource::data};
            json j = parse_json(fsrc);
            sig = detail::as_num_array(fsrc, j, "signal file");
            if (sig.size() < n) fsrc.fail("", "signal file shorter than the scene");
            sig.resize(n);
        }
        if (src.gain != 1.0)
            for (double& v : sig) v *= src.gain;
        out.push_back({src.azimuth_deg, std::move(sig)});
    }
    return out;
}

/// The zone label steering should follow: the declared bitstring, or the bin
/// containing the first source's true azimuth.
inline ZoneLabel scene_zone_label(const SceneSpec& s) {
    if (!s.active_zones.empty()) {
        ZoneLabel z;
        for (char c : s.active_zones) z.bits.push_back(c == '1' ? 1 : 0);
        return z;
    }
    return bin_vector(s.sources.at(0).azimuth_deg, s.bins);
}

}  // namespace azil
