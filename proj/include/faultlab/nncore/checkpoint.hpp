#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "faultlab/nncore/adam.hpp"
#include "faultlab/nncore/dense.hpp"
#include "faultlab/nncore/lstm.hpp"

// Checkpoint file schema (JSON text, keys sorted):
//
//   {
//     "format": "faultlab-checkpoint",
//     "version": 1,
//     "kind": "<model kind>",
//     "layers": [ {"name": ..., "type": "lstm"|"dense", "shape": {...},
//                  "weights": {"<array>": [flat row-major values], ...}} ],
//     "optimizer": {"name": "adam", "alpha": ..., "beta1": ..., "beta2": ..., "epsilon": ...},
//     "meta": { model-specific scalars, arrays and nested objects }
//   }
//
// Doubles are written in shortest round-trip form, so load(save(m)) == m bit for bit.

namespace faultlab::nn {

using Json = nlohmann::json;

inline constexpr const char* kCheckpointFormat = "faultlab-checkpoint";
inline constexpr int kCheckpointVersion = 1;

inline Json tensor_json(const Tensor2& t) { return Json{{"rows", t.rows}, {"cols", t.cols}, {"data", t.data}}; }

inline Tensor2 tensor_from_json(const Json& j) {
    Tensor2 t(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    t.data = j.at("data").get<std::vector<double>>();
    if (t.data.size() != t.rows * t.cols) throw ParseError("tensor data length does not match its shape");
    return t;
}

inline Json layer_json(const std::string& name, const LstmCellParams& p) {
    return Json{{"name", name},
                {"type", "lstm"},
                {"shape", {{"input", p.input_dim()}, {"hidden", p.hidden_size}}},
                {"weights", {{"w_input", p.w_input.data}, {"w_hidden", p.w_hidden.data}, {"bias", p.bias}}}};
}

inline Json layer_json(const std::string& name, const DenseParams& p) {
    return Json{{"name", name},
                {"type", "dense"},
                {"shape", {{"input", p.in_dim()}, {"output", p.out_dim()}}},
                {"activation", std::string(to_string(p.activation))},
                {"weights", {{"w", p.w.data}, {"b", p.b}}}};
}

inline void expect_layer(const Json& j, const std::string& name, const std::string& type) {
    if (j.at("name").get<std::string>() != name || j.at("type").get<std::string>() != type)
        throw ParseError("checkpoint: expected " + type + " layer '" + name + "', found '" +
                         j.at("name").get<std::string>() + "'");
}

inline LstmCellParams lstm_from_json(const Json& j, const std::string& name) {
    expect_layer(j, name, "lstm");
    LstmCellParams p(j.at("shape").at("input").get<std::size_t>(), j.at("shape").at("hidden").get<std::size_t>());
    const auto& w = j.at("weights");
    p.w_input.data = w.at("w_input").get<std::vector<double>>();
    p.w_hidden.data = w.at("w_hidden").get<std::vector<double>>();
    p.bias = w.at("bias").get<std::vector<double>>();
    if (p.w_input.data.size() != p.w_input.rows * p.w_input.cols ||
        p.w_hidden.data.size() != p.w_hidden.rows * p.w_hidden.cols)
        throw ParseError("checkpoint: lstm layer '" + name + "' weight length mismatch");
    p.validate();
    return p;
}

inline DenseParams dense_from_json(const Json& j, const std::string& name) {
    expect_layer(j, name, "dense");
    DenseParams p(j.at("shape").at("input").get<std::size_t>(), j.at("shape").at("output").get<std::size_t>(),
                  activation_from_string(j.at("activation").get<std::string>()));
    p.w.data = j.at("weights").at("w").get<std::vector<double>>();
    p.b = j.at("weights").at("b").get<std::vector<double>>();
    if (p.w.data.size() != p.w.rows * p.w.cols || p.b.size() != p.w.rows)
        throw ParseError("checkpoint: dense layer '" + name + "' weight length mismatch");
    return p;
}

inline Json optimizer_json(const AdamConfig& c) {
    return Json{{"name", "adam"}, {"alpha", c.alpha}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"epsilon", c.epsilon}};
}

inline AdamConfig optimizer_from_json(const Json& j) {
    AdamConfig c;
    c.alpha = j.at("alpha").get<double>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.epsilon = j.at("epsilon").get<double>();
    return c;
}

inline Json make_checkpoint(const std::string& kind) {
    return Json{{"format", kCheckpointFormat},
                {"version", kCheckpointVersion},
                {"kind", kind},
                {"layers", Json::array()},
                {"meta", Json::object()}};
}

inline void check_header(const Json& j, const std::string& kind) {
    if (!j.is_object() || j.value("format", "") != kCheckpointFormat)
        throw ParseError("not a faultlab checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion)
        throw ParseError("unsupported checkpoint version " + std::to_string(j.at("version").get<int>()));
    if (j.at("kind").get<std::string>() != kind)
        throw ParseError("checkpoint holds a '" + j.at("kind").get<std::string>() + "' model, expected '" + kind + "'");
}

inline std::string dump_checkpoint(const Json& j) { return j.dump(1) + "\n"; }

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw Error("write failed for '" + path.string() + "'");
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline Json load_checkpoint_file(const std::filesystem::path& path) {
    try {
        return Json::parse(read_text_file(path));
    } catch (const Json::parse_error& e) {
        throw ParseError("'" + path.string() + "': " + e.what());
    }
}

}  // namespace faultlab::nn
