#include "primix/model_io.hpp"

#include <fstream>
#include <stdexcept>

namespace primix {

using nlohmann::json;

json meta_to_json(const ArtifactMeta& meta) {
    return json{{"config_hash", meta.config_hash},
                {"seed", meta.seed},
                {"version", meta.version}};
}

ArtifactMeta meta_from_json(const json& j) {
    ArtifactMeta m;
    m.config_hash = j.at("config_hash").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.version = j.at("version").get<std::string>();
    return m;
}

json vec_to_json(const Vec& v) {
    json a = json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Vec vec_from_json(const json& j) {
    Vec v(static_cast<Index>(j.size()));
    for (Index i = 0; i < v.size(); ++i) v[i] = j[static_cast<std::size_t>(i)].get<double>();
    return v;
}

json mat_to_json(const Mat& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Mat mat_from_json(const json& j) {
    const Index rows = static_cast<Index>(j.size());
    const Index cols = rows > 0 ? static_cast<Index>(j[0].size()) : 0;
    Mat m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index c = 0; c < cols; ++c)
            m(i, c) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)].get<double>();
    return m;
}

json mlp_to_json(const MlpParams& model) {
    json j;
    j["layer_sizes"] = model.layer_sizes;
    j["weights"] = json::array();
    j["biases"] = json::array();
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        j["weights"].push_back(mat_to_json(model.weights[l]));
        j["biases"].push_back(vec_to_json(model.biases[l]));
    }
    return j;
}

MlpParams mlp_from_json(const json& j) {
    MlpParams m;
    m.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
    for (const auto& w : j.at("weights")) m.weights.push_back(mat_from_json(w));
    for (const auto& b : j.at("biases")) m.biases.push_back(vec_from_json(b));
    if (m.weights.size() + 1 != m.layer_sizes.size() || m.weights.size() != m.biases.size())
        throw std::runtime_error("model file: inconsistent mlp layout");
    return m;
}

json lstm_to_json(const LstmParams& model) {
    json j;
    j["input_size"] = model.input_size;
    j["hidden_size"] = model.hidden_size;
    j["output_size"] = model.output_size;
    j["cells"] = json::array();
    for (const auto& cell : model.cells)
        j["cells"].push_back(json{{"w_x", mat_to_json(cell.w_x)},
                                  {"w_h", mat_to_json(cell.w_h)},
                                  {"b", vec_to_json(cell.b)}});
    j["w_out"] = mat_to_json(model.w_out);
    j["b_out"] = vec_to_json(model.b_out);
    return j;
}

LstmParams lstm_from_json(const json& j) {
    LstmParams m;
    m.input_size = j.at("input_size").get<int>();
    m.hidden_size = j.at("hidden_size").get<int>();
    m.output_size = j.at("output_size").get<int>();
    for (const auto& cell : j.at("cells"))
        m.cells.push_back({mat_from_json(cell.at("w_x")), mat_from_json(cell.at("w_h")),
                           vec_from_json(cell.at("b"))});
    m.w_out = mat_from_json(j.at("w_out"));
    m.b_out = vec_from_json(j.at("b_out"));
    return m;
}

json norm_stats_to_json(const NormStats& stats) {
    return json{{"mean", vec_to_json(stats.mean)}, {"stddev", vec_to_json(stats.stddev)}};
}

NormStats norm_stats_from_json(const json& j) {
    return NormStats{vec_from_json(j.at("mean")), vec_from_json(j.at("stddev"))};
}

void write_model_file(const std::string& path, const std::string& kind, json body,
                      const ArtifactMeta& meta) {
    json doc;
    doc["format"] = kModelFormat;
    doc["kind"] = kind;
    doc["meta"] = meta_to_json(meta);
    doc["body"] = std::move(body);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    f << doc.dump(1) << '\n';
}

json read_model_file(const std::string& path, const std::string& kind, ArtifactMeta* meta) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for read: " + path);
    json doc = json::parse(f);
    if (doc.value("format", "") != kModelFormat)
        throw std::runtime_error("unsupported model format in " + path);
    if (doc.value("kind", "") != kind)
        throw std::runtime_error("expected " + kind + " model in " + path);
    if (meta) *meta = meta_from_json(doc.at("meta"));
    return doc.at("body");
}

void save_mlp(const std::string& path, const MlpParams& model, const ArtifactMeta& meta) {
    write_model_file(path, "mlp", mlp_to_json(model), meta);
}

MlpParams load_mlp(const std::string& path, ArtifactMeta* meta) {
    return mlp_from_json(read_model_file(path, "mlp", meta));
}

void save_lstm(const std::string& path, const LstmParams& model, const ArtifactMeta& meta) {
    write_model_file(path, "lstm", lstm_to_json(model), meta);
}

LstmParams load_lstm(const std::string& path, ArtifactMeta* meta) {
    return lstm_from_json(read_model_file(path, "lstm", meta));
}

}  // namespace primix
