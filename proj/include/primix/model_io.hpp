#pragma once

#include <string>

#include <json.hpp>

#include "primix/lstm.hpp"
#include "primix/mlp.hpp"
#include "primix/types.hpp"

namespace primix {

/// Format tag written into every model file. Loading rejects other tags.
inline constexpr const char* kModelFormat = "primix-model-v1";

/// Provenance block embedded in every artifact this project writes.
struct ArtifactMeta {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string version = "primix-0.1";
};

nlohmann::json meta_to_json(const ArtifactMeta& meta);
ArtifactMeta meta_from_json(const nlohmann::json& j);

nlohmann::json vec_to_json(const Vec& v);
Vec vec_from_json(const nlohmann::json& j);
nlohmann::json mat_to_json(const Mat& m);  // row-major nested lists
Mat mat_from_json(const nlohmann::json& j);

nlohmann::json mlp_to_json(const MlpParams& model);
MlpParams mlp_from_json(const nlohmann::json& j);
nlohmann::json lstm_to_json(const LstmParams& model);
LstmParams lstm_from_json(const nlohmann::json& j);

nlohmann::json norm_stats_to_json(const NormStats& stats);
NormStats norm_stats_from_json(const nlohmann::json& j);

/// Writes a document wrapped with the format tag and meta block.
void write_model_file(const std::string& path, const std::string& kind,
                      nlohmann::json body, const ArtifactMeta& meta);

/// Reads and validates a document written by write_model_file.
nlohmann::json read_model_file(const std::string& path, const std::string& kind,
                               ArtifactMeta* meta = nullptr);

void save_mlp(const std::string& path, const MlpParams& model, const ArtifactMeta& meta);
MlpParams load_mlp(const std::string& path, ArtifactMeta* meta = nullptr);

void save_lstm(const std::string& path, const LstmParams& model, const ArtifactMeta& meta);
LstmParams load_lstm(const std::string& path, ArtifactMeta* meta = nullptr);

}  // namespace primix
