#include "sqg/config.hpp"

#include <cstdlib>
#include <fstream>

#include <nlohmann/json.hpp>

#include "sqg/error.hpp"

namespace sqg {

std::string ServiceConfig::host() const {
  const auto colon = listen.rfind(':');
  return colon == std::string::npos ? listen : listen.substr(0, colon);
}

int ServiceConfig::port() const {
  const auto colon = listen.rfind(':');
  if (colon == std::string::npos) return 8080;
  try {
    return std::stoi(listen.substr(colon + 1));
  } catch (const std::exception&) {
    throw Error(ErrorCode::kInvalidConfig, "listen: bad port in '" + listen + "'");
  }
}

EnvLookup process_env() {
  return [](const char* name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name)) return std::string(v);
    return std::nullopt;
  };
}

ServiceConfig config_from_json(const nlohmann::json& j, ServiceConfig c) {
  std::string field = "$";
  try {
    if (!j.is_object()) throw Error(ErrorCode::kInvalidConfig, "$: config must be an object");
    const auto str = [&](const char* name, std::string& out) {
      field = name;
      if (j.contains(name)) out = j.at(name).get<std::string>();
    };
    str("listen", c.listen);
    str("log_path", c.log_path);
    str("model_path", c.model_path);
    str("rules_path", c.rules_path);
    str("feedback_log_path", c.feedback_log_path);
    str("sentence_terminators", c.sentence_terminators);
    str("operator_token", c.operator_token);
    str("remote_featurizer_url", c.remote_featurizer_url);
    str("remote_featurizer_hash", c.remote_featurizer_hash);
    field = "sample_size";
    if (j.contains("sample_size")) c.sample_size = j.at("sample_size").get<std::size_t>();
    field = "sample_seed";
    if (j.contains("sample_seed")) c.sample_seed = j.at("sample_seed").get<std::uint64_t>();
    field = "sync_log";
    if (j.contains("sync_log")) c.sync_log = j.at("sync_log").get<bool>();
    if (j.contains("featurizer")) {
      const auto& f = j.at("featurizer");
      field = "featurizer.dimension";
      c.featurizer.dimension = f.value("dimension", c.featurizer.dimension);
      field = "featurizer.min_n";
      c.featurizer.min_n = f.value("min_n", c.featurizer.min_n);
      field = "featurizer.max_n";
      c.featurizer.max_n = f.value("max_n", c.featurizer.max_n);
    }
    if (j.contains("block_reasons")) {
      for (const auto& [id, text] : j.at("block_reasons").items()) {
        field = "block_reasons." + id;
        c.block_reasons[parse_label(id)] = text.get<std::string>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, field + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvalidConfig) throw;
    throw Error(ErrorCode::kInvalidConfig, field + ": " + e.what());
  }
  if (c.sample_size == 0) throw Error(ErrorCode::kInvalidConfig, "sample_size: must be >= 1");
  if (c.sentence_terminators.empty()) {
    throw Error(ErrorCode::kInvalidConfig, "sentence_terminators: must not be empty");
  }
  return c;
}

void apply_env_overrides(ServiceConfig& c, const EnvLookup& env) {
  if (auto v = env("SQG_LISTEN")) c.listen = *v;
  if (auto v = env("SQG_LOG_PATH")) c.log_path = *v;
  if (auto v = env("SQG_MODEL_PATH")) c.model_path = *v;
  if (auto v = env("SQG_RULES_PATH")) c.rules_path = *v;
  if (auto v = env("SQG_SENTENCE_TERMINATORS")) c.sentence_terminators = *v;
  if (auto v = env("SQG_OPERATOR_TOKEN")) c.operator_token = *v;
  if (auto v = env("SQG_SAMPLE_SIZE")) {
    std::size_t used = 0;
    long long n = 0;
    try {
      n = std::stoll(*v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != v->size() || n < 1) {
      throw Error(ErrorCode::kInvalidConfig, "SQG_SAMPLE_SIZE: expected a positive integer");
    }
    c.sample_size = static_cast<std::size_t>(n);
  }
}

ServiceConfig load_service_config(const std::string& path, const EnvLookup& env) {
  ServiceConfig c;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kInvalidConfig, "cannot open " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kInvalidConfig, path + ": " + e.what());
    }
    c = config_from_json(j, c);
  }
  apply_env_overrides(c, env);
  return c;
}

}  // namespace sqg
