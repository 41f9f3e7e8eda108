#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "sqg/features.hpp"
#include "sqg/rules.hpp"
#include "sqg/taxonomy.hpp"

namespace sqg {

struct ServiceConfig {
  std::string listen = "127.0.0.1:8080";  // host:port
  std::string log_path = "decisions.jsonl";
  std::string model_path;
  std::string rules_path;
  std::string feedback_log_path;
  std::size_t sample_size = 50;
  std::string sentence_terminators = std::string(SentenceSplitter::kDefaultTerminators);
  // Bearer token for mutating operator endpoints; empty disables the check.
  std::string operator_token;
  std::uint64_t sample_seed = 1;
  bool sync_log = true;
  FeaturizerConfig featurizer;
  // When set, features come from this HTTP backend instead of the local hasher.
  std::string remote_featurizer_url;
  std::string remote_featurizer_hash;
  std::map<Label, std::string> block_reasons;

  std::string host() const;
  int port() const;
};

using EnvLookup = std::function<std::optional<std::string>(const char* name)>;
EnvLookup process_env();

// Throws kInvalidConfig naming the field.
ServiceConfig config_from_json(const nlohmann::json& j, ServiceConfig base = {});
// SQG_LISTEN, SQG_LOG_PATH, SQG_MODEL_PATH, SQG_RULES_PATH, SQG_SAMPLE_SIZE,
// SQG_SENTENCE_TERMINATORS, SQG_OPERATOR_TOKEN.
void apply_env_overrides(ServiceConfig& config, const EnvLookup& env);
// Empty path: defaults plus environment.
ServiceConfig load_service_config(const std::string& path, const EnvLookup& env = process_env());

}  // namespace sqg
