#include <httplib.h>

#include <nlohmann/json.hpp>

#include "sqg/error.hpp"
#include "sqg/features.hpp"

namespace sqg {

RemoteFeaturizer::RemoteFeaturizer(std::string base_url, std::string path,
                                   std::int64_t dimension, std::string config_hash,
                                   std::chrono::milliseconds timeout)
    : base_url_(std::move(base_url)),
      path_(std::move(path)),
      dimension_(dimension),
      config_hash_(std::move(config_hash)),
      timeout_(timeout) {}

SparseFeatureVector RemoteFeaturizer::featurize(std::string_view text) const {
  httplib::Client client(base_url_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  const nlohmann::json request = {{"text", text}};
  auto res = client.Post(path_, request.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::kRemoteFeaturizerUnavailable,
                base_url_ + ": " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::kRemoteFeaturizerUnavailable,
                base_url_ + ": HTTP " + std::to_string(res->status));
  }
  SparseFeatureVector out;
  try {
    const auto body = nlohmann::json::parse(res->body);
    out.dimension = body.at("dimension").get<std::int64_t>();
    for (const auto& e : body.at("entries")) {
      out.entries.emplace_back(e.at(0).get<std::int64_t>(), e.at(1).get<double>());
    }
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kRemoteFeaturizerUnavailable,
                base_url_ + ": malformed reply: " + e.what());
  }
  if (out.dimension != dimension_) {
    throw Error(ErrorCode::kDimensionMismatch, "remote featurizer returned D=" +
                                                   std::to_string(out.dimension) + ", expected " +
                                                   std::to_string(dimension_));
  }
  try {
    out.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kRemoteFeaturizerUnavailable,
                base_url_ + ": malformed reply: " + e.what());
  }
  return out;
}

}  // namespace sqg
