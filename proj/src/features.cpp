#include "sqg/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "sqg/error.hpp"
#include "sqg/regex.hpp"

namespace sqg {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

void SparseFeatureVector::validate() const {
  std::int64_t prev = -1;
  for (const auto& [index, weight] : entries) {
    if (index <= prev || index >= dimension) {
      throw Error(ErrorCode::kInvalidArgument, "feature indices must be increasing and < D");
    }
    if (!std::isfinite(weight)) throw Error(ErrorCode::kInvalidArgument, "non-finite feature");
    prev = index;
  }
}

HashedNgramFeaturizer::HashedNgramFeaturizer(FeaturizerConfig config) : config_(config) {
  if (config_.dimension <= 0 || config_.min_n < 1 || config_.max_n < config_.min_n) {
    throw Error(ErrorCode::kInvalidConfig, "featurizer: need D > 0 and 1 <= min_n <= max_n");
  }
}

SparseFeatureVector HashedNgramFeaturizer::featurize(std::string_view text) const {
  // Code point boundaries of the normalized text.
  std::string norm;
  norm.reserve(text.size());
  bool pending_space = false;
  for (std::size_t i = 0; i < text.size();) {
    std::size_t len = 1;
    const char32_t cp = decode_utf8(text, i, &len);
    const bool space = cp == ' ' || (cp >= '\t' && cp <= '\r');
    if (space) {
      pending_space = !norm.empty();
    } else {
      if (pending_space) norm.push_back(' ');
      pending_space = false;
      if (config_.lowercase_ascii && cp >= 'A' && cp <= 'Z') {
        norm.push_back(static_cast<char>(cp + 32));
      } else {
        norm.append(text.substr(i, len));
      }
    }
    i += len;
  }
  std::vector<std::size_t> bounds;
  for (std::size_t i = 0; i < norm.size();) {
    bounds.push_back(i);
    std::size_t len = 1;
    decode_utf8(norm, i, &len);
    i += len;
  }
  bounds.push_back(norm.size());
  const std::size_t n_cp = bounds.size() - 1;

  std::map<std::int64_t, double> counts;
  for (int n = config_.min_n; n <= config_.max_n; ++n) {
    const auto un = static_cast<std::size_t>(n);
    if (un > n_cp) break;
    const std::uint64_t seed = fnv1a64(std::to_string(n));
    for (std::size_t s = 0; s + un <= n_cp; ++s) {
      const std::string_view gram(norm.data() + bounds[s], bounds[s + un] - bounds[s]);
      const auto index = static_cast<std::int64_t>(
          fnv1a64(gram, seed) % static_cast<std::uint64_t>(config_.dimension));
      counts[index] += 1.0;
    }
  }
  SparseFeatureVector out;
  out.dimension = config_.dimension;
  double norm2 = 0.0;
  for (const auto& [i, c] : counts) norm2 += c * c;
  const double scale = norm2 > 0 ? 1.0 / std::sqrt(norm2) : 0.0;
  out.entries.reserve(counts.size());
  for (const auto& [i, c] : counts) out.entries.emplace_back(i, c * scale);
  return out;
}

std::string HashedNgramFeaturizer::config_hash() const {
  char buf[128];
  std::snprintf(buf, sizeof buf, "char-ngram/v1;D=%lld;n=%d-%d;lower=%d",
                static_cast<long long>(config_.dimension), config_.min_n, config_.max_n,
                config_.lowercase_ascii ? 1 : 0);
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a64(buf)));
  return hex;
}

}  // namespace sqg
