#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sqg {

// Sparse input to the linear head. Indices strictly increasing, weights finite.
struct SparseFeatureVector {
  std::int64_t dimension = 0;
  std::vector<std::pair<std::int64_t, double>> entries;

  bool empty() const { return entries.empty(); }
  // Throws Error(kInvalidArgument) if the invariants do not hold.
  void validate() const;

  friend bool operator==(const SparseFeatureVector&, const SparseFeatureVector&) = default;
};

struct FeaturizerConfig {
  std::int64_t dimension = std::int64_t{1} << 18;
  int min_n = 1;
  int max_n = 3;
  bool lowercase_ascii = true;
};

// Stand-in for the frozen backbone: maps text to a fixed-dimension representation.
class Featurizer {
 public:
  virtual ~Featurizer() = default;
  virtual SparseFeatureVector featurize(std::string_view text) const = 0;
  virtual std::int64_t dimension() const = 0;
  // Identifies the representation; stored in model files so weights are never
  // applied to features they were not trained on.
  virtual std::string config_hash() const = 0;
};

// Hashed character n-grams over code points with L2-normalized counts.
// Whitespace runs collapse to one space; leading and trailing whitespace is dropped.
class HashedNgramFeaturizer final : public Featurizer {
 public:
  explicit HashedNgramFeaturizer(FeaturizerConfig config = {});

  SparseFeatureVector featurize(std::string_view text) const override;
  std::int64_t dimension() const override { return config_.dimension; }
  std::string config_hash() const override;
  const FeaturizerConfig& config() const { return config_; }

 private:
  FeaturizerConfig config_;
};

// Delegates to an HTTP service: POST {"text": ...} -> {"dimension": D, "entries": [[i, w], ...]}.
// Any transport failure, timeout, or malformed reply raises kRemoteFeaturizerUnavailable.
class RemoteFeaturizer final : public Featurizer {
 public:
  RemoteFeaturizer(std::string base_url, std::string path, std::int64_t dimension,
                   std::string config_hash,
                   std::chrono::milliseconds timeout = std::chrono::milliseconds(2000));

  SparseFeatureVector featurize(std::string_view text) const override;
  std::int64_t dimension() const override { return dimension_; }
  std::string config_hash() const override { return config_hash_; }

 private:
  std::string base_url_;
  std::string path_;
  std::int64_t dimension_;
  std::string config_hash_;
  std::chrono::milliseconds timeout_;
};

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace sqg
