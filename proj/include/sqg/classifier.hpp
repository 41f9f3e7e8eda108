#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sqg/features.hpp"
#include "sqg/linear_head.hpp"
#include "sqg/taxonomy.hpp"

namespace sqg {

using ScoreVector = CategoryVector<double>;

struct ModelWeights {
  LinearHead<double> head;
  std::string model_version;
  std::string featurizer_config_hash;

  std::int64_t dimension() const { return head.dimension(); }
};

struct Prediction {
  Label label = Label::kSafe;
  ScoreVector scores = ScoreVector::Zero();
  std::string model_version;
};

ScoreVector score(const ModelWeights& weights, const SparseFeatureVector& features);
Prediction predict(const ModelWeights& weights, const Featurizer& featurizer,
                   std::string_view text);

enum class ExampleOrigin { kPublicCorpus, kInternalAnnotation, kRuleDerived };
std::string_view origin_name(ExampleOrigin origin);
ExampleOrigin parse_origin(std::string_view name);

struct LabeledExample {
  std::string text;
  Label label = Label::kSafe;
  ExampleOrigin origin = ExampleOrigin::kInternalAnnotation;

  friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

struct TrainOptions {
  double learning_rate = 0.1;
  double l2 = 1e-4;
  int batch_size = 32;
  int epochs = 100;
  std::uint64_t seed = 1;
  std::string model_version = "model-dev";
};

struct TrainResult {
  ModelWeights weights;
  std::vector<double> epoch_loss;  // full objective after each epoch
};

// Mini-batch gradient descent on the head only; the featurizer is read, never modified.
// Throws kEmptyDataset, kNonFiniteLoss, kInvalidConfig.
TrainResult train(std::span<const LabeledExample> examples, const Featurizer& featurizer,
                  const TrainOptions& options = {});

// Same optimizer over precomputed features.
TrainResult train_features(std::span<const SparseFeatureVector> features,
                           std::span<const Label> labels, std::int64_t dimension,
                           const TrainOptions& options, std::string featurizer_config_hash);

using ConfusionMatrix = Eigen::Matrix<std::int64_t, kHeadRows, kHeadRows>;  // rows: truth

struct EvalReport {
  ConfusionMatrix confusion = ConfusionMatrix::Zero();
  // Recall per true class; nullopt when the class has no test items.
  std::array<std::optional<double>, kNumCategories> per_category_accuracy{};
  std::optional<double> safe_recall;
  // Exact-category correctness among sensitive-labeled items.
  std::optional<double> category_accuracy;
  double overall_accuracy = 0.0;
  std::int64_t total = 0;
};

EvalReport report_from_confusion(const ConfusionMatrix& confusion);

using Predictor = std::function<Label(std::string_view)>;
EvalReport evaluate_with(const Predictor& predictor, std::span<const LabeledExample> testset);
EvalReport evaluate(const ModelWeights& weights, const Featurizer& featurizer,
                    std::span<const LabeledExample> testset);

// Per-category count round(share% * size / 100), sampled without replacement
// when the pool is large enough and topped up with replacement otherwise.
std::vector<LabeledExample> resample_to_distribution(std::span<const LabeledExample> corpus,
                                                     const CategoryShares& target_pct,
                                                     std::int64_t size, std::uint64_t seed);

// One JSON object per line: {"text", "label", "origin"}.
std::vector<LabeledExample> read_dataset(const std::string& path);
void write_dataset(const std::string& path, std::span<const LabeledExample> examples);

// Binary container: magic, format byte, metadata, W, b, CRC-32 trailer.
inline constexpr std::uint8_t kModelFormatVersion = 1;
std::string serialize_model(const ModelWeights& weights);
ModelWeights deserialize_model(std::string_view bytes);
void save_model(const std::string& path, const ModelWeights& weights);
ModelWeights load_model(const std::string& path);

}  // namespace sqg
