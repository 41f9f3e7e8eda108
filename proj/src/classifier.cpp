#include "sqg/classifier.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <zlib.h>

#include "sqg/error.hpp"
#include "sqg/random.hpp"

namespace sqg {

static_assert(std::endian::native == std::endian::little, "model format assumes little-endian");

ScoreVector score(const ModelWeights& weights, const SparseFeatureVector& features) {
  return softmax(logits(weights.head, features));
}

Prediction predict(const ModelWeights& weights, const Featurizer& featurizer,
                   std::string_view text) {
  Prediction p;
  p.scores = score(weights, featurizer.featurize(text));
  p.label = static_cast<Label>(argmax_lowest(p.scores));
  p.model_version = weights.model_version;
  return p;
}

std::string_view origin_name(ExampleOrigin origin) {
  switch (origin) {
    case ExampleOrigin::kPublicCorpus: return "public_corpus";
    case ExampleOrigin::kInternalAnnotation: return "internal_annotation";
    case ExampleOrigin::kRuleDerived: return "rule_derived";
  }
  return "internal_annotation";
}

ExampleOrigin parse_origin(std::string_view name) {
  if (name == "public_corpus") return ExampleOrigin::kPublicCorpus;
  if (name == "internal_annotation") return ExampleOrigin::kInternalAnnotation;
  if (name == "rule_derived") return ExampleOrigin::kRuleDerived;
  throw Error(ErrorCode::kInvalidArgument, "unknown origin '" + std::string(name) + "'");
}

TrainResult train(std::span<const LabeledExample> examples, const Featurizer& featurizer,
                  const TrainOptions& options) {
  if (examples.empty()) throw Error(ErrorCode::kEmptyDataset, "no training examples");
  std::vector<SparseFeatureVector> features;
  std::vector<Label> labels;
  features.reserve(examples.size());
  labels.reserve(examples.size());
  for (const auto& ex : examples) {
    features.push_back(featurizer.featurize(ex.text));
    labels.push_back(ex.label);
  }
  return train_features(features, labels, featurizer.dimension(), options,
                        featurizer.config_hash());
}

TrainResult train_features(std::span<const SparseFeatureVector> features,
                           std::span<const Label> labels, std::int64_t dimension,
                           const TrainOptions& options, std::string featurizer_config_hash) {
  if (features.empty()) throw Error(ErrorCode::kEmptyDataset, "no training examples");
  if (features.size() != labels.size()) {
    throw Error(ErrorCode::kInvalidArgument, "features/labels length mismatch");
  }
  if (options.batch_size < 1 || options.epochs < 0 || !(options.learning_rate > 0) ||
      options.l2 < 0 || options.learning_rate * options.l2 >= 1.0) {
    throw Error(ErrorCode::kInvalidConfig,
                "train: need batch_size >= 1, epochs >= 0, lr > 0, 0 <= lr*l2 < 1");
  }
  for (const auto& f : features) {
    if (f.dimension != dimension) {
      throw Error(ErrorCode::kDimensionMismatch, "training features of mixed dimension");
    }
  }

  const std::size_t n = features.size();
  std::vector<TrainingRow> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = {&features[i], labels[i]};

  // Effective weights are scale * head.weights, so the L2 decay of every
  // step is a scalar update and the data gradient stays sparse.
  LinearHead<double> head(dimension);
  double scale = 1.0;
  const double decay = 1.0 - options.learning_rate * options.l2;

  TrainResult result;
  Rng rng(options.seed);
  std::vector<std::size_t> order(n);
  std::vector<TrainingRow> batch;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(options.batch_size)) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(options.batch_size));
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(rows[order[i]]);
      const BatchGradient<double> g = batch_gradient(head, scale, std::span(batch));
      if (!std::isfinite(g.loss)) {
        throw Error(ErrorCode::kNonFiniteLoss, "epoch " + std::to_string(epoch + 1) +
                                                   "; lower the learning rate");
      }
      const double step = options.learning_rate / static_cast<double>(end - start);
      scale *= decay;
      head.bias -= step * g.bias;
      for (const auto& [col, contribution] : g.columns) {
        head.weights.col(col) -= (step / scale) * contribution;
      }
      if (scale < 1e-6) {
        head.weights *= scale;
        scale = 1.0;
      }
    }
    // Full objective at epoch end.
    double loss = 0.0;
    for (std::size_t start = 0; start < n; start += 4096) {
      const std::size_t end = std::min(n, start + 4096);
      loss += batch_gradient(head, scale, std::span(rows).subspan(start, end - start)).loss;
    }
    loss = loss / static_cast<double>(n) +
           0.5 * options.l2 * scale * scale * head.weights.squaredNorm();
    if (!std::isfinite(loss) || !head.bias.allFinite()) {
      throw Error(ErrorCode::kNonFiniteLoss, "epoch " + std::to_string(epoch + 1) +
                                                 "; lower the learning rate");
    }
    result.epoch_loss.push_back(loss);
  }
  head.weights *= scale;
  if (!head.weights.allFinite()) throw Error(ErrorCode::kNonFiniteLoss, "weights diverged");
  result.weights.head = std::move(head);
  result.weights.model_version = options.model_version;
  result.weights.featurizer_config_hash = std::move(featurizer_config_hash);
  return result;
}

EvalReport report_from_confusion(const ConfusionMatrix& confusion) {
  EvalReport r;
  r.confusion = confusion;
  r.total = confusion.sum();
  if (r.total == 0) throw Error(ErrorCode::kEmptyDataset, "empty confusion matrix");
  std::int64_t sensitive_total = 0, sensitive_correct = 0;
  for (int i = 0; i < kHeadRows; ++i) {
    const std::int64_t row = confusion.row(i).sum();
    if (row > 0) {
      r.per_category_accuracy[i] = static_cast<double>(confusion(i, i)) / static_cast<double>(row);
    }
    if (i != ordinal(Label::kSafe)) {
      sensitive_total += row;
      sensitive_correct += confusion(i, i);
    }
  }
  r.safe_recall = r.per_category_accuracy[ordinal(Label::kSafe)];
  if (sensitive_total > 0) {
    r.category_accuracy =
        static_cast<double>(sensitive_correct) / static_cast<double>(sensitive_total);
  }
  r.overall_accuracy =
      static_cast<double>(confusion.trace()) / static_cast<double>(r.total);
  return r;
}

EvalReport evaluate_with(const Predictor& predictor, std::span<const LabeledExample> testset) {
  if (testset.empty()) throw Error(ErrorCode::kEmptyDataset, "empty test set");
  ConfusionMatrix confusion = ConfusionMatrix::Zero();
  for (const auto& ex : testset) {
    confusion(ordinal(ex.label), ordinal(predictor(ex.text))) += 1;
  }
  return report_from_confusion(confusion);
}

EvalReport evaluate(const ModelWeights& weights, const Featurizer& featurizer,
                    std::span<const LabeledExample> testset) {
  return evaluate_with(
      [&](std::string_view text) { return predict(weights, featurizer, text).label; }, testset);
}

std::vector<LabeledExample> resample_to_distribution(std::span<const LabeledExample> corpus,
                                                     const CategoryShares& target_pct,
                                                     std::int64_t size, std::uint64_t seed) {
  if (size < 0) throw Error(ErrorCode::kInvalidArgument, "negative sample size");
  std::array<std::vector<std::size_t>, kNumCategories> pools;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    pools[static_cast<std::size_t>(corpus[i].label)].push_back(i);
  }
  std::array<std::int64_t, kNumCategories> want{};
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    if (!(target_pct[c] >= 0) || !std::isfinite(target_pct[c])) {
      throw Error(ErrorCode::kInvalidArgument, "target shares must be finite and >= 0");
    }
    want[c] = std::llround(target_pct[c] * static_cast<double>(size) / 100.0);
    if (want[c] > 0 && pools[c].empty()) {
      throw Error(ErrorCode::kMissingCategoryExamples,
                  "no examples for '" + std::string(category_id(static_cast<Label>(c))) + "'");
    }
  }
  Rng rng(seed);
  std::vector<LabeledExample> out;
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    auto& pool = pools[c];
    const auto need = static_cast<std::size_t>(want[c]);
    if (need <= pool.size()) {
      // Partial Fisher-Yates: first `need` slots become a uniform sample.
      for (std::size_t i = 0; i < need; ++i) {
        std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
        out.push_back(corpus[pool[i]]);
      }
    } else {
      for (const std::size_t i : pool) out.push_back(corpus[i]);
      for (std::size_t k = pool.size(); k < need; ++k) {
        out.push_back(corpus[pool[rng.below(pool.size())]]);
      }
    }
  }
  rng.shuffle(std::span(out));
  return out;
}

std::vector<LabeledExample> read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot open dataset " + path);
  std::vector<LabeledExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      LabeledExample ex;
      ex.text = j.at("text").get<std::string>();
      ex.label = parse_label(j.at("label").get<std::string>());
      ex.origin = j.contains("origin") ? parse_origin(j.at("origin").get<std::string>())
                                       : ExampleOrigin::kInternalAnnotation;
      if (ex.text.empty()) throw Error(ErrorCode::kInvalidArgument, "empty text");
      out.push_back(std::move(ex));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kCorruptRecord,
                  path + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_dataset(const std::string& path, std::span<const LabeledExample> examples) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kStorageFailure, "cannot write " + path);
  for (const auto& ex : examples) {
    const nlohmann::json j = {{"text", ex.text},
                              {"label", category_id(ex.label)},
                              {"origin", origin_name(ex.origin)}};
    out << j.dump() << '\n';
  }
  if (!out) throw Error(ErrorCode::kStorageFailure, "short write to " + path);
}

namespace {

constexpr char kModelMagic[4] = {'S', 'Q', 'G', 'M'};

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_string(std::string& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string get_string() {
    const auto len = get<std::uint32_t>();
    need(len);
    std::string s(bytes_.substr(pos_, len));
    pos_ += len;
    return s;
  }

  void read_doubles(double* dst, std::size_t count) {
    need(count * sizeof(double));
    std::memcpy(dst, bytes_.data() + pos_, count * sizeof(double));
    pos_ += count * sizeof(double);
  }

  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw Error(ErrorCode::kCorruptModel, "truncated model file");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::string_view bytes) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

}  // namespace

std::string serialize_model(const ModelWeights& weights) {
  std::string out(kModelMagic, sizeof kModelMagic);
  put<std::uint8_t>(out, kModelFormatVersion);
  put_string(out, weights.model_version);
  put_string(out, weights.featurizer_config_hash);
  put<std::uint32_t>(out, kHeadRows);
  put<std::int64_t>(out, weights.dimension());
  const auto& w = weights.head.weights;
  out.append(reinterpret_cast<const char*>(w.data()),
             static_cast<std::size_t>(w.size()) * sizeof(double));
  out.append(reinterpret_cast<const char*>(weights.head.bias.data()), kHeadRows * sizeof(double));
  put<std::uint32_t>(out, crc32_of(out));
  return out;
}

ModelWeights deserialize_model(std::string_view bytes) {
  if (bytes.size() < sizeof kModelMagic + 1 + 4 ||
      std::memcmp(bytes.data(), kModelMagic, sizeof kModelMagic) != 0) {
    throw Error(ErrorCode::kCorruptModel, "not a model file");
  }
  const std::string_view body = bytes.substr(0, bytes.size() - 4);
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + body.size(), 4);
  if (stored_crc != crc32_of(body)) throw Error(ErrorCode::kCorruptModel, "checksum mismatch");

  Reader r(body);
  r.get<std::uint32_t>();  // magic
  const auto format = r.get<std::uint8_t>();
  if (format != kModelFormatVersion) {
    throw Error(ErrorCode::kCorruptModel, "unsupported model format " + std::to_string(format));
  }
  ModelWeights m;
  m.model_version = r.get_string();
  m.featurizer_config_hash = r.get_string();
  if (r.get<std::uint32_t>() != static_cast<std::uint32_t>(kHeadRows)) {
    throw Error(ErrorCode::kCorruptModel, "unexpected class count");
  }
  const auto dim = r.get<std::int64_t>();
  if (dim < 0 || static_cast<std::uint64_t>(dim) > body.size() / sizeof(double)) {
    throw Error(ErrorCode::kCorruptModel, "bad dimension");
  }
  m.head = LinearHead<double>(dim);
  r.read_doubles(m.head.weights.data(), static_cast<std::size_t>(m.head.weights.size()));
  r.read_doubles(m.head.bias.data(), kHeadRows);
  if (r.position() != body.size()) throw Error(ErrorCode::kCorruptModel, "trailing bytes");
  if (!m.head.weights.allFinite() || !m.head.bias.allFinite()) {
    throw Error(ErrorCode::kCorruptModel, "non-finite parameters");
  }
  return m;
}

void save_model(const std::string& path, const ModelWeights& weights) {
  const std::string bytes = serialize_model(weights);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kStorageFailure, "cannot write " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw Error(ErrorCode::kStorageFailure, "cannot rename " + tmp);
  }
}

ModelWeights load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot open model " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_model(ss.str());
}

}  // namespace sqg
