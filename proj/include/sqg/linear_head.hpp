#pragma once

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sqg/error.hpp"
#include "sqg/features.hpp"
#include "sqg/taxonomy.hpp"

namespace sqg {

inline constexpr int kHeadRows = static_cast<int>(kNumCategories);

template <typename Scalar>
using CategoryVector = Eigen::Matrix<Scalar, kHeadRows, 1>;

// Trainable head on top of frozen features: logits = W x + b.
// W is column-major so a sparse feature touches contiguous columns.
template <typename Scalar>
struct LinearHead {
  using WeightMatrix = Eigen::Matrix<Scalar, kHeadRows, Eigen::Dynamic>;

  WeightMatrix weights;
  CategoryVector<Scalar> bias;

  LinearHead() : LinearHead(0) {}
  explicit LinearHead(Eigen::Index dimension)
      : weights(WeightMatrix::Zero(kHeadRows, dimension)), bias(CategoryVector<Scalar>::Zero()) {}

  Eigen::Index dimension() const { return weights.cols(); }
};

// Numerically stable softmax (max-shifted).
template <typename Derived>
typename Derived::PlainObject softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  const Scalar shift = logits.maxCoeff();
  typename Derived::PlainObject e = (logits.array() - shift).exp().matrix();
  return e / e.sum();
}

// First index of the maximum: ties resolve toward the lowest ordinal.
template <typename Derived>
int argmax_lowest(const Eigen::MatrixBase<Derived>& v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return best;
}

template <typename Scalar>
CategoryVector<Scalar> logits(const LinearHead<Scalar>& head, const SparseFeatureVector& x,
                              Scalar weight_scale = Scalar(1)) {
  if (x.dimension != head.dimension()) {
    throw Error(ErrorCode::kDimensionMismatch, "features D=" + std::to_string(x.dimension) +
                                                   ", weights D=" +
                                                   std::to_string(head.dimension()));
  }
  CategoryVector<Scalar> z = CategoryVector<Scalar>::Zero();
  for (const auto& [index, value] : x.entries) {
    z.noalias() += head.weights.col(index) * static_cast<Scalar>(value);
  }
  return weight_scale * z + head.bias;
}

struct TrainingRow {
  const SparseFeatureVector* features;
  Label label;
};

// Gradient of the summed cross-entropy over a batch, with the weight part kept
// sparse as (column, d logits * feature value) contributions.
template <typename Scalar>
struct BatchGradient {
  Scalar loss = Scalar(0);
  CategoryVector<Scalar> bias = CategoryVector<Scalar>::Zero();
  std::vector<std::pair<Eigen::Index, CategoryVector<Scalar>>> columns;
};

// Effective weights are weight_scale * head.weights.
template <typename Scalar>
BatchGradient<Scalar> batch_gradient(const LinearHead<Scalar>& head, Scalar weight_scale,
                                     std::span<const TrainingRow> batch) {
  BatchGradient<Scalar> g;
  for (const TrainingRow& row : batch) {
    const CategoryVector<Scalar> z = logits(head, *row.features, weight_scale);
    CategoryVector<Scalar> p = softmax(z);
    const int y = ordinal(row.label);
    // log p_y computed from logits directly to avoid log(0).
    const Scalar shift = z.maxCoeff();
    g.loss += -(z(y) - shift - std::log((z.array() - shift).exp().sum()));
    p(y) -= Scalar(1);
    g.bias += p;
    for (const auto& [index, value] : row.features->entries) {
      g.columns.emplace_back(index, p * static_cast<Scalar>(value));
    }
  }
  return g;
}

template <typename Scalar>
struct LossGradient {
  Scalar loss;
  typename LinearHead<Scalar>::WeightMatrix weights;
  CategoryVector<Scalar> bias;
};

// Mean softmax cross-entropy plus (l2/2)||W||^2 (bias unpenalized), with dense gradients.
template <typename Scalar>
LossGradient<Scalar> loss_and_gradient(const LinearHead<Scalar>& head,
                                       std::span<const TrainingRow> rows, Scalar l2) {
  if (rows.empty()) throw Error(ErrorCode::kEmptyDataset, "no rows");
  const BatchGradient<Scalar> g = batch_gradient(head, Scalar(1), rows);
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(rows.size());
  LossGradient<Scalar> out{g.loss * inv_n + Scalar(0.5) * l2 * head.weights.squaredNorm(),
                           l2 * head.weights, g.bias * inv_n};
  for (const auto& [col, contribution] : g.columns) {
    out.weights.col(col) += contribution * inv_n;
  }
  return out;
}

}  // namespace sqg
