#ifndef PSD_MLP_H_
#define PSD_MLP_H_

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <span>
#include <string>

#include "psd/errors.h"

namespace psd {

template <typename T>
using MatrixT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using VectorT = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// Probabilities below this are clamped before taking the log.
inline constexpr double kProbabilityFloor = 1e-12;

// Two-layer perceptron: h = ReLU(W1 v + b1), p = softmax(W2 h + b2).
template <typename T>
struct MlpParamsT {
  MatrixT<T> w1;  // hidden x d
  VectorT<T> b1;  // hidden
  MatrixT<T> w2;  // senses x hidden
  VectorT<T> b2;  // senses

  int input_dim() const { return static_cast<int>(w1.cols()); }
  int hidden_size() const { return static_cast<int>(w1.rows()); }
  int num_senses() const { return static_cast<int>(w2.rows()); }

  static MlpParamsT Zero(int d, int hidden, int senses) {
    return {MatrixT<T>::Zero(hidden, d), VectorT<T>::Zero(hidden),
            MatrixT<T>::Zero(senses, hidden), VectorT<T>::Zero(senses)};
  }

  bool ShapesConsistent() const {
    return b1.size() == w1.rows() && w2.cols() == w1.rows() &&
           b2.size() == w2.rows() && w1.cols() > 0 && w2.rows() > 0;
  }
  bool AllFinite() const {
    return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite();
  }

  template <typename U>
  MlpParamsT<U> Cast() const {
    return {w1.template cast<U>(), b1.template cast<U>(),
            w2.template cast<U>(), b2.template cast<U>()};
  }
};

using MlpParams = MlpParamsT<float>;

// In-place row-wise softmax with max subtraction.
template <typename T>
void SoftmaxRows(MatrixT<T>& logits) {
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
}

// Batch forward: rows of `x` are inputs; returns rows of probabilities.
template <typename T>
MatrixT<T> ForwardBatch(const MlpParamsT<T>& p, const MatrixT<T>& x) {
  if (x.cols() != p.w1.cols()) {
    throw ValidationError("input has " + std::to_string(x.cols()) +
                          " features, classifier expects " +
                          std::to_string(p.w1.cols()));
  }
  MatrixT<T> h = x * p.w1.transpose();
  h.rowwise() += p.b1.transpose();
  h = h.cwiseMax(T(0));
  MatrixT<T> logits = h * p.w2.transpose();
  logits.rowwise() += p.b2.transpose();
  SoftmaxRows(logits);
  return logits;
}

template <typename T>
VectorT<T> Forward(const MlpParamsT<T>& p, const VectorT<T>& v) {
  MatrixT<T> x = v.transpose();
  return ForwardBatch(p, x).row(0).transpose();
}

// Mean negative log-likelihood of the gold indices: -(1/N) sum log p[n][g_n].
template <typename T>
double CrossEntropy(const MatrixT<T>& probs, std::span<const int> gold) {
  if (gold.empty() || static_cast<Eigen::Index>(gold.size()) != probs.rows()) {
    throw ValidationError("loss needs a non-empty batch matching the labels");
  }
  double total = 0.0;
  for (size_t n = 0; n < gold.size(); ++n) {
    if (gold[n] < 0 || gold[n] >= probs.cols()) {
      throw ValidationError("gold index " + std::to_string(gold[n]) +
                            " out of range");
    }
    const double p = static_cast<double>(probs(static_cast<Eigen::Index>(n), gold[n]));
    total -= std::log(std::max(p, kProbabilityFloor));
  }
  return total / static_cast<double>(gold.size());
}

template <typename T>
struct LossAndGradient {
  double loss = 0.0;
  MlpParamsT<T> grad;
};

// Analytic cross-entropy gradient by backpropagation. The clamp only affects
// the reported loss value.
template <typename T>
LossAndGradient<T> ComputeGradient(const MlpParamsT<T>& p, const MatrixT<T>& x,
                                   std::span<const int> gold) {
  const Eigen::Index n = x.rows();
  MatrixT<T> pre = x * p.w1.transpose();
  pre.rowwise() += p.b1.transpose();
  const MatrixT<T> h = pre.cwiseMax(T(0));
  MatrixT<T> probs = h * p.w2.transpose();
  probs.rowwise() += p.b2.transpose();
  SoftmaxRows(probs);

  LossAndGradient<T> out;
  out.loss = CrossEntropy(probs, gold);

  MatrixT<T> d_logits = probs;
  for (Eigen::Index r = 0; r < n; ++r) d_logits(r, gold[static_cast<size_t>(r)]) -= T(1);
  d_logits /= static_cast<T>(n);

  out.grad.w2 = d_logits.transpose() * h;
  out.grad.b2 = d_logits.colwise().sum().transpose();
  MatrixT<T> d_hidden = d_logits * p.w2;
  d_hidden = d_hidden.cwiseProduct((pre.array() > T(0)).template cast<T>().matrix());
  out.grad.w1 = d_hidden.transpose() * x;
  out.grad.b1 = d_hidden.colwise().sum().transpose();
  return out;
}

}  // namespace psd

#endif  // PSD_MLP_H_
