#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "premise/encoder.hpp"

namespace premise {

// Index structure of a contrastive batch over a candidate matrix whose rows
// are the distinct premises of the batch.
struct ContrastiveLayout {
  std::vector<Eigen::Index> positive;                // row of p_i^+ per example
  std::vector<std::vector<Eigen::Index>> negatives;  // rows of N_i per example
};

template <typename Scalar>
struct ContrastiveResult {
  Scalar loss = 0;
  VectorX<Scalar> per_example;
  MatrixX<Scalar> grad_states;      // B x d, dL/d state embeddings
  MatrixX<Scalar> grad_candidates;  // M x d, dL/d candidate embeddings
};

// Masked InfoNCE over unit embeddings:
//   l_i = -log( e^{s_i+/tau} / (e^{s_i+/tau} + sum_{c in N_i} e^{s_ic/tau}) ),  L = mean_i l_i
// The log-sum-exp is shifted by the row maximum and evaluated with log1p so
// that tiny losses keep full relative precision.
template <typename Scalar>
ContrastiveResult<Scalar> masked_infonce(const MatrixX<Scalar>& states,
                                         const MatrixX<Scalar>& candidates,
                                         const ContrastiveLayout& layout, Scalar temperature,
                                         bool with_gradients = true) {
  const auto batch = static_cast<Eigen::Index>(layout.positive.size());
  if (states.rows() != batch || layout.negatives.size() != layout.positive.size())
    throw Error(ErrorCode::shape_mismatch, "layout does not match the state matrix");
  if (!(temperature > Scalar(0))) throw Error(ErrorCode::shape_mismatch, "temperature must be positive");

  ContrastiveResult<Scalar> r;
  r.per_example = VectorX<Scalar>::Zero(batch);
  if (with_gradients) {
    r.grad_states = MatrixX<Scalar>::Zero(batch, states.cols());
    r.grad_candidates = MatrixX<Scalar>::Zero(candidates.rows(), candidates.cols());
  }
  if (batch == 0) return r;

  const Scalar inv_tau = Scalar(1) / temperature;
  const Scalar inv_batch = Scalar(1) / static_cast<Scalar>(batch);
  std::vector<Scalar> logits;
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < batch; ++i) {
    const auto& neg = layout.negatives[static_cast<std::size_t>(i)];
    rows.assign(1, layout.positive[static_cast<std::size_t>(i)]);
    rows.insert(rows.end(), neg.begin(), neg.end());
    logits.resize(rows.size());
    std::size_t arg = 0;
    for (std::size_t c = 0; c < rows.size(); ++c) {
      logits[c] = states.row(i).dot(candidates.row(rows[c])) * inv_tau;
      if (logits[c] > logits[arg]) arg = c;
    }
    const Scalar top = logits[arg];
    Scalar rest = 0;
    for (std::size_t c = 0; c < rows.size(); ++c)
      if (c != arg) rest += std::exp(logits[c] - top);
    r.per_example(i) = (top - logits[0]) + std::log1p(rest);

    if (!with_gradients) continue;
    const Scalar total = Scalar(1) + rest;
    for (std::size_t c = 0; c < rows.size(); ++c) {
      const Scalar q = std::exp(logits[c] - top) / total;
      const Scalar dlogit = (q - (c == 0 ? Scalar(1) : Scalar(0))) * inv_tau * inv_batch;
      if (dlogit == Scalar(0)) continue;
      r.grad_states.row(i) += dlogit * candidates.row(rows[c]);
      r.grad_candidates.row(rows[c]) += dlogit * states.row(i);
    }
  }
  r.loss = r.per_example.mean();
  return r;
}

}  // namespace premise
