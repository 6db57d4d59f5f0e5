#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "premise/error.hpp"
#include "premise/hash.hpp"
#include "premise/tokenizer.hpp"

namespace premise {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct EmbeddingT {
  VectorX<Scalar> vector;
  std::string model_version;
};

// Gradients with the same shapes as the encoder parameters.
template <typename Scalar>
struct EncoderGradientsT {
  MatrixX<Scalar> embedding_table;
  MatrixX<Scalar> projection;

  Scalar squared_norm() const {
    return embedding_table.squaredNorm() + projection.squaredNorm();
  }
  EncoderGradientsT& operator+=(const EncoderGradientsT& o) {
    embedding_table += o.embedding_table;
    projection += o.projection;
    return *this;
  }
};

// Text encoder: mean of token embeddings, linear projection, L2 normalization.
//   y = P u / |P u|,   u = (1/n) sum_t E[t]
// An empty token sequence pools to the row of the reserved <empty> token.
template <typename Scalar>
class EncoderModel {
 public:
  using Matrix = MatrixX<Scalar>;
  using Vector = VectorX<Scalar>;
  using Embedding = EmbeddingT<Scalar>;
  using Gradients = EncoderGradientsT<Scalar>;

  EncoderModel(Tokenizer tokenizer, Matrix embedding_table, Matrix projection)
      : tokenizer_(std::move(tokenizer)),
        embedding_table_(std::move(embedding_table)),
        projection_(std::move(projection)) {
    if (embedding_table_.rows() != static_cast<Eigen::Index>(tokenizer_.vocab_size()))
      throw Error(ErrorCode::shape_mismatch, "embedding table rows must equal vocabulary size");
    if (projection_.rows() != dim() || projection_.cols() != dim())
      throw Error(ErrorCode::shape_mismatch, "projection must be d x d");
    refresh_version();
  }

  // Embedding rows ~ N(0, 1/d), projection = identity.
  static EncoderModel random(Tokenizer tokenizer, Eigen::Index dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
    Matrix table(static_cast<Eigen::Index>(tokenizer.vocab_size()), dim);
    for (Eigen::Index i = 0; i < table.rows(); ++i)
      for (Eigen::Index j = 0; j < dim; ++j) table(i, j) = static_cast<Scalar>(normal(rng));
    return EncoderModel(std::move(tokenizer), std::move(table), Matrix::Identity(dim, dim));
  }

  Eigen::Index dim() const { return embedding_table_.cols(); }
  const Tokenizer& tokenizer() const { return tokenizer_; }
  const Matrix& embedding_table() const { return embedding_table_; }
  const Matrix& projection() const { return projection_; }
  const std::string& version() const { return version_; }

  Vector pool(std::span<const std::int32_t> ids) const {
    if (ids.empty()) return embedding_table_.row(Tokenizer::kEmptyId).transpose();
    Vector u = Vector::Zero(dim());
    for (std::int32_t t : ids) u += embedding_table_.row(t).transpose();
    return u / static_cast<Scalar>(ids.size());
  }

  Vector encode_ids(std::span<const std::int32_t> ids) const {
    Vector z = projection_ * pool(ids);
    const Scalar norm = z.norm();
    if (!(norm > Scalar(0))) return Vector::Unit(dim(), 0);
    return z / norm;
  }

  Embedding encode(std::string_view text) const {
    const auto ids = tokenizer_.tokenize(text);
    return {encode_ids(ids), version_};
  }

  Gradients zero_gradients() const {
    return {Matrix::Zero(embedding_table_.rows(), dim()), Matrix::Zero(dim(), dim())};
  }

  // Plain gradient descent step. Invalidates the version until refresh_version().
  void apply_gradients(const Gradients& g, Scalar learning_rate) {
    embedding_table_ -= learning_rate * g.embedding_table;
    projection_ -= learning_rate * g.projection;
  }
  Matrix& mutable_embedding_table() { return embedding_table_; }
  Matrix& mutable_projection() { return projection_; }

  void refresh_version() {
    ContentHasher h;
    h.str("encoder-v1").u64(tokenizer_.max_len()).u64(tokenizer_.vocab_size());
    for (const auto& tok : tokenizer_.tokens()) h.str(tok);
    h.u64(static_cast<std::uint64_t>(dim()));
    for (Eigen::Index i = 0; i < embedding_table_.size(); ++i)
      h.f64(static_cast<double>(embedding_table_.data()[i]));
    for (Eigen::Index i = 0; i < projection_.size(); ++i)
      h.f64(static_cast<double>(projection_.data()[i]));
    version_ = h.hex();
  }

 private:
  Tokenizer tokenizer_;
  Matrix embedding_table_;
  Matrix projection_;
  std::string version_;
};

template <typename Scalar>
Scalar similarity(const EmbeddingT<Scalar>& a, const EmbeddingT<Scalar>& b) {
  if (a.model_version != b.model_version)
    throw Error(ErrorCode::version_mismatch, "embeddings come from different model versions");
  if (a.vector.size() != b.vector.size())
    throw Error(ErrorCode::shape_mismatch, "embedding dimensions differ");
  return a.vector.dot(b.vector);
}

// Forward pass over a batch, keeping what the backward pass needs.
template <typename Scalar>
struct EncodedBatch {
  std::vector<std::vector<std::int32_t>> ids;
  MatrixX<Scalar> pooled;   // n x d
  VectorX<Scalar> norms;    // |P u| per row
  MatrixX<Scalar> outputs;  // n x d, unit rows
};

template <typename Scalar>
EncodedBatch<Scalar> encode_forward(const EncoderModel<Scalar>& model,
                                    std::span<const std::string> texts) {
  const auto n = static_cast<Eigen::Index>(texts.size());
  EncodedBatch<Scalar> b;
  b.ids.reserve(texts.size());
  b.pooled.resize(n, model.dim());
  for (Eigen::Index i = 0; i < n; ++i) {
    b.ids.push_back(model.tokenizer().tokenize(texts[static_cast<std::size_t>(i)]));
    b.pooled.row(i) = model.pool(b.ids.back()).transpose();
  }
  MatrixX<Scalar> z = b.pooled * model.projection().transpose();
  b.norms = z.rowwise().norm();
  b.outputs.resize(n, model.dim());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (b.norms(i) > Scalar(0))
      b.outputs.row(i) = z.row(i) / b.norms(i);
    else
      b.outputs.row(i) = VectorX<Scalar>::Unit(model.dim(), 0).transpose();
  }
  return b;
}

// Contracts `upstream` (n x d, dL/d outputs) back onto the parameters and
// adds the result into `grads`.
template <typename Scalar>
void accumulate_gradients(const EncoderModel<Scalar>& model, const EncodedBatch<Scalar>& batch,
                          const MatrixX<Scalar>& upstream, EncoderGradientsT<Scalar>& grads) {
  if (upstream.rows() != batch.outputs.rows() || upstream.cols() != model.dim())
    throw Error(ErrorCode::shape_mismatch, "upstream gradient must be n x d");
  const Eigen::Index n = upstream.rows();
  // dy/dz = (I - y y^T) / |z|
  MatrixX<Scalar> grad_z(n, model.dim());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(batch.norms(i) > Scalar(0))) {
      grad_z.row(i).setZero();
      continue;
    }
    const auto y = batch.outputs.row(i);
    const auto g = upstream.row(i);
    grad_z.row(i) = (g - y * g.dot(y)) / batch.norms(i);
  }
  grads.projection.noalias() += grad_z.transpose() * batch.pooled;
  const MatrixX<Scalar> grad_u = grad_z * model.projection();
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& ids = batch.ids[static_cast<std::size_t>(i)];
    if (ids.empty()) {
      grads.embedding_table.row(Tokenizer::kEmptyId) += grad_u.row(i);
      continue;
    }
    const Scalar share = Scalar(1) / static_cast<Scalar>(ids.size());
    for (std::int32_t t : ids) grads.embedding_table.row(t) += share * grad_u.row(i);
  }
}

template <typename Scalar>
EncoderGradientsT<Scalar> encode_batch_with_grads(const EncoderModel<Scalar>& model,
                                                  std::span<const std::string> texts,
                                                  const MatrixX<Scalar>& upstream) {
  if (upstream.rows() != static_cast<Eigen::Index>(texts.size()))
    throw Error(ErrorCode::shape_mismatch, "one upstream gradient row per text is required");
  auto grads = model.zero_gradients();
  accumulate_gradients(model, encode_forward(model, texts), upstream, grads);
  return grads;
}

using Encoder = EncoderModel<double>;
using Embedding = EmbeddingT<double>;
using EncoderGradients = EncoderGradientsT<double>;

}  // namespace premise
