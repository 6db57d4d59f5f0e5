#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "premise/corpus.hpp"
#include "premise/encoder.hpp"

namespace premise {

struct ScoredName {
  std::string name;
  double score;
  bool operator==(const ScoredName&) const = default;
};

struct RetrievalResult {
  std::vector<ScoredName> ranked;  // score descending, ties by name
  std::size_t k_requested = 0;
};

// Immutable matrix of unit premise embeddings, one row per name.
template <typename Scalar>
class IndexSnapshotT {
 public:
  using Matrix = MatrixX<Scalar>;

  IndexSnapshotT(Matrix rows, std::vector<std::string> names, std::vector<std::uint64_t> signature_hashes,
                 std::string corpus_snapshot_id, std::string model_version)
      : rows_(std::move(rows)),
        names_(std::move(names)),
        signature_hashes_(std::move(signature_hashes)),
        corpus_snapshot_id_(std::move(corpus_snapshot_id)),
        model_version_(std::move(model_version)) {
    if (static_cast<std::size_t>(rows_.rows()) != names_.size() || names_.size() != signature_hashes_.size())
      throw Error(ErrorCode::shape_mismatch, "snapshot rows, names and hashes must align");
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (!row_of_.emplace(names_[i], static_cast<Eigen::Index>(i)).second)
        throw Error(ErrorCode::conflicting_duplicate, "duplicate snapshot name '" + names_[i] + "'");
    }
  }

  Eigen::Index size() const { return rows_.rows(); }
  Eigen::Index dim() const { return rows_.cols(); }
  const Matrix& rows() const { return rows_; }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<std::uint64_t>& signature_hashes() const { return signature_hashes_; }
  const std::string& corpus_snapshot_id() const { return corpus_snapshot_id_; }
  const std::string& model_version() const { return model_version_; }

  std::optional<Eigen::Index> find(const std::string& name) const {
    auto it = row_of_.find(name);
    if (it == row_of_.end()) return std::nullopt;
    return it->second;
  }

 private:
  Matrix rows_;
  std::vector<std::string> names_;
  std::vector<std::uint64_t> signature_hashes_;
  std::string corpus_snapshot_id_;
  std::string model_version_;
  std::unordered_map<std::string, Eigen::Index> row_of_;
};

// Extra rows for premises absent from the base snapshot.
template <typename Scalar>
struct DeltaOverlayT {
  std::shared_ptr<const IndexSnapshotT<Scalar>> base;
  MatrixX<Scalar> extra;
  std::vector<std::string> names;
  std::vector<std::uint64_t> signature_hashes;
  std::unordered_map<std::string, Eigen::Index> row_of;

  Eigen::Index size() const { return extra.rows(); }
};

using IndexSnapshot = IndexSnapshotT<double>;
using DeltaOverlay = DeltaOverlayT<double>;

template <typename Scalar>
IndexSnapshotT<Scalar> build_snapshot(const EncoderModel<Scalar>& model, const Corpus& corpus) {
  std::vector<const PremiseRecord*> eligible;
  for (const auto& p : corpus.premises())
    if (p.eligible()) eligible.push_back(&p);
  MatrixX<Scalar> rows(static_cast<Eigen::Index>(eligible.size()), model.dim());
  std::vector<std::string> names;
  std::vector<std::uint64_t> hashes;
  for (std::size_t i = 0; i < eligible.size(); ++i) {
    rows.row(static_cast<Eigen::Index>(i)) = model.encode(eligible[i]->signature).vector.transpose();
    names.push_back(eligible[i]->name);
    hashes.push_back(stable_hash64(eligible[i]->signature));
  }
  return IndexSnapshotT<Scalar>(std::move(rows), std::move(names), std::move(hashes), corpus.snapshot_id(),
                                model.version());
}

// Overlay of `premises` on `base`. Names already in the base (or repeated in
// the list) with the same signature are dropped; with a different signature
// they are an error. `embed(const PremiseRecord&)` yields the unit row.
template <typename Scalar, typename EmbedFn>
DeltaOverlayT<Scalar> apply_delta(std::shared_ptr<const IndexSnapshotT<Scalar>> base,
                                  std::span<const PremiseRecord> premises, EmbedFn&& embed) {
  DeltaOverlayT<Scalar> overlay;
  std::vector<const PremiseRecord*> fresh;
  for (const auto& p : premises) {
    const std::uint64_t h = stable_hash64(p.signature);
    if (auto row = base->find(p.name)) {
      if (base->signature_hashes()[static_cast<std::size_t>(*row)] != h)
        throw Error(ErrorCode::conflicting_duplicate,
                    "premise '" + p.name + "' already exists with a different signature");
      continue;
    }
    if (auto it = overlay.row_of.find(p.name); it != overlay.row_of.end()) {
      if (overlay.signature_hashes[static_cast<std::size_t>(it->second)] != h)
        throw Error(ErrorCode::conflicting_duplicate, "premise '" + p.name + "' uploaded twice with different signatures");
      continue;
    }
    overlay.row_of.emplace(p.name, static_cast<Eigen::Index>(fresh.size()));
    overlay.names.push_back(p.name);
    overlay.signature_hashes.push_back(h);
    fresh.push_back(&p);
  }
  overlay.extra.resize(static_cast<Eigen::Index>(fresh.size()), base->dim());
  for (std::size_t i = 0; i < fresh.size(); ++i)
    overlay.extra.row(static_cast<Eigen::Index>(i)) = embed(*fresh[i]).transpose();
  overlay.base = std::move(base);
  return overlay;
}

template <typename Scalar>
DeltaOverlayT<Scalar> apply_delta(std::shared_ptr<const IndexSnapshotT<Scalar>> base,
                                  std::span<const PremiseRecord> premises, const EncoderModel<Scalar>& model) {
  if (base->model_version() != model.version())
    throw Error(ErrorCode::version_mismatch, "overlay model differs from the snapshot model");
  return apply_delta(std::move(base), premises,
                     [&](const PremiseRecord& p) { return model.encode(p.signature).vector; });
}

namespace detail {

struct Candidate {
  double score;
  const std::string* name;
};

inline bool ranks_before(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  return *a.name < *b.name;
}

inline RetrievalResult take_top(std::vector<Candidate>& cands, std::size_t k) {
  RetrievalResult r;
  r.k_requested = k;
  const std::size_t n = std::min(k, cands.size());
  std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(n), cands.end(), ranks_before);
  r.ranked.reserve(n);
  for (std::size_t i = 0; i < n; ++i) r.ranked.push_back({*cands[i].name, cands[i].score});
  return r;
}

}  // namespace detail

// Exact top-k by dot product over `mask` (all rows when absent), ties broken
// by ascending name.
template <typename Scalar>
RetrievalResult select_premises(const EmbeddingT<Scalar>& query, std::size_t k,
                                const std::optional<std::span<const std::string>>& mask,
                                const IndexSnapshotT<Scalar>& snapshot,
                                const DeltaOverlayT<Scalar>* overlay = nullptr) {
  if (query.model_version != snapshot.model_version())
    throw Error(ErrorCode::version_mismatch, "query and snapshot come from different model versions");
  if (query.vector.size() != snapshot.dim())
    throw Error(ErrorCode::shape_mismatch, "query dimension differs from snapshot");
  if (overlay != nullptr && overlay->base.get() != &snapshot)
    throw Error(ErrorCode::version_mismatch, "overlay belongs to a different snapshot");

  std::vector<detail::Candidate> cands;
  if (k == 0) return {{}, 0};
  if (!mask) {
    const VectorX<Scalar> base_scores = snapshot.rows() * query.vector;
    cands.reserve(static_cast<std::size_t>(snapshot.size()) + (overlay ? overlay->names.size() : 0));
    for (Eigen::Index i = 0; i < snapshot.size(); ++i)
      cands.push_back({static_cast<double>(base_scores(i)), &snapshot.names()[static_cast<std::size_t>(i)]});
    if (overlay != nullptr && overlay->size() > 0) {
      const VectorX<Scalar> extra_scores = overlay->extra * query.vector;
      for (Eigen::Index i = 0; i < overlay->size(); ++i)
        cands.push_back({static_cast<double>(extra_scores(i)), &overlay->names[static_cast<std::size_t>(i)]});
    }
    return detail::take_top(cands, k);
  }

  std::unordered_set<std::string_view> seen;
  cands.reserve(mask->size());
  for (const std::string& name : *mask) {
    if (!seen.insert(name).second) continue;
    if (auto row = snapshot.find(name)) {
      cands.push_back({static_cast<double>(snapshot.rows().row(*row).dot(query.vector.transpose())),
                       &snapshot.names()[static_cast<std::size_t>(*row)]});
      continue;
    }
    if (overlay != nullptr) {
      if (auto it = overlay->row_of.find(name); it != overlay->row_of.end()) {
        cands.push_back({static_cast<double>(overlay->extra.row(it->second).dot(query.vector.transpose())),
                         &overlay->names[static_cast<std::size_t>(it->second)]});
        continue;
      }
    }
    throw Error(ErrorCode::unknown_name, "candidate '" + name + "' is not in the index");
  }
  return detail::take_top(cands, k);
}

}  // namespace premise
