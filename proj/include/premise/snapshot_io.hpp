#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>

#include "premise/index.hpp"

namespace premise {

// Binary snapshot cache, little-endian:
//   "PSSNAPSH" | u64 format=1 | str corpus_snapshot_id | str model_version |
//   u64 n | u64 d | n x (str name, u64 signature_hash) | n*d f64 rows (row-major)
void write_snapshot(const IndexSnapshot& snapshot, std::ostream& out);
IndexSnapshot read_snapshot(std::istream& in);

// Cache file name derived from (corpus_snapshot_id, model_version).
std::filesystem::path snapshot_cache_path(const std::filesystem::path& dir,
                                          const std::string& corpus_snapshot_id,
                                          const std::string& model_version);

// Loads the cached snapshot for (corpus, model) from `dir`, or builds and
// stores it. `built` reports which happened.
std::shared_ptr<const IndexSnapshot> load_or_build_snapshot(const std::filesystem::path& dir,
                                                            const Encoder& model, const Corpus& corpus,
                                                            bool* built = nullptr);

}  // namespace premise
