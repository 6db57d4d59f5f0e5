#include "premise/snapshot_io.hpp"

#include <fstream>

#include "premise/binary_io.hpp"

namespace premise {

namespace {
constexpr char kMagic[9] = "PSSNAPSH";
constexpr std::uint64_t kFormat = 1;
}  // namespace

void write_snapshot(const IndexSnapshot& snapshot, std::ostream& out) {
  out.write(kMagic, 8);
  binio::put_u64(out, kFormat);
  binio::put_str(out, snapshot.corpus_snapshot_id());
  binio::put_str(out, snapshot.model_version());
  binio::put_u64(out, static_cast<std::uint64_t>(snapshot.size()));
  binio::put_u64(out, static_cast<std::uint64_t>(snapshot.dim()));
  for (std::size_t i = 0; i < snapshot.names().size(); ++i) {
    binio::put_str(out, snapshot.names()[i]);
    binio::put_u64(out, snapshot.signature_hashes()[i]);
  }
  for (Eigen::Index i = 0; i < snapshot.rows().size(); ++i) binio::put_f64(out, snapshot.rows().data()[i]);
}

IndexSnapshot read_snapshot(std::istream& in) {
  binio::expect_magic(in, kMagic);
  if (binio::get_u64(in) != kFormat) throw Error(ErrorCode::io_error, "unsupported snapshot format");
  std::string corpus_id = binio::get_str(in);
  std::string model_version = binio::get_str(in);
  const std::uint64_t n = binio::get_u64(in);
  const std::uint64_t d = binio::get_u64(in);
  if (n > (1u << 26) || d == 0 || d > 4096) throw Error(ErrorCode::io_error, "snapshot shape out of range");
  std::vector<std::string> names;
  std::vector<std::uint64_t> hashes;
  names.reserve(n);
  hashes.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    names.push_back(binio::get_str(in));
    hashes.push_back(binio::get_u64(in));
  }
  IndexSnapshot::Matrix rows(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < rows.size(); ++i) rows.data()[i] = binio::get_f64(in);
  return IndexSnapshot(std::move(rows), std::move(names), std::move(hashes), std::move(corpus_id),
                       std::move(model_version));
}

std::filesystem::path snapshot_cache_path(const std::filesystem::path& dir, const std::string& corpus_snapshot_id,
                                          const std::string& model_version) {
  return dir / ("snapshot-" + corpus_snapshot_id + "-" + model_version + ".bin");
}

std::shared_ptr<const IndexSnapshot> load_or_build_snapshot(const std::filesystem::path& dir,
                                                            const Encoder& model, const Corpus& corpus,
                                                            bool* built) {
  const auto path = snapshot_cache_path(dir, corpus.snapshot_id(), model.version());
  if (std::ifstream in(path, std::ios::binary); in) {
    auto snap = std::make_shared<const IndexSnapshot>(read_snapshot(in));
    if (snap->corpus_snapshot_id() == corpus.snapshot_id() && snap->model_version() == model.version()) {
      if (built != nullptr) *built = false;
      return snap;
    }
  }
  auto snap = std::make_shared<const IndexSnapshot>(build_snapshot(model, corpus));
  std::filesystem::create_directories(dir);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  write_snapshot(*snap, out);
  if (built != nullptr) *built = true;
  return snap;
}

}  // namespace premise
