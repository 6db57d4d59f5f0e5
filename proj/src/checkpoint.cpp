#include "premise/checkpoint.hpp"

#include <fstream>

#include "premise/binary_io.hpp"

namespace premise {

namespace {
constexpr char kMagic[9] = "PSENCODR";
constexpr std::uint64_t kFormat = 1;
}  // namespace

void write_checkpoint(const Encoder& model, std::ostream& out) {
  out.write(kMagic, 8);
  binio::put_u64(out, kFormat);
  const Tokenizer& tok = model.tokenizer();
  binio::put_u64(out, tok.max_len());
  binio::put_u64(out, tok.vocab_size());
  for (const auto& t : tok.tokens()) binio::put_str(out, t);
  binio::put_u64(out, static_cast<std::uint64_t>(model.dim()));
  for (Eigen::Index i = 0; i < model.embedding_table().size(); ++i)
    binio::put_f64(out, model.embedding_table().data()[i]);
  for (Eigen::Index i = 0; i < model.projection().size(); ++i)
    binio::put_f64(out, model.projection().data()[i]);
  binio::put_str(out, model.version());
}

Encoder read_checkpoint(std::istream& in) {
  binio::expect_magic(in, kMagic);
  if (binio::get_u64(in) != kFormat) throw Error(ErrorCode::io_error, "unsupported checkpoint format");
  const std::uint64_t max_len = binio::get_u64(in);
  const std::uint64_t vocab = binio::get_u64(in);
  if (vocab < 2 || vocab > (1u << 24)) throw Error(ErrorCode::io_error, "vocabulary size out of range");
  std::vector<std::string> tokens;
  tokens.reserve(vocab);
  for (std::uint64_t i = 0; i < vocab; ++i) tokens.push_back(binio::get_str(in));
  if (tokens[0] != "<unk>" || tokens[1] != "<empty>")
    throw Error(ErrorCode::io_error, "checkpoint vocabulary lacks reserved tokens");
  tokens.erase(tokens.begin(), tokens.begin() + 2);
  const std::uint64_t d = binio::get_u64(in);
  if (d == 0 || d > 4096) throw Error(ErrorCode::io_error, "embedding dimension out of range");
  const auto rows = static_cast<Eigen::Index>(vocab);
  const auto dim = static_cast<Eigen::Index>(d);
  Encoder::Matrix table(rows, dim);
  for (Eigen::Index i = 0; i < table.size(); ++i) table.data()[i] = binio::get_f64(in);
  Encoder::Matrix projection(dim, dim);
  for (Eigen::Index i = 0; i < projection.size(); ++i) projection.data()[i] = binio::get_f64(in);
  const std::string stored_version = binio::get_str(in);
  Encoder model(Tokenizer(std::move(tokens), max_len), std::move(table), std::move(projection));
  if (model.version() != stored_version)
    throw Error(ErrorCode::io_error, "checkpoint version hash does not match its parameters");
  return model;
}

void save_checkpoint(const Encoder& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  write_checkpoint(model, out);
}

Encoder load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace premise
