#pragma once

#include <filesystem>
#include <iosfwd>

#include "premise/encoder.hpp"

namespace premise {

// Binary checkpoint, little-endian:
//   "PSENCODR" | u64 format=1 | u64 max_len | u64 V | V x str token |
//   u64 d | V*d f64 embedding table (row-major) | d*d f64 projection |
//   str version
// A string is u64 length followed by its bytes.
void write_checkpoint(const Encoder& model, std::ostream& out);
Encoder read_checkpoint(std::istream& in);

void save_checkpoint(const Encoder& model, const std::filesystem::path& path);
Encoder load_checkpoint(const std::filesystem::path& path);

}  // namespace premise
