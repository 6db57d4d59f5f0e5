#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace premise {

enum class ErrorCode {
  schema_violation,
  dangling_premise,
  import_cycle,
  unknown_module,
  lint_failure,
  version_mismatch,
  shape_mismatch,
  unknown_name,
  conflicting_duplicate,
  empty_corpus,
  non_finite_loss,
  unknown_snapshot,
  malformed_request,
  request_too_large,
  io_error,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace premise
