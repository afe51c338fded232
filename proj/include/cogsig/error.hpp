#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cogsig {

enum class errc {
  parse,
  validation,
  duplicate_id,
  dangling_record,
  dangling_fixation,
  config,
  state,
  domain,
  precondition,
  unsupported_task,
  dimension_mismatch,
  io,
};

std::string_view to_string(errc code);

// Every failure the toolkit reports. `line` is 1-based and set only for
// errors raised while reading a line-delimited stream.
class error : public std::runtime_error {
 public:
  error(errc code, const std::string& message, std::optional<std::size_t> line = std::nullopt);

  errc code() const noexcept { return code_; }
  std::optional<std::size_t> line() const noexcept { return line_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  errc code_;
  std::optional<std::size_t> line_;
  std::string detail_;
};

}  // namespace cogsig
