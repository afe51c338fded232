#include "cogsig/error.hpp"

namespace cogsig {

std::string_view to_string(errc code) {
  switch (code) {
    case errc::parse: return "parse_error";
    case errc::validation: return "validation_error";
    case errc::duplicate_id: return "duplicate_id";
    case errc::dangling_record: return "dangling_record";
    case errc::dangling_fixation: return "dangling_fixation";
    case errc::config: return "config_error";
    case errc::state: return "state_error";
    case errc::domain: return "domain_error";
    case errc::precondition: return "precondition_violation";
    case errc::unsupported_task: return "unsupported_task";
    case errc::dimension_mismatch: return "dimension_mismatch";
    case errc::io: return "io_error";
  }
  return "error";
}

namespace {

std::string format_what(errc code, const std::string& message, std::optional<std::size_t> line) {
  std::string out(to_string(code));
  if (line) out += " (line " + std::to_string(*line) + ")";
  out += ": ";
  out += message;
  return out;
}

}  // namespace

error::error(errc code, const std::string& message, std::optional<std::size_t> line)
    : std::runtime_error(format_what(code, message, line)), code_(code), line_(line), detail_(message) {}

}  // namespace cogsig
