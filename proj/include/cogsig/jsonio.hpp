#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <iosfwd>
#include <string>
#include <string_view>

#include "json.hpp"

namespace cogsig {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

inline constexpr std::string_view kToolkitVersion = "0.3.0";
inline constexpr std::string_view kProvenanceKey = "_provenance";

// Calls fn(record, line_number) for every non-blank line of a JSON-lines
// stream. Provenance header lines are skipped. Malformed lines raise a parse
// error carrying the 1-based line number.
void for_each_record(std::istream& in, const std::function<void(const json&, std::size_t)>& fn);

// Rejects (strict) or tolerates keys outside `allowed`.
void check_fields(const json& record, std::initializer_list<std::string_view> allowed, bool strict, std::size_t line);

const json& require(const json& record, std::string_view key, std::size_t line);
std::string require_string(const json& record, std::string_view key, std::size_t line);
std::int64_t require_integer(const json& record, std::string_view key, std::size_t line);
double require_number(const json& record, std::string_view key, std::size_t line);

std::string dump_line(const ordered_json& j);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

// {"_provenance":{"config_hash":...,"seed":...,"version":...}}
ordered_json provenance_record(std::string_view config_hash, std::uint64_t seed);

}  // namespace cogsig
