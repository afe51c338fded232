#include "cogsig/jsonio.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>

#include "cogsig/error.hpp"

namespace cogsig {

void for_each_record(std::istream& in, const std::function<void(const json&, std::size_t)>& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return c == ' ' || c == '\t'; })) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      throw error(errc::parse, std::string("malformed JSON: ") + e.what(), line_no);
    }
    if (!record.is_object()) throw error(errc::parse, "record is not a JSON object", line_no);
    if (record.size() == 1 && record.contains(kProvenanceKey)) continue;
    fn(record, line_no);
  }
}

void check_fields(const json& record, std::initializer_list<std::string_view> allowed, bool strict, std::size_t line) {
  if (!strict) return;
  for (const auto& [key, value] : record.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw error(errc::validation, "unknown field '" + key + "'", line);
  }
}

const json& require(const json& record, std::string_view key, std::size_t line) {
  auto it = record.find(std::string(key));
  if (it == record.end()) throw error(errc::parse, "missing field '" + std::string(key) + "'", line);
  return *it;
}

std::string require_string(const json& record, std::string_view key, std::size_t line) {
  const json& v = require(record, key, line);
  if (!v.is_string()) throw error(errc::parse, "field '" + std::string(key) + "' must be a string", line);
  return v.get<std::string>();
}

std::int64_t require_integer(const json& record, std::string_view key, std::size_t line) {
  const json& v = require(record, key, line);
  if (!v.is_number_integer()) throw error(errc::parse, "field '" + std::string(key) + "' must be an integer", line);
  return v.get<std::int64_t>();
}

double require_number(const json& record, std::string_view key, std::size_t line) {
  const json& v = require(record, key, line);
  if (!v.is_number()) throw error(errc::parse, "field '" + std::string(key) + "' must be a number", line);
  return v.get<double>();
}

std::string dump_line(const ordered_json& j) {
  std::string s = j.dump();
  s += '\n';
  return s;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

ordered_json provenance_record(std::string_view config_hash, std::uint64_t seed) {
  ordered_json p;
  p["config_hash"] = std::string(config_hash);
  p["seed"] = seed;
  p["version"] = std::string(kToolkitVersion);
  ordered_json j;
  j[std::string(kProvenanceKey)] = std::move(p);
  return j;
}

}  // namespace cogsig
