#include "dto/io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "dto/errors.hpp"
#include "dto/hash.hpp"

namespace dto {

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::uint64_t hash_file(const std::filesystem::path& path) { return fnv1a64(read_file(path)); }

std::string to_jsonl(const std::vector<nlohmann::json>& rows) {
  std::string out;
  for (const auto& r : rows) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

JsonlRead read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  JsonlRead out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.rows.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error&) {
      out.bad_lines.push_back(lineno);
    }
  }
  return out;
}

ProblemSet load_problems(const std::filesystem::path& path, const DatasetFields& fields) {
  JsonlRead raw = read_jsonl(path);
  ProblemSet set;
  set.skipped = raw.bad_lines.size();
  std::set<std::string> seen;
  for (const auto& row : raw.rows) {
    auto text_field = [&](const std::string& name) -> std::optional<std::string> {
      if (!row.is_object() || !row.contains(name)) return std::nullopt;
      const auto& v = row[name];
      if (v.is_string()) return v.get<std::string>();
      if (v.is_number()) return v.dump();
      return std::nullopt;
    };
    auto id = text_field(fields.id);
    auto statement = text_field(fields.problem);
    auto answer = text_field(fields.answer);
    if (!id || id->empty() || !statement || statement->empty() || !answer || answer->empty() ||
        seen.contains(*id)) {
      ++set.skipped;
      continue;
    }
    seen.insert(*id);
    Problem p{*id, *statement, *answer, {}};
    for (const auto& [key, value] : row.items()) {
      if (key != fields.id && key != fields.problem && key != fields.answer && value.is_string()) {
        p.metadata[key] = value.get<std::string>();
      }
    }
    set.problems.push_back(std::move(p));
  }
  return set;
}

}  // namespace dto
