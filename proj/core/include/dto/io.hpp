#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dto/types.hpp"

namespace dto {

/// Writes through a sibling temp file and renames it into place, so readers
/// never see a partial file under `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

std::uint64_t hash_file(const std::filesystem::path& path);

/// One compact JSON document per line.
std::string to_jsonl(const std::vector<nlohmann::json>& rows);

struct JsonlRead {
  std::vector<nlohmann::json> rows;
  std::vector<std::size_t> bad_lines;  // 1-based line numbers that failed to parse
};

JsonlRead read_jsonl(const std::filesystem::path& path);

/// Column names for {id, problem, answer} in a dataset file.
struct DatasetFields {
  std::string id = "id";
  std::string problem = "problem";
  std::string answer = "answer";
};

struct ProblemSet {
  std::vector<Problem> problems;
  std::size_t skipped = 0;  // unreadable, incomplete or duplicate rows
};

/// JSONL dataset; ids must be unique and answers non-empty. Other string
/// fields land in Problem::metadata.
ProblemSet load_problems(const std::filesystem::path& path, const DatasetFields& fields = {});

}  // namespace dto
