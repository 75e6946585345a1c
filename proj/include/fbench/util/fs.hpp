#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace fbench::fs {

std::string read_file(const std::filesystem::path& p);
// Writes via a temporary file and rename, creating parent directories.
void write_file_atomic(const std::filesystem::path& p, std::string_view data);
bool write_if_changed(const std::filesystem::path& p, std::string_view data);

// Stable JSON text: 2-space indent, trailing newline, UTF-8 passthrough.
std::string dump_json(const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& p);
void write_json(const std::filesystem::path& p, const nlohmann::json& j);

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& p);
std::string dump_jsonl(const std::vector<nlohmann::json>& rows);
void write_jsonl(const std::filesystem::path& p, const std::vector<nlohmann::json>& rows);

// Regular files under `dir` (recursive), sorted by path.
std::vector<std::filesystem::path> list_files(const std::filesystem::path& dir);
std::filesystem::path make_temp_dir(std::string_view prefix);

}  // namespace fbench::fs
