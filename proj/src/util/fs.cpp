#include "fbench/util/fs.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "fbench/util/text.hpp"

namespace fbench::fs {

namespace stdfs = std::filesystem;

std::string read_file(const stdfs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const stdfs::path& p, std::string_view data) {
  static std::atomic<unsigned> counter{0};
  if (p.has_parent_path()) stdfs::create_directories(p.parent_path());
  auto tmp = p;
  tmp += ".tmp" + std::to_string(::getpid()) + "_" + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  stdfs::rename(tmp, p);
}

bool write_if_changed(const stdfs::path& p, std::string_view data) {
  std::error_code ec;
  if (stdfs::exists(p, ec) && read_file(p) == data) return false;
  write_file_atomic(p, data);
  return true;
}

std::string dump_json(const nlohmann::json& j) {
  return j.dump(2, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
}

nlohmann::json read_json(const stdfs::path& p) {
  try {
    return nlohmann::json::parse(read_file(p));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(p.string() + ": " + e.what());
  }
}

void write_json(const stdfs::path& p, const nlohmann::json& j) {
  write_file_atomic(p, dump_json(j));
}

std::vector<nlohmann::json> read_jsonl(const stdfs::path& p) {
  std::vector<nlohmann::json> rows;
  std::istringstream in(read_file(p));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      rows.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error(p.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

std::string dump_jsonl(const std::vector<nlohmann::json>& rows) {
  std::string out;
  for (const auto& r : rows) {
    out += r.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
    out += '\n';
  }
  return out;
}

void write_jsonl(const stdfs::path& p, const std::vector<nlohmann::json>& rows) {
  write_file_atomic(p, dump_jsonl(rows));
}

std::vector<stdfs::path> list_files(const stdfs::path& dir) {
  std::vector<stdfs::path> out;
  for (const auto& e : stdfs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

stdfs::path make_temp_dir(std::string_view prefix) {
  auto tmpl = (stdfs::temp_directory_path() / (std::string(prefix) + "XXXXXX")).string();
  if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed for " + tmpl);
  return tmpl;
}

}  // namespace fbench::fs
