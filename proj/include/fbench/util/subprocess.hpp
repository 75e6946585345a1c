#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fbench {

struct ProcessOptions {
  std::vector<std::string> argv;
  std::filesystem::path cwd;
  std::chrono::milliseconds timeout{0};  // 0 = unlimited
  std::optional<std::string> stdin_data;
  std::vector<std::pair<std::string, std::string>> env;  // added/overridden variables
  std::size_t max_output_bytes = 64 * 1024 * 1024;
};

struct ProcessResult {
  int exit_code = -1;  // 128+signal when killed by a signal
  bool timed_out = false;
  bool spawn_failed = false;
  std::string out;
  std::string err;
  std::chrono::milliseconds elapsed{0};

  bool ok() const { return !spawn_failed && !timed_out && exit_code == 0; }
};

// Runs a child in its own process group; on timeout the whole group is killed.
ProcessResult run_process(const ProcessOptions& opts);

// Convenience: runs `/bin/sh -c command`.
ProcessResult run_shell(const std::string& command, std::chrono::milliseconds timeout,
                        const std::filesystem::path& cwd = {});

// Absolute path of an executable found on PATH (or the argument itself when it
// contains a slash and is executable).
std::optional<std::filesystem::path> find_executable(const std::string& name);

}  // namespace fbench
