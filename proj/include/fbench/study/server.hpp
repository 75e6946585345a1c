#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "fbench/study/design.hpp"
#include "fbench/study/store.hpp"

namespace httplib {
class Server;
}

namespace fbench::study {

// On-disk study state under one directory:
//   pairs.json, assignments.json, images/, ratings.jsonl, ratings.snapshot.json
struct StudyPaths {
  std::filesystem::path root;
  std::filesystem::path pairs() const { return root / "pairs.json"; }
  std::filesystem::path assignments() const { return root / "assignments.json"; }
  std::filesystem::path images() const { return root / "images"; }
};

std::vector<StudyPair> read_pairs(const std::filesystem::path& p);
void write_pairs(const std::filesystem::path& p, const std::vector<StudyPair>& pairs);
std::vector<Assignment> read_assignments(const std::filesystem::path& p);
void write_assignments(const std::filesystem::path& p, const std::vector<Assignment>& a);

struct ExportedRating {
  HumanRating rating;
  PairSource source;
};
// One line per rating with the pair source attached.
std::string export_ratings(const RatingStore& store, const std::vector<StudyPair>& pairs);
std::vector<ExportedRating> parse_export(const std::string& jsonl);

class StudyServer {
 public:
  StudyServer(StudyPaths paths, std::size_t raters_per_pair, std::filesystem::path static_dir = {});
  ~StudyServer();
  StudyServer(const StudyServer&) = delete;
  StudyServer& operator=(const StudyServer&) = delete;

  // Binds and serves on a background thread; returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  // Blocks until stop() is called from another thread or a signal handler.
  void listen(const std::string& host, int port);
  void stop();

  RatingStore& store() { return *store_; }
  const std::vector<StudyPair>& pairs() const { return pairs_; }

  // Route handlers, usable without a socket. Return (status, body).
  std::pair<int, nlohmann::json> get_assignment(const std::string& rater_id) const;
  std::pair<int, nlohmann::json> get_pair(const std::string& pair_id) const;
  std::pair<int, nlohmann::json> post_rating(const std::string& body);
  nlohmann::json get_progress() const;

 private:
  void install_routes();

  StudyPaths paths_;
  std::size_t raters_per_pair_;
  std::filesystem::path static_dir_;
  std::vector<StudyPair> pairs_;
  std::map<std::string, std::size_t> pair_index_;
  std::unique_ptr<RatingStore> store_;
  std::unique_ptr<httplib::Server> http_;
  std::thread thread_;
};

}  // namespace fbench::study
