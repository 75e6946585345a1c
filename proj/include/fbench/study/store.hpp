#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fbench/study/design.hpp"

namespace fbench::study {

enum class RatingError { none, unknown_rater, unassigned_pair, out_of_scale, already_rated };
std::string to_string(RatingError e);

struct RatingAck {
  RatingError error = RatingError::none;
  bool duplicate = false;
  std::string message;
  HumanRating stored;
  bool ok() const { return error == RatingError::none; }
};

struct Progress {
  std::size_t done = 0;
  std::size_t total = 0;
};

// Ratings in arrival order; shared with readers without locking.
struct RatingsView {
  std::vector<HumanRating> ratings;
  std::map<std::pair<std::string, std::string>, std::size_t> by_key;  // (rater, pair) -> index
  std::map<std::string, std::size_t> per_rater;
  std::map<std::string, std::size_t> per_pair;
};

// Append-only log `ratings.jsonl` plus `ratings.snapshot.json` written every
// `snapshot_every` accepted ratings. Writes are serialized; reads use the
// latest published view.
class RatingStore {
 public:
  RatingStore(std::filesystem::path dir, std::vector<Assignment> assignments, std::size_t snapshot_every = 50,
              std::function<std::string()> clock = {});

  RatingAck record_rating(const std::string& rater_id, const std::string& pair_id, const nlohmann::json& score);
  RatingAck record_rating(const HumanRating& r);

  std::shared_ptr<const RatingsView> view() const;
  std::vector<HumanRating> ratings() const { return view()->ratings; }
  const std::vector<Assignment>& assignments() const { return assignments_; }
  const Assignment* assignment(const std::string& rater_id) const;
  std::vector<std::string> pending(const std::string& rater_id) const;
  std::map<std::string, Progress> rater_progress() const;
  std::map<std::string, Progress> pair_progress() const;
  void snapshot();

  std::filesystem::path log_path() const { return dir_ / "ratings.jsonl"; }
  std::filesystem::path snapshot_path() const { return dir_ / "ratings.snapshot.json"; }

 private:
  void load();
  void publish(std::shared_ptr<const RatingsView> v);

  std::filesystem::path dir_;
  std::vector<Assignment> assignments_;
  std::map<std::string, std::set<std::string>> assigned_;
  std::map<std::string, std::size_t> pair_quota_;
  std::size_t snapshot_every_;
  std::function<std::string()> clock_;
  std::mutex write_mu_;
  std::shared_ptr<const RatingsView> view_;
};

std::string utc_timestamp();

}  // namespace fbench::study
