#include "fbench/study/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <stdexcept>

#include "fbench/util/fs.hpp"
#include "fbench/util/text.hpp"

namespace fbench::study {

namespace stdfs = std::filesystem;
using nlohmann::json;

std::string to_string(RatingError e) {
  switch (e) {
    case RatingError::none: return "none";
    case RatingError::unknown_rater: return "unknown_rater";
    case RatingError::unassigned_pair: return "unassigned_pair";
    case RatingError::out_of_scale: return "out_of_scale";
    case RatingError::already_rated: return "already_rated";
  }
  return "none";
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

void add(RatingsView& v, const HumanRating& r) {
  v.by_key[{r.rater_id, r.pair_id}] = v.ratings.size();
  v.ratings.push_back(r);
  ++v.per_rater[r.rater_id];
  ++v.per_pair[r.pair_id];
}

void append_line(const stdfs::path& p, const std::string& line) {
  const int fd = ::open(p.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw std::runtime_error("cannot open " + p.string() + ": " + std::strerror(errno));
  const std::string data = line + "\n";
  std::size_t off = 0;
  while (off < data.size()) {
    const auto n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0 && errno == EINTR) continue;
    if (n < 0) {
      ::close(fd);
      throw std::runtime_error("cannot append to " + p.string() + ": " + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
}

}  // namespace

RatingStore::RatingStore(stdfs::path dir, std::vector<Assignment> assignments, std::size_t snapshot_every,
                         std::function<std::string()> clock)
    : dir_(std::move(dir)),
      assignments_(std::move(assignments)),
      snapshot_every_(snapshot_every ? snapshot_every : 1),
      clock_(clock ? std::move(clock) : std::function<std::string()>(utc_timestamp)) {
  for (const auto& a : assignments_) {
    assigned_[a.rater_id].insert(a.pair_ids.begin(), a.pair_ids.end());
    for (const auto& p : a.pair_ids) ++pair_quota_[p];
  }
  stdfs::create_directories(dir_);
  load();
}

void RatingStore::load() {
  auto v = std::make_shared<RatingsView>();
  std::size_t from_snapshot = 0;
  std::vector<std::string> lines;
  if (stdfs::exists(log_path())) {
    for (auto& l : text::split(fs::read_file(log_path()), '\n'))
      if (!text::trim(l).empty()) lines.push_back(l);
  }
  if (stdfs::exists(snapshot_path())) {
    auto s = fs::read_json(snapshot_path());
    const auto n = s.at("log_lines").get<std::size_t>();
    if (n <= lines.size()) {
      for (const auto& r : s.at("ratings")) add(*v, human_rating_from_json(r));
      from_snapshot = n;
    }
  }
  for (std::size_t i = from_snapshot; i < lines.size(); ++i) {
    json j;
    try {
      j = json::parse(lines[i]);
    } catch (const json::parse_error&) {
      if (i + 1 == lines.size()) break;  // torn final write
      throw std::runtime_error(log_path().string() + ": corrupt line " + std::to_string(i + 1));
    }
    auto r = human_rating_from_json(j);
    if (!v->by_key.count({r.rater_id, r.pair_id})) add(*v, r);
  }
  publish(v);
}

void RatingStore::publish(std::shared_ptr<const RatingsView> v) { std::atomic_store(&view_, std::move(v)); }

std::shared_ptr<const RatingsView> RatingStore::view() const { return std::atomic_load(&view_); }

RatingAck RatingStore::record_rating(const std::string& rater_id, const std::string& pair_id, const json& score) {
  RatingAck ack;
  const bool integral = score.is_number_integer() ||
                        (score.is_number_float() && std::floor(score.get<double>()) == score.get<double>());
  if (!integral || score.get<double>() < 0 || score.get<double>() > 10) {
    ack.error = RatingError::out_of_scale;
    ack.message = "score must be an integer from 0 to 10";
    return ack;
  }
  return record_rating(HumanRating{rater_id, pair_id, static_cast<int>(score.get<double>()), ""});
}

RatingAck RatingStore::record_rating(const HumanRating& in) {
  RatingAck ack;
  auto a = assigned_.find(in.rater_id);
  if (a == assigned_.end()) {
    ack.error = RatingError::unknown_rater;
    ack.message = "unknown rater " + in.rater_id;
    return ack;
  }
  if (!a->second.count(in.pair_id)) {
    ack.error = RatingError::unassigned_pair;
    ack.message = in.pair_id + " is not assigned to " + in.rater_id;
    return ack;
  }
  if (in.score < 0 || in.score > 10) {
    ack.error = RatingError::out_of_scale;
    ack.message = "score must be an integer from 0 to 10";
    return ack;
  }
  std::lock_guard lock(write_mu_);
  auto current = view();
  if (auto it = current->by_key.find({in.rater_id, in.pair_id}); it != current->by_key.end()) {
    const auto& existing = current->ratings[it->second];
    ack.stored = existing;
    if (existing.score == in.score) {
      ack.duplicate = true;
    } else {
      ack.error = RatingError::already_rated;
      ack.message = in.pair_id + " was already rated by " + in.rater_id;
    }
    return ack;
  }
  HumanRating r = in;
  r.timestamp = clock_();
  append_line(log_path(), to_json(r).dump());
  auto next = std::make_shared<RatingsView>(*current);
  add(*next, r);
  const bool snap = next->ratings.size() % snapshot_every_ == 0;
  publish(next);
  if (snap) {
    json rows = json::array();
    for (const auto& x : next->ratings) rows.push_back(to_json(x));
    fs::write_json(snapshot_path(), json{{"log_lines", next->ratings.size()}, {"ratings", rows}});
  }
  ack.stored = r;
  return ack;
}

void RatingStore::snapshot() {
  std::lock_guard lock(write_mu_);
  auto v = view();
  json rows = json::array();
  for (const auto& x : v->ratings) rows.push_back(to_json(x));
  fs::write_json(snapshot_path(), json{{"log_lines", v->ratings.size()}, {"ratings", rows}});
}

const Assignment* RatingStore::assignment(const std::string& rater_id) const {
  for (const auto& a : assignments_)
    if (a.rater_id == rater_id) return &a;
  return nullptr;
}

std::vector<std::string> RatingStore::pending(const std::string& rater_id) const {
  std::vector<std::string> out;
  const auto* a = assignment(rater_id);
  if (!a) return out;
  auto v = view();
  for (const auto& p : a->pair_ids)
    if (!v->by_key.count({rater_id, p})) out.push_back(p);
  return out;
}

std::map<std::string, Progress> RatingStore::rater_progress() const {
  auto v = view();
  std::map<std::string, Progress> out;
  for (const auto& a : assignments_) {
    auto it = v->per_rater.find(a.rater_id);
    out[a.rater_id] = {it == v->per_rater.end() ? 0 : it->second, a.pair_ids.size()};
  }
  return out;
}

std::map<std::string, Progress> RatingStore::pair_progress() const {
  auto v = view();
  std::map<std::string, Progress> out;
  for (const auto& [p, quota] : pair_quota_) {
    auto it = v->per_pair.find(p);
    out[p] = {it == v->per_pair.end() ? 0 : it->second, quota};
  }
  return out;
}

}  // namespace fbench::study
