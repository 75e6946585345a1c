#include "fbench/study/server.hpp"

#include <httplib.h>

#include <regex>

#include "fbench/errors.hpp"
#include "fbench/util/fs.hpp"
#include "fbench/util/text.hpp"

namespace fbench::study {

namespace stdfs = std::filesystem;
using nlohmann::json;

std::vector<StudyPair> read_pairs(const stdfs::path& p) {
  std::vector<StudyPair> out;
  const auto doc = fs::read_json(p);
  for (const auto& j : doc.at("pairs")) out.push_back(study_pair_from_json(j));
  return out;
}

void write_pairs(const stdfs::path& p, const std::vector<StudyPair>& pairs) {
  json rows = json::array();
  for (const auto& x : pairs) rows.push_back(to_json(x));
  fs::write_json(p, json{{"pairs", rows}});
}

std::vector<Assignment> read_assignments(const stdfs::path& p) {
  std::vector<Assignment> out;
  const auto doc = fs::read_json(p);
  for (const auto& j : doc.at("assignments")) out.push_back(assignment_from_json(j));
  return out;
}

void write_assignments(const stdfs::path& p, const std::vector<Assignment>& a) {
  json rows = json::array();
  for (const auto& x : a) rows.push_back(to_json(x));
  fs::write_json(p, json{{"assignments", rows}});
}

std::string export_ratings(const RatingStore& store, const std::vector<StudyPair>& pairs) {
  std::map<std::string, const StudyPair*> by_id;
  for (const auto& p : pairs) by_id[p.pair_id] = &p;
  std::string out;
  for (const auto& r : store.view()->ratings) {
    json j = to_json(r);
    if (auto it = by_id.find(r.pair_id); it != by_id.end()) {
      const auto& s = it->second->source;
      j["source"] = {{"parser", s.parser}, {"doc_id", s.doc_id}, {"gt_index", s.gt_index}};
    }
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<ExportedRating> parse_export(const std::string& jsonl) {
  std::vector<ExportedRating> out;
  std::size_t line_no = 0;
  for (const auto& line : text::split(jsonl, '\n')) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ConfigError("ratings line " + std::to_string(line_no) + ": " + e.what());
    }
    ExportedRating e;
    e.rating = human_rating_from_json(j);
    const auto& s = j.at("source");
    e.source = {s.at("parser").get<std::string>(), s.at("doc_id").get<std::string>(), s.at("gt_index").get<std::size_t>()};
    out.push_back(std::move(e));
  }
  return out;
}

namespace {

json error_body(const std::string& code, const std::string& message) {
  return json{{"error", {{"code", code}, {"message", message}}}};
}

void send(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

bool safe_file_name(const std::string& s) {
  static const std::regex re("^[A-Za-z0-9_][A-Za-z0-9_.-]*$");
  return std::regex_match(s, re) && s.find("..") == std::string::npos;
}

}  // namespace

StudyServer::StudyServer(StudyPaths paths, std::size_t raters_per_pair, stdfs::path static_dir)
    : paths_(std::move(paths)), raters_per_pair_(raters_per_pair), static_dir_(std::move(static_dir)) {
  pairs_ = read_pairs(paths_.pairs());
  for (std::size_t i = 0; i < pairs_.size(); ++i) pair_index_[pairs_[i].pair_id] = i;
  for (const auto& p : pairs_)
    for (const auto& img : {p.gt_image, p.extracted_image})
      if (!stdfs::exists(paths_.images() / img))
        throw PreconditionError("image " + img + " is missing; run `study render` first");
  auto assignments = read_assignments(paths_.assignments());
  for (const auto& a : assignments)
    for (const auto& id : a.pair_ids)
      if (!pair_index_.count(id)) throw PreconditionError("assignment refers to unknown pair " + id);
  store_ = std::make_unique<RatingStore>(paths_.root, std::move(assignments));
  http_ = std::make_unique<httplib::Server>();
  install_routes();
}

StudyServer::~StudyServer() {
  stop();
  if (store_) store_->snapshot();
}

std::pair<int, json> StudyServer::get_assignment(const std::string& rater_id) const {
  const auto* a = store_->assignment(rater_id);
  if (!a) return {404, error_body("unknown_rater", "unknown rater " + rater_id)};
  const auto pending = store_->pending(rater_id);
  return {200, json{{"rater_id", rater_id},
                    {"pair_ids", a->pair_ids},
                    {"pending", pending},
                    {"completed", a->pair_ids.size() - pending.size()},
                    {"total", a->pair_ids.size()}}};
}

std::pair<int, json> StudyServer::get_pair(const std::string& pair_id) const {
  auto it = pair_index_.find(pair_id);
  if (it == pair_index_.end()) return {404, error_body("unknown_pair", "unknown pair " + pair_id)};
  const auto& p = pairs_[it->second];
  return {200, json{{"pair_id", p.pair_id},
                    {"gt_latex", p.gt_latex},
                    {"extracted_latex", p.extracted_latex},
                    {"gt_image_url", "/img/" + p.gt_image},
                    {"extracted_image_url", "/img/" + p.extracted_image}}};
}

std::pair<int, json> StudyServer::post_rating(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error&) {
    return {400, error_body("bad_request", "body is not JSON")};
  }
  if (!j.is_object() || !j.contains("rater_id") || !j["rater_id"].is_string() || !j.contains("pair_id") ||
      !j["pair_id"].is_string() || !j.contains("score") || !j["score"].is_number())
    return {400, error_body("bad_request", "expected {rater_id: string, pair_id: string, score: integer}")};
  auto ack = store_->record_rating(j["rater_id"].get<std::string>(), j["pair_id"].get<std::string>(), j["score"]);
  if (!ack.ok()) {
    const int status = ack.error == RatingError::already_rated ? 409
                       : ack.error == RatingError::out_of_scale ? 400
                                                                : 403;
    return {status, error_body(to_string(ack.error), ack.message)};
  }
  return {200, json{{"status", "ok"}, {"duplicate", ack.duplicate}, {"rating", to_json(ack.stored)}}};
}

json StudyServer::get_progress() const {
  auto view = store_->view();
  json raters = json::object(), pairs = json::object();
  std::size_t expected = 0;
  for (const auto& a : store_->assignments()) {
    auto it = view->per_rater.find(a.rater_id);
    raters[a.rater_id] = {{"done", it == view->per_rater.end() ? 0 : it->second}, {"total", a.pair_ids.size()}};
    expected += a.pair_ids.size();
  }
  std::map<std::string, std::size_t> quota;
  for (const auto& a : store_->assignments())
    for (const auto& p : a.pair_ids) ++quota[p];
  for (const auto& [p, q] : quota) {
    auto it = view->per_pair.find(p);
    pairs[p] = {{"done", it == view->per_pair.end() ? 0 : it->second}, {"total", q}};
  }
  std::size_t complete = 0;
  for (const auto& [p, m] : aggregate_human(view->ratings, raters_per_pair_)) complete += !m.incomplete;
  return json{{"total_ratings", view->ratings.size()},
              {"expected_ratings", expected},
              {"complete_pairs", complete},
              {"raters", raters},
              {"pairs", pairs}};
}

void StudyServer::install_routes() {
  auto& s = *http_;
  s.Get(R"(/api/assignment/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    auto [status, body] = get_assignment(req.matches[1]);
    send(res, status, body);
  });
  s.Get(R"(/api/pair/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    auto [status, body] = get_pair(req.matches[1]);
    send(res, status, body);
  });
  s.Post("/api/rating", [this](const httplib::Request& req, httplib::Response& res) {
    auto [status, body] = post_rating(req.body);
    send(res, status, body);
  });
  s.Get("/api/progress", [this](const httplib::Request&, httplib::Response& res) { send(res, 200, get_progress()); });
  s.Get("/api/export", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(export_ratings(*store_, pairs_), "application/x-ndjson");
  });
  s.Get(R"(/img/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string name = req.matches[1];
    const auto p = paths_.images() / name;
    if (!safe_file_name(name) || !stdfs::is_regular_file(p)) {
      send(res, 404, error_body("not_found", "no image " + name));
      return;
    }
    res.set_content(fs::read_file(p), "image/png");
  });
  if (!static_dir_.empty() && stdfs::is_directory(static_dir_)) s.set_mount_point("/", static_dir_.string());
}

int StudyServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = http_->bind_to_any_port(host);
  } else if (!http_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
  return bound;
}

void StudyServer::listen(const std::string& host, int port) {
  if (!http_->listen(host, port)) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
}

void StudyServer::stop() {
  if (http_) http_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace fbench::study
