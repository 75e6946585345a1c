#include "fbench/cli/run.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cstdlib>

#include <spdlog/spdlog.h>

#include "fbench/adapters/adapter.hpp"
#include "fbench/corpus.hpp"
#include "fbench/errors.hpp"
#include "fbench/metrics/scoring.hpp"
#include "fbench/reporting/reporting.hpp"
#include "fbench/study/server.hpp"
#include "fbench/util/fs.hpp"
#include "fbench/util/hash.hpp"
#include "fbench/util/parallel.hpp"

namespace fbench::cli {

namespace stdfs = std::filesystem;
using nlohmann::json;

namespace {

std::string key_of(const json& j) { return hash::sha256_hex(j.dump()); }

std::optional<json> read_json_if(const stdfs::path& p) {
  std::error_code ec;
  if (!stdfs::is_regular_file(p, ec)) return std::nullopt;
  try {
    return fs::read_json(p);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void write_json_if_changed(const stdfs::path& p, const json& j) { fs::write_if_changed(p, fs::dump_json(j)); }

std::string gt_digest(const synthdoc::DocumentManifest& m) {
  json g = json::array();
  for (const auto& f : m.ground_truth) g.push_back({f.gt_index, f.latex, synthdoc::to_string(f.placement)});
  return key_of(g);
}

}  // namespace

// RunDir

RunDir::RunDir(const stdfs::path& root, const RunConfig& config) : root_(stdfs::absolute(root)), config_(config) {
  hash_ = cli::config_hash(config_);
  stdfs::create_directories(root_);
  acquire();
  try {
    init();
  } catch (...) {
    ::flock(lock_fd_, LOCK_UN);
    ::close(lock_fd_);
    lock_fd_ = -1;
    throw;
  }
}

void RunDir::init() {
  if (auto lock = read_json_if(root_ / "run.lock")) {
    const auto recorded = lock->value("config_hash", std::string());
    if (recorded != hash_)
      throw ConfigError("run directory " + root_.string() + " belongs to another configuration (config hash " +
                        recorded.substr(0, 12) + ", this config " + hash_.substr(0, 12) + ")");
    for (const auto& s : lock->value("completed_stages", json::array())) completed_.push_back(s.get<std::string>());
  }
  auto normalized = config_.to_json();
  normalized.erase("output");
  write_json_if_changed(root_ / "config.json", normalized);
  write_lock_manifest();
}

RunDir RunDir::open(const stdfs::path& root) {
  const auto abs = stdfs::absolute(root);
  auto j = read_json_if(abs / "config.json");
  if (!j) throw ConfigError(abs.string() + " is not a run directory (no config.json); pass --config");
  return RunDir(abs, config_from_json(*j, abs));
}

RunDir::RunDir(RunDir&& o) noexcept
    : root_(std::move(o.root_)),
      config_(std::move(o.config_)),
      hash_(std::move(o.hash_)),
      completed_(std::move(o.completed_)),
      lock_fd_(o.lock_fd_) {
  o.lock_fd_ = -1;
}

RunDir::~RunDir() {
  if (lock_fd_ >= 0) {
    ::flock(lock_fd_, LOCK_UN);
    ::close(lock_fd_);
  }
}

void RunDir::acquire() {
  lock_fd_ = ::open(root_.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
  if (lock_fd_ < 0) throw ConfigError("cannot open run directory " + root_.string());
  if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(lock_fd_);
    lock_fd_ = -1;
    throw ConfigError("run directory " + root_.string() + " is in use by another fbench process");
  }
}

void RunDir::write_lock_manifest() {
  json stages = json::array();
  for (const char* s : kStages)
    if (std::find(completed_.begin(), completed_.end(), s) != completed_.end()) stages.push_back(s);
  write_json_if_changed(root_ / "run.lock", json{{"config_hash", hash_},
                                                 {"seed", config_.seed},
                                                 {"fbench_version", kVersion},
                                                 {"completed_stages", stages}});
}

json RunDir::provenance(const std::string& stage) const {
  return json{{"stage", stage}, {"config_hash", hash_}, {"seed", config_.seed}, {"fbench_version", kVersion}};
}

void RunDir::mark_complete(const std::string& stage) {
  if (std::find(completed_.begin(), completed_.end(), stage) == completed_.end()) completed_.push_back(stage);
  write_lock_manifest();
}

// Summary

json RunSummary::to_json() const {
  json parsers_j = json::object();
  for (const auto& [name, p] : parsers)
    parsers_j[name] = {{"pairs", p.pairs},
                       {"missing", p.missing},
                       {"parse_errors", p.parse_errors},
                       {"unmatched_documents", p.unmatched_documents}};
  return json{{"documents", documents},
              {"ground_truth_formulas", ground_truth},
              {"inline_formulas", inline_formulas},
              {"display_formulas", display_formulas},
              {"failed_documents", failed_documents},
              {"parsers", parsers_j},
              {"llm_cost", llm_cost}};
}

bool RunResult::partial() const {
  for (const auto& s : stages)
    if (!s.failures.empty()) return true;
  return false;
}

std::size_t RunResult::executed() const {
  std::size_t n = 0;
  for (const auto& s : stages) n += s.executed;
  return n;
}

std::unique_ptr<llm::LlmClient> make_client(const RunConfig& c, double spent) {
  auto opts = client_options(c.llm);
  if (opts.max_cost) opts.max_cost = std::max(0.0, *opts.max_cost - spent);
  return std::make_unique<llm::LlmClient>(make_backend(c.llm), opts);
}

std::vector<synthdoc::DocumentManifest> load_documents(const RunDir& run) {
  std::vector<synthdoc::DocumentManifest> out;
  for (std::size_t i = 0; i < run.config().documents; ++i) {
    const auto id = synthdoc::document_id(i);
    if (auto m = synthdoc::load_complete_document(run.stage("gen") / id, synthdoc::document_seed(run.config().seed, id)))
      out.push_back(std::move(*m));
  }
  return out;
}

// Stages

StageStats stage_gen(RunDir& run, synthdoc::LatexCompiler& compiler) {
  StageStats st{"gen"};
  const auto& c = run.config();
  const auto corpus = corpus::read_corpus(c.corpus);
  if (corpus.records.empty()) throw ConfigError("config field 'corpus': corpus is empty");
  auto batch = synthdoc::generate_documents(c.documents, c.seed, corpus, compiler, run.stage("gen"), c.generator,
                                            c.workers, true);
  st.skipped = batch.reused.size();
  st.executed = batch.manifests.size() - batch.reused.size();
  st.failures = batch.failures;
  auto prov = run.provenance("gen");
  prov["generator"] = c.generator.to_json();
  prov["documents"] = c.documents;
  write_json_if_changed(run.stage("gen") / "provenance.json", prov);
  return st;
}

StageStats stage_parse(RunDir& run) {
  StageStats st{"parse"};
  const auto docs = load_documents(run);
  for (const auto& spec : run.config().parsers) {
    spec.validate();
    if (!spec.auth_env.empty() && !std::getenv(spec.auth_env.c_str()))
      throw ConfigError("parser '" + spec.name + "': environment variable " + spec.auth_env + " is not set");
    std::vector<int> ran(docs.size(), 0);
    parallel_for(docs.size(), std::max(1u, spec.max_concurrency), [&](std::size_t i) {
      const auto& m = docs[i];
      const auto dir = run.stage("parse") / spec.name / m.doc_id;
      const auto key = key_of(json{{"adapter", spec.to_json()}, {"pdf_hash", m.pdf_hash}, {"ground_truth", gt_digest(m)}});
      if (auto status = read_json_if(dir / "status.json");
          status && status->value("provenance", json::object()).value("input_key", "") == key &&
          adapters::read_parser_run(dir)) {
        return;
      }
      auto result = adapters::run_parser(spec, run.stage("gen") / m.doc_id / "doc.pdf", m);
      auto prov = run.provenance("parse");
      prov["input_key"] = key;
      adapters::write_parser_run(dir, result, prov);
      ran[i] = 1;
    });
    for (int r : ran) (r ? st.executed : st.skipped)++;
  }
  write_json_if_changed(run.stage("parse") / "provenance.json", run.provenance("parse"));
  return st;
}

stdfs::path matches_path(const RunDir& run, const std::string& parser, const std::string& doc_id) {
  return run.stage("match") / parser / doc_id / "matches.json";
}

StageStats stage_match(RunDir& run, llm::LlmClient& client) {
  StageStats st{"match"};
  const auto& c = run.config();
  const auto docs = load_documents(run);
  const auto prompt_fp = matching::prompt_fingerprint();
  std::mutex mu;
  for (const auto& spec : c.parsers) {
    parallel_for(docs.size(), std::max(1u, c.llm.max_concurrency), [&](std::size_t i) {
      const auto& m = docs[i];
      const auto parse_dir = run.stage("parse") / spec.name / m.doc_id;
      auto parsed = adapters::read_parser_run(parse_dir);
      auto item = spec.name + "/" + m.doc_id;
      if (!parsed) {
        std::lock_guard lock(mu);
        st.failures.emplace_back(item, "no parse output");
        return;
      }
      const auto key = key_of(json{{"output_sha256", hash::sha256_hex(parsed->output.text)},
                                   {"status", adapters::to_string(parsed->output.status)},
                                   {"ground_truth", gt_digest(m)},
                                   {"max_ratio", c.max_ratio},
                                   {"retry", c.retry},
                                   {"prompt_fingerprint", prompt_fp},
                                   {"model", c.llm.model},
                                   {"backend", client.backend().describe()}});
      const auto out = matches_path(run, spec.name, m.doc_id);
      if (auto existing = read_json_if(out);
          existing && existing->value("provenance", json::object()).value("input_key", "") == key) {
        std::lock_guard lock(mu);
        ++st.skipped;
        return;
      }
      try {
        matching::MatchOptions opts;
        opts.max_ratio = c.max_ratio;
        opts.model = c.llm.model;
        opts.retry = c.retry;
        auto d = matching::match_pipeline(m, parsed->output, client, opts);
        auto problems = matching::check_matches(d, m, parsed->output.text);
        if (!problems.empty()) throw std::runtime_error("invalid matches: " + problems.front());
        auto j = matching::to_json(d);
        auto prov = run.provenance("match");
        prov["input_key"] = key;
        j["provenance"] = prov;
        fs::write_json(out, j);
        std::lock_guard lock(mu);
        ++st.executed;
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        st.failures.emplace_back(item, e.what());
      }
    });
  }
  std::sort(st.failures.begin(), st.failures.end());
  write_json_if_changed(run.stage("match") / "provenance.json", run.provenance("match"));
  return st;
}

std::vector<matching::DocumentMatches> load_matches(const RunDir& run) {
  std::vector<matching::DocumentMatches> out;
  const auto docs = load_documents(run);
  for (const auto& spec : run.config().parsers)
    for (const auto& m : docs)
      if (auto j = read_json_if(matches_path(run, spec.name, m.doc_id))) out.push_back(matching::document_matches_from_json(*j));
  return out;
}

StageStats stage_judge(RunDir& run, llm::LlmClient& client) {
  StageStats st{"judge"};
  const auto& c = run.config();
  const auto docs = load_documents(run);
  metrics::ScoringOptions opts;
  opts.metrics = c.metrics;
  opts.model = c.llm.model;
  opts.workers = c.llm.max_concurrency;
  if (!c.cdm_command.empty()) opts.cdm = metrics::CdmTool{c.cdm_command};
  json metric_names = json::array();
  for (auto m : c.metrics) metric_names.push_back(metrics::to_string(m));
  const auto judge_fp = metrics::judge_prompt_fingerprint();

  std::vector<std::string> all_rows;
  for (const auto& spec : c.parsers) {
    for (const auto& m : docs) {
      const auto item = spec.name + "/" + m.doc_id;
      const auto mp = matches_path(run, spec.name, m.doc_id);
      if (!stdfs::exists(mp)) {
        st.failures.emplace_back(item, "no matches");
        continue;
      }
      const auto matches_text = fs::read_file(mp);
      const auto key = key_of(json{{"matches_sha256", hash::sha256_hex(matches_text)},
                                   {"metrics", metric_names},
                                   {"judge_prompt_fingerprint", judge_fp},
                                   {"model", c.llm.model},
                                   {"backend", client.backend().describe()},
                                   {"cdm_command", c.cdm_command}});
      const auto dir = run.stage("judge") / spec.name / m.doc_id;
      auto meta = read_json_if(dir / "meta.json");
      if (meta && meta->value("provenance", json::object()).value("input_key", "") == key &&
          stdfs::exists(dir / "scores.jsonl")) {
        ++st.skipped;
      } else {
        try {
          auto d = matching::document_matches_from_json(json::parse(matches_text));
          metrics::ScoringStats stats;
          auto records = metrics::score_document(m, d, &client, opts, &stats);
          metrics::write_scores(dir / "scores.jsonl", records);
          auto prov = run.provenance("judge");
          prov["input_key"] = key;
          fs::write_json(dir / "meta.json",
                         json{{"provenance", prov}, {"judge_calls", stats.judge_calls}, {"cost", stats.cost}});
          ++st.executed;
        } catch (const ConfigError&) {
          throw;
        } catch (const std::exception& e) {
          st.failures.emplace_back(item, e.what());
          continue;
        }
      }
      for (const auto& r : metrics::read_scores(dir / "scores.jsonl")) all_rows.push_back(metrics::to_json(r).dump());
    }
  }
  std::string jsonl;
  for (const auto& r : all_rows) jsonl += r + "\n";
  fs::write_if_changed(run.stage("judge") / "scores.jsonl", jsonl);
  json cov = json::object();
  for (const auto& [metric, cv] : metrics::coverage(metrics::read_scores(run.stage("judge") / "scores.jsonl")))
    cov[metrics::to_string(metric)] = {{"total", cv.total},
                                       {"scored", cv.scored},
                                       {"unscored", cv.unscored},
                                       {"unavailable", cv.unavailable},
                                       {"coverage", cv.fraction()}};
  write_json_if_changed(run.stage("judge") / "coverage.json", cov);
  write_json_if_changed(run.stage("judge") / "provenance.json", run.provenance("judge"));
  return st;
}

double persisted_cost(const RunDir& run) {
  double total = 0.0;
  for (const auto& d : load_matches(run)) total += d.cost();
  const auto judge = run.stage("judge");
  if (stdfs::is_directory(judge))
    for (const auto& p : fs::list_files(judge))
      if (p.filename() == "meta.json")
        if (auto j = read_json_if(p)) total += j->value("cost", 0.0);
  return total;
}

RunSummary summarize(const RunDir& run) {
  RunSummary s;
  const auto docs = load_documents(run);
  s.documents = docs.size();
  std::set<std::string> present;
  for (const auto& m : docs) {
    present.insert(m.doc_id);
    s.ground_truth += m.ground_truth.size();
    for (const auto& g : m.ground_truth)
      (g.placement == synthdoc::Placement::inline_math ? s.inline_formulas : s.display_formulas)++;
  }
  for (std::size_t i = 0; i < run.config().documents; ++i)
    if (!present.count(synthdoc::document_id(i))) s.failed_documents.push_back(synthdoc::document_id(i));
  for (const auto& spec : run.config().parsers) {
    auto& p = s.parsers[spec.name];
    for (const auto& m : docs) {
      if (auto status = read_json_if(run.stage("parse") / spec.name / m.doc_id / "status.json"))
        if (status->value("status", "ok") != "ok") ++p.parse_errors;
      auto j = read_json_if(matches_path(run, spec.name, m.doc_id));
      if (!j) {
        ++p.unmatched_documents;
        continue;
      }
      auto d = matching::document_matches_from_json(*j);
      p.pairs += d.results.size();
      for (const auto& r : d.results) p.missing += r.method == matching::MatchMethod::missing;
    }
  }
  s.llm_cost = persisted_cost(run);
  return s;
}

std::map<reporting::PairKey, double> human_means(const std::vector<study::ExportedRating>& ratings) {
  std::map<reporting::PairKey, std::pair<double, std::size_t>> sums;
  for (const auto& r : ratings) {
    auto& s = sums[{r.source.parser, r.source.doc_id, r.source.gt_index}];
    s.first += r.rating.score;
    ++s.second;
  }
  std::map<reporting::PairKey, double> out;
  for (const auto& [k, s] : sums) out[k] = s.first / static_cast<double>(s.second);
  return out;
}

StageStats stage_report(RunDir& run) {
  StageStats st{"report"};
  const auto& c = run.config();
  const auto scores_path = run.stage("judge") / "scores.jsonl";
  if (!stdfs::exists(scores_path)) throw PreconditionError("no scores yet; run the judge stage first");
  const auto scores = metrics::read_scores(scores_path);
  const auto entries = reporting::aggregate(scores, {c.missing_as_zero});
  const auto dir = run.stage("report");
  bool changed = false;
  changed |= fs::write_if_changed(dir / "leaderboard.md", reporting::render_leaderboard_md(entries));
  changed |= fs::write_if_changed(dir / "leaderboard.csv", reporting::render_leaderboard_csv(entries));

  std::map<reporting::PairKey, double> human;
  if (!c.human_ratings.empty()) human = human_means(study::parse_export(fs::read_file(c.human_ratings)));
  auto corr = reporting::correlation_report(reporting::collect_pair_scores(scores), human);
  changed |= fs::write_if_changed(dir / "correlations.csv", reporting::render_correlations_csv(corr));
  changed |= fs::write_if_changed(dir / "summary.json", fs::dump_json(summarize(run).to_json()));
  auto prov = run.provenance("report");
  prov["missing_as_zero"] = c.missing_as_zero;
  if (!c.human_ratings.empty()) prov["human_ratings_sha256"] = hash::sha256_hex(fs::read_file(c.human_ratings));
  changed |= fs::write_if_changed(dir / "provenance.json", fs::dump_json(prov));
  (changed ? st.executed : st.skipped) = 1;
  return st;
}

RunResult run_all(RunDir& run, synthdoc::LatexCompiler* compiler) {
  const auto& c = run.config();
  for (const auto& spec : c.parsers)
    if (!spec.auth_env.empty() && !std::getenv(spec.auth_env.c_str()))
      throw ConfigError("parser '" + spec.name + "': environment variable " + spec.auth_env + " is not set");
  if (c.llm.backend == "http" && !std::getenv(c.llm.api_key_env.c_str()))
    throw ConfigError("config field 'llm.api_key_env': environment variable " + c.llm.api_key_env + " is not set");
  std::unique_ptr<synthdoc::LatexCompiler> owned;
  if (!compiler) {
    owned = std::make_unique<synthdoc::PdfLatexCompiler>(synthdoc::require_compiler(c.pdflatex));
    compiler = owned.get();
  }
  RunResult res;
  auto finish = [&](StageStats st) {
    spdlog::info("{}: {} executed, {} skipped, {} failed", st.stage, st.executed, st.skipped, st.failures.size());
    for (const auto& [item, why] : st.failures) spdlog::warn("{}: {} failed: {}", st.stage, item, why);
    if (st.failures.empty()) run.mark_complete(st.stage);
    res.stages.push_back(std::move(st));
  };
  finish(stage_gen(run, *compiler));
  finish(stage_parse(run));
  auto client = make_client(c, persisted_cost(run));
  finish(stage_match(run, *client));
  finish(stage_judge(run, *client));
  finish(stage_report(run));
  res.summary = summarize(run);
  return res;
}

}  // namespace fbench::cli
