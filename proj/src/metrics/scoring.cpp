#include "fbench/metrics/scoring.hpp"

#include <cmath>
#include <map>

#include "fbench/errors.hpp"
#include "fbench/metrics/text_metrics.hpp"
#include "fbench/util/assets.hpp"
#include "fbench/util/fs.hpp"
#include "fbench/util/hash.hpp"
#include "fbench/util/parallel.hpp"
#include "fbench/util/subprocess.hpp"
#include "fbench/util/text.hpp"

namespace fbench::metrics {

using nlohmann::json;
namespace stdfs = std::filesystem;

std::string to_string(Metric m) {
  switch (m) {
    case Metric::lev_sim: return "lev_sim";
    case Metric::bleu: return "bleu";
    case Metric::cdm_f1: return "cdm_f1";
    case Metric::judge: return "judge";
  }
  return "judge";
}

Metric metric_from_string(std::string_view s) {
  if (s == "lev" || s == "lev_sim") return Metric::lev_sim;
  if (s == "bleu") return Metric::bleu;
  if (s == "cdm" || s == "cdm_f1") return Metric::cdm_f1;
  if (s == "judge") return Metric::judge;
  throw ConfigError("unknown metric: " + std::string(s));
}

std::set<Metric> parse_metric_list(std::string_view csv) {
  std::set<Metric> out;
  for (const auto& part : text::split(csv, ',')) {
    auto t = text::trim(part);
    if (!t.empty()) out.insert(metric_from_string(t));
  }
  if (out.empty()) throw ConfigError("metric list is empty");
  return out;
}

double metric_max(Metric m) { return m == Metric::judge ? 10.0 : 1.0; }

std::string to_string(ScoreStatus s) {
  switch (s) {
    case ScoreStatus::scored: return "scored";
    case ScoreStatus::unscored: return "unscored";
    case ScoreStatus::unavailable: return "unavailable";
  }
  return "unscored";
}

static ScoreStatus score_status_from_string(std::string_view s) {
  for (auto v : {ScoreStatus::scored, ScoreStatus::unscored, ScoreStatus::unavailable})
    if (to_string(v) == s) return v;
  throw std::invalid_argument("unknown score status: " + std::string(s));
}

json judge_schema() {
  return json{{"type", "object"},
              {"properties",
               {{"score", {{"type", "number"}, {"minimum", 0}, {"maximum", 10}, {"multipleOf", 0.5}}},
                {"justification", {{"type", "string"}}}}},
              {"required", {"score", "justification"}},
              {"additionalProperties", false}};
}

std::string judge_prompt_fingerprint() {
  return hash::sha256_hex(std::string(assets::get("prompts/judge_system.txt")) + "\x1f" +
                          std::string(assets::get("prompts/judge_user.txt")) + "\x1f" + judge_schema().dump());
}

llm::LlmRequest judge_request(const std::string& gt, const std::string& extracted, const std::string& model) {
  llm::LlmRequest req;
  req.model = model;
  req.system_prompt = std::string(assets::get("prompts/judge_system.txt"));
  req.user_prompt = text::substitute(assets::get("prompts/judge_user.txt"), {{"ground_truth", gt}, {"extracted", extracted}});
  req.schema_name = llm::kJudgeSchema;
  req.response_schema = judge_schema();
  req.temperature = 0.0;
  return req;
}

double llm_judge(const std::string& gt, const std::optional<std::string>& extracted, llm::LlmClient& client,
                 const std::string& model) {
  if (!extracted) return 0.0;
  auto resp = client.complete_structured(judge_request(gt, *extracted, model), "judge");
  return resp.payload.at("score").get<double>();
}

JudgeOutcome judge_pair(const std::string& gt, const std::optional<std::string>& extracted, llm::LlmClient& client,
                        const std::string& model) {
  JudgeOutcome out;
  if (!extracted) {
    out.score = 0.0;
    return out;
  }
  out.called = true;
  try {
    auto resp = client.complete_structured(judge_request(gt, *extracted, model), "judge");
    out.score = resp.payload.at("score").get<double>();
    out.cost = resp.cost_estimate;
    out.justification = resp.payload.at("justification").get<std::string>();
  } catch (const llm::TransportError& e) {
    out.reason = std::string("transport: ") + e.what();
  } catch (const llm::ProtocolError& e) {
    out.reason = std::string("protocol: ") + e.what();
  }
  return out;
}

CdmScores cdm_external(const std::string& gt, const std::string& pred, const std::optional<CdmTool>& tool) {
  CdmScores out;
  if (!tool || text::trim(tool->command).empty()) {
    out.reason = "cdm tool not configured";
    return out;
  }
  const auto dir = fs::make_temp_dir("fbench-cdm");
  struct Cleanup {
    stdfs::path p;
    ~Cleanup() {
      std::error_code ec;
      stdfs::remove_all(p, ec);
    }
  } cleanup{dir};
  fs::write_file_atomic(dir / "gt.tex", gt);
  fs::write_file_atomic(dir / "pred.tex", pred);
  const auto cmd = text::substitute(tool->command, {{"gt", text::shell_quote((dir / "gt.tex").string())},
                                                    {"pred", text::shell_quote((dir / "pred.tex").string())}});
  auto res = run_shell(cmd, std::chrono::duration_cast<std::chrono::milliseconds>(tool->timeout), dir);
  if (res.spawn_failed) {
    out.reason = "cdm tool could not be started";
    return out;
  }
  if (res.timed_out) {
    out.reason = "cdm tool timed out";
    return out;
  }
  if (res.exit_code != 0) {
    out.reason = "cdm tool exited with " + std::to_string(res.exit_code) + ": " + std::string(text::trim(res.err));
    return out;
  }
  try {
    auto j = json::parse(res.out);
    auto in_unit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
    double f1 = j.at("f1").get<double>();
    if (!in_unit(f1)) throw std::out_of_range("f1 outside [0,1]");
    out.f1 = f1;
    if (j.contains("precision")) out.precision = j["precision"].get<double>();
    if (j.contains("recall")) out.recall = j["recall"].get<double>();
    out.available = true;
  } catch (const std::exception& e) {
    out.reason = std::string("unreadable cdm output: ") + e.what();
  }
  return out;
}

std::vector<ScoreRecord> score_document(const synthdoc::DocumentManifest& m, const matching::DocumentMatches& d,
                                        llm::LlmClient* client, const ScoringOptions& opts, ScoringStats* stats) {
  if (d.results.size() != m.ground_truth.size())
    throw PreconditionError("matches for " + d.doc_id + " do not cover its ground truth");
  if (opts.metrics.count(Metric::judge) && !client) throw PreconditionError("judge metric needs an LLM client");
  const std::size_t k = opts.metrics.size();
  std::vector<ScoreRecord> out(d.results.size() * k);
  std::vector<JudgeOutcome> judged(d.results.size());
  parallel_for(d.results.size(), std::max(1u, opts.workers), [&](std::size_t i) {
    const auto& r = d.results[i];
    const auto& gt = m.ground_truth.at(r.gt_index);
    const bool missing = r.method == matching::MatchMethod::missing;
    std::size_t slot = i * k;
    for (Metric metric : opts.metrics) {
      ScoreRecord rec;
      rec.parser = d.parser;
      rec.doc_id = d.doc_id;
      rec.gt_index = r.gt_index;
      rec.placement = gt.placement;
      rec.metric = metric;
      rec.missing = missing;
      if (missing) {
        // MISSING scores 0 everywhere, but an unconfigured CDM stays unavailable.
        if (metric == Metric::cdm_f1 && !opts.cdm) {
          rec.status = ScoreStatus::unavailable;
          rec.reason = "cdm tool not configured";
        }
      } else {
        switch (metric) {
          case Metric::lev_sim: rec.value = lev_similarity(*r.extracted, gt.latex); break;
          case Metric::bleu: rec.value = bleu_latex(*r.extracted, gt.latex); break;
          case Metric::cdm_f1: {
            auto c = cdm_external(gt.latex, *r.extracted, opts.cdm);
            if (c.available) {
              rec.value = c.f1;
            } else {
              rec.status = ScoreStatus::unavailable;
              rec.reason = c.reason;
            }
            break;
          }
          case Metric::judge: {
            auto& j = judged[i];
            j = judge_pair(gt.latex, r.extracted, *client, opts.model);
            if (j.score) {
              rec.value = *j.score;
            } else {
              rec.status = ScoreStatus::unscored;
              rec.reason = j.reason;
            }
            break;
          }
        }
      }
      out[slot++] = std::move(rec);
    }
  });
  if (stats)
    for (const auto& j : judged) {
      stats->judge_calls += j.called;
      stats->cost += j.cost;
    }
  return out;
}

std::map<Metric, Coverage> coverage(const std::vector<ScoreRecord>& records) {
  std::map<Metric, Coverage> out;
  for (const auto& r : records) {
    auto& c = out[r.metric];
    ++c.total;
    switch (r.status) {
      case ScoreStatus::scored: ++c.scored; break;
      case ScoreStatus::unscored: ++c.unscored; break;
      case ScoreStatus::unavailable: ++c.unavailable; break;
    }
  }
  return out;
}

json to_json(const ScoreRecord& r) {
  json j{{"parser", r.parser},
         {"doc_id", r.doc_id},
         {"gt_index", r.gt_index},
         {"placement", synthdoc::to_string(r.placement)},
         {"metric", to_string(r.metric)},
         {"value", r.value},
         {"status", to_string(r.status)},
         {"missing", r.missing}};
  if (!r.reason.empty()) j["reason"] = r.reason;
  return j;
}

ScoreRecord score_record_from_json(const json& j) {
  ScoreRecord r;
  r.parser = j.at("parser").get<std::string>();
  r.doc_id = j.at("doc_id").get<std::string>();
  r.gt_index = j.at("gt_index").get<std::size_t>();
  r.placement = synthdoc::placement_from_string(j.at("placement").get<std::string>());
  r.metric = metric_from_string(j.at("metric").get<std::string>());
  r.value = j.at("value").get<double>();
  r.status = score_status_from_string(j.value("status", std::string("scored")));
  r.missing = j.value("missing", false);
  r.reason = j.value("reason", std::string());
  return r;
}

void write_scores(const stdfs::path& p, const std::vector<ScoreRecord>& records) {
  std::vector<json> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.push_back(to_json(r));
  fs::write_jsonl(p, rows);
}

std::vector<ScoreRecord> read_scores(const stdfs::path& p) {
  std::vector<ScoreRecord> out;
  for (const auto& j : fs::read_jsonl(p)) out.push_back(score_record_from_json(j));
  return out;
}

}  // namespace fbench::metrics
