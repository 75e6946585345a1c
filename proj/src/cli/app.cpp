#include "fbench/cli/app.hpp"

#include <signal.h>

#include <CLI11.hpp>
#include <iostream>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "fbench/cli/run.hpp"
#include "fbench/corpus.hpp"
#include "fbench/errors.hpp"
#include "fbench/metrics/scoring.hpp"
#include "fbench/reporting/reporting.hpp"
#include "fbench/study/design.hpp"
#include "fbench/study/render.hpp"
#include "fbench/study/server.hpp"
#include "fbench/synthdoc/compiler.hpp"
#include "fbench/synthdoc/document.hpp"
#include "fbench/util/fs.hpp"
#include "fbench/util/parallel.hpp"

namespace fbench::cli {

namespace stdfs = std::filesystem;

namespace {

struct StageArgs {
  std::string run;
  std::string config;
  std::optional<double> max_ratio;
  std::string mock_llm;
  std::string metrics;
  std::string cdm_cmd;
  std::string human;
  bool exclude_missing = false;
  std::optional<double> max_cost;
};

RunDir open_run(const StageArgs& a) {
  if (a.run.empty()) throw ConfigError("--run is required");
  std::optional<RunDir> run;
  if (!a.config.empty())
    run.emplace(a.run, validate_config(a.config));
  else
    run.emplace(RunDir::open(a.run));
  auto& c = run->config();
  // Overrides change the per-item input keys, so affected items are redone.
  if (a.max_ratio) {
    if (!(*a.max_ratio >= 0.0 && *a.max_ratio <= 1.0)) throw ConfigError("--max-ratio must lie in [0, 1]");
    c.max_ratio = *a.max_ratio;
  }
  if (!a.mock_llm.empty()) {
    if (!stdfs::exists(a.mock_llm)) throw ConfigError("--mock-llm: no such file " + a.mock_llm);
    c.llm.backend = "mock";
    c.llm.mock_script = stdfs::absolute(a.mock_llm).string();
  }
  if (!a.metrics.empty()) c.metrics = metrics::parse_metric_list(a.metrics);
  if (!a.cdm_cmd.empty()) c.cdm_command = a.cdm_cmd;
  if (!a.human.empty()) {
    if (!stdfs::exists(a.human)) throw ConfigError("--human: no such file " + a.human);
    c.human_ratings = stdfs::absolute(a.human);
  }
  if (a.exclude_missing) c.missing_as_zero = false;
  if (a.max_cost) c.llm.max_cost = *a.max_cost;
  return std::move(*run);
}

int report_stage(RunDir& run, const StageStats& st) {
  spdlog::info("{}: {} executed, {} skipped, {} failed", st.stage, st.executed, st.skipped, st.failures.size());
  for (const auto& [item, why] : st.failures) spdlog::warn("{}: {} failed: {}", st.stage, item, why);
  if (!st.failures.empty()) return kExitPartial;
  run.mark_complete(st.stage);
  return kExitOk;
}

void add_stage_options(CLI::App* cmd, StageArgs& a) {
  cmd->add_option("--run", a.run, "Run directory")->required();
  cmd->add_option("--config", a.config, "Run config (required for a new run directory)");
}

void wait_for_signal() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  int sig = 0;
  sigwait(&set, &sig);
}

std::vector<study::CandidatePair> collect_candidates(const RunDir& run) {
  std::map<std::string, synthdoc::DocumentManifest> manifests;
  for (auto& m : load_documents(run)) manifests.emplace(m.doc_id, std::move(m));
  std::map<reporting::PairKey, std::map<metrics::Metric, double>> scored;
  const auto scores_path = run.stage("judge") / "scores.jsonl";
  if (stdfs::exists(scores_path))
    for (const auto& r : metrics::read_scores(scores_path))
      if (r.status == metrics::ScoreStatus::scored) scored[{r.parser, r.doc_id, r.gt_index}][r.metric] = r.value;
  std::vector<study::CandidatePair> out;
  for (const auto& d : load_matches(run)) {
    const auto& m = manifests.at(d.doc_id);
    for (const auto& r : d.results) {
      study::CandidatePair c;
      c.source = {d.parser, d.doc_id, r.gt_index};
      c.gt_latex = m.ground_truth.at(r.gt_index).latex;
      c.extracted = r.extracted;
      if (auto it = scored.find({d.parser, d.doc_id, r.gt_index}); it != scored.end()) {
        if (auto s = it->second.find(metrics::Metric::cdm_f1); s != it->second.end()) c.cdm_f1 = s->second;
        if (auto s = it->second.find(metrics::Metric::judge); s != it->second.end()) c.judge = s->second;
      }
      out.push_back(std::move(c));
    }
  }
  return out;
}

}  // namespace

int run_cli(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("fbench"));
  spdlog::set_pattern("%^%l%$: %v");

  CLI::App app{"Formula extraction benchmark"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  // corpus
  std::string corpus_source, corpus_out;
  int corpus_threshold = corpus::kDefaultThreshold;
  std::size_t corpus_limit = 0;
  auto* corpus_cmd = app.add_subcommand("corpus", "Extract and filter formulas from HTML pages");
  corpus_cmd->add_option("--source", corpus_source, "Directory of HTML files or an archive")->required();
  corpus_cmd->add_option("--out", corpus_out, "Output corpus file")->required();
  corpus_cmd->add_option("--threshold", corpus_threshold, "Minimum complexity score");
  corpus_cmd->add_option("--limit", corpus_limit, "Keep only the first N records (0 = all)");

  // gen
  std::size_t gen_count = 0;
  std::uint64_t gen_seed = 0;
  std::string gen_corpus, gen_out, gen_pdflatex;
  double gen_threshold = synthdoc::kDefaultInlineMaxPt;
  unsigned gen_workers = 1;
  auto* gen_cmd = app.add_subcommand("gen", "Generate synthetic documents");
  gen_cmd->add_option("--count", gen_count)->required();
  gen_cmd->add_option("--seed", gen_seed)->required();
  gen_cmd->add_option("--corpus", gen_corpus)->required();
  gen_cmd->add_option("--out", gen_out)->required();
  gen_cmd->add_option("--threshold-pt", gen_threshold, "Inline formula height limit");
  gen_cmd->add_option("--pdflatex", gen_pdflatex);
  gen_cmd->add_option("--workers", gen_workers);

  StageArgs parse_a, match_a, judge_a, report_a, all_a;
  auto* parse_cmd = app.add_subcommand("parse", "Run the configured parsers");
  add_stage_options(parse_cmd, parse_a);
  auto* match_cmd = app.add_subcommand("match", "Match ground truth against parser output");
  add_stage_options(match_cmd, match_a);
  match_cmd->add_option("--max-ratio", match_a.max_ratio);
  match_cmd->add_option("--mock-llm", match_a.mock_llm, "Mock LLM script");
  match_cmd->add_option("--max-cost", match_a.max_cost);
  auto* judge_cmd = app.add_subcommand("judge", "Score matched pairs");
  add_stage_options(judge_cmd, judge_a);
  judge_cmd->add_option("--metrics", judge_a.metrics, "Comma list of lev,bleu,cdm,judge");
  judge_cmd->add_option("--cdm-cmd", judge_a.cdm_cmd, "CDM command with {gt} and {pred}");
  judge_cmd->add_option("--mock-llm", judge_a.mock_llm, "Mock LLM script");
  judge_cmd->add_option("--max-cost", judge_a.max_cost);
  auto* report_cmd = app.add_subcommand("report", "Write leaderboard and correlations");
  add_stage_options(report_cmd, report_a);
  report_cmd->add_option("--human", report_a.human, "Exported human ratings");
  report_cmd->add_flag("--exclude-missing", report_a.exclude_missing, "Leave MISSING pairs out of the means");

  auto* all_cmd = app.add_subcommand("run_all", "gen, parse, match, judge and report");
  all_cmd->alias("run");
  all_cmd->add_option("--config", all_a.config)->required();
  all_cmd->add_option("--run", all_a.run, "Run directory (default: config output)");
  all_cmd->add_option("--max-cost", all_a.max_cost);

  std::string validate_path;
  auto* validate_cmd = app.add_subcommand("validate", "Check a run config");
  validate_cmd->add_option("--config", validate_path)->required();

  // study
  auto* study_cmd = app.add_subcommand("study", "Human evaluation study");
  study_cmd->require_subcommand(1);
  std::string study_dir, study_run, study_pdflatex, study_converter, study_host = "127.0.0.1", study_static, study_out;
  std::optional<std::size_t> st_pairs, st_raters, st_rpp, st_ppr;
  std::optional<std::uint64_t> st_seed;
  int study_port = 8080;
  auto* select_cmd = study_cmd->add_subcommand("select", "Pick challenging pairs from a run");
  select_cmd->add_option("--run", study_run)->required();
  select_cmd->add_option("--study", study_dir)->required();
  select_cmd->add_option("--pairs", st_pairs);
  select_cmd->add_option("--seed", st_seed);
  auto* assign_cmd = study_cmd->add_subcommand("assign", "Build the balanced rater design");
  assign_cmd->add_option("--study", study_dir)->required();
  assign_cmd->add_option("--run", study_run, "Run whose config supplies defaults");
  assign_cmd->add_option("--raters", st_raters);
  assign_cmd->add_option("--raters-per-pair", st_rpp);
  assign_cmd->add_option("--pairs-per-rater", st_ppr);
  assign_cmd->add_option("--seed", st_seed);
  auto* render_cmd = study_cmd->add_subcommand("render", "Render pair images");
  render_cmd->add_option("--study", study_dir)->required();
  render_cmd->add_option("--pdflatex", study_pdflatex);
  render_cmd->add_option("--converter", study_converter, "Command with {pdf} and {png}");
  auto* serve_cmd = study_cmd->add_subcommand("serve", "Serve the rating API");
  serve_cmd->add_option("--study", study_dir)->required();
  serve_cmd->add_option("--host", study_host);
  serve_cmd->add_option("--port", study_port);
  serve_cmd->add_option("--raters-per-pair", st_rpp);
  serve_cmd->add_option("--static", study_static, "Directory served at /");
  auto* export_cmd = study_cmd->add_subcommand("export", "Write ratings as line-delimited records");
  export_cmd->add_option("--study", study_dir)->required();
  export_cmd->add_option("--out", study_out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }
  if (verbose) spdlog::set_level(spdlog::level::debug);

  try {
    if (*corpus_cmd) {
      auto extracted = corpus::extract_from_source(corpus_source);
      auto filtered = corpus::filter_corpus(extracted.records, corpus_threshold);
      if (corpus_limit && filtered.records.size() > corpus_limit) filtered.records.resize(corpus_limit);
      corpus::write_corpus(corpus_out, filtered);
      spdlog::info("corpus: {} pages, {} formulas extracted, {} skipped, {} kept at threshold {}", extracted.pages,
                   extracted.records.size(), extracted.skipped, filtered.records.size(), corpus_threshold);
      return kExitOk;
    }
    if (*gen_cmd) {
      if (gen_count == 0) throw ConfigError("--count must be at least 1");
      const auto corpus = corpus::read_corpus(gen_corpus);
      synthdoc::PdfLatexCompiler compiler(synthdoc::require_compiler(gen_pdflatex));
      synthdoc::GeneratorConfig cfg;
      cfg.inline_max_pt = gen_threshold;
      auto batch = synthdoc::generate_documents(gen_count, gen_seed, corpus, compiler, gen_out, cfg,
                                                std::max(1u, gen_workers), true);
      std::size_t formulas = 0;
      for (const auto& m : batch.manifests) formulas += m.ground_truth.size();
      spdlog::info("gen: {} documents ({} reused), {} ground-truth formulas, {} failed", batch.manifests.size(),
                   batch.reused.size(), formulas, batch.failures.size());
      for (const auto& [id, why] : batch.failures) spdlog::warn("gen: {} failed: {}", id, why);
      return batch.failures.empty() ? kExitOk : kExitPartial;
    }
    if (*parse_cmd) {
      auto run = open_run(parse_a);
      return report_stage(run, stage_parse(run));
    }
    if (*match_cmd) {
      auto run = open_run(match_a);
      auto client = make_client(run.config(), persisted_cost(run));
      return report_stage(run, stage_match(run, *client));
    }
    if (*judge_cmd) {
      auto run = open_run(judge_a);
      auto client = make_client(run.config(), persisted_cost(run));
      return report_stage(run, stage_judge(run, *client));
    }
    if (*report_cmd) {
      auto run = open_run(report_a);
      int rc = report_stage(run, stage_report(run));
      std::cout << fs::dump_json(summarize(run).to_json());
      return rc;
    }
    if (*all_cmd) {
      auto config = validate_config(all_a.config);
      if (all_a.max_cost) config.llm.max_cost = *all_a.max_cost;
      stdfs::path root = all_a.run.empty() ? config.output : stdfs::path(all_a.run);
      if (root.empty()) throw ConfigError("no run directory: set 'output' in the config or pass --run");
      RunDir run(root, config);
      auto res = run_all(run);
      std::cout << fs::dump_json(res.summary.to_json());
      return res.partial() ? kExitPartial : kExitOk;
    }
    if (*validate_cmd) {
      auto c = validate_config(validate_path);
      std::cout << fs::dump_json(c.to_json());
      spdlog::info("config ok, hash {}", config_hash(c));
      return kExitOk;
    }

    study::StudyPaths paths{study_dir};
    if (*select_cmd) {
      auto run = RunDir::open(study_run);
      const auto& sc = run.config().study;
      auto pairs = study::select_challenge_pairs(collect_candidates(run), st_pairs.value_or(sc.pairs),
                                                 st_seed.value_or(run.config().seed));
      stdfs::create_directories(paths.root);
      study::write_pairs(paths.pairs(), pairs);
      spdlog::info("study select: {} pairs", pairs.size());
      return kExitOk;
    }
    if (*assign_cmd) {
      StudySettings sc;
      std::uint64_t seed = 0;
      if (!study_run.empty()) {
        auto run = RunDir::open(study_run);
        sc = run.config().study;
        seed = run.config().seed;
      }
      auto pairs = study::read_pairs(paths.pairs());
      std::vector<std::string> ids;
      for (const auto& p : pairs) ids.push_back(p.pair_id);
      auto design = study::build_assignments(ids, study::rater_ids(st_raters.value_or(sc.raters)),
                                             st_rpp.value_or(sc.raters_per_pair), st_ppr.value_or(sc.pairs_per_rater),
                                             st_seed.value_or(seed));
      study::write_assignments(paths.assignments(), design);
      spdlog::info("study assign: {} raters over {} pairs", design.size(), ids.size());
      return kExitOk;
    }
    if (*render_cmd) {
      auto pairs = study::read_pairs(paths.pairs());
      synthdoc::PdfLatexCompiler compiler(synthdoc::require_compiler(study_pdflatex));
      auto converter = study::discover_converter(study_converter);
      if (!converter) spdlog::warn("no image converter configured; every image will be the placeholder");
      stdfs::create_directories(paths.images());
      std::size_t failed = 0;
      for (const auto& p : pairs) {
        auto r = study::render_pair_images(p, compiler, converter, paths.images());
        for (const auto* side : {&r.gt, &r.extracted})
          if (!side->rendered) {
            ++failed;
            spdlog::debug("{}: placeholder ({})", p.pair_id, side->reason);
          }
      }
      spdlog::info("study render: {} images, {} placeholders", 2 * pairs.size(), failed);
      return kExitOk;
    }
    if (*serve_cmd) {
      std::size_t rpp = st_rpp.value_or(StudySettings{}.raters_per_pair);
      sigset_t set;
      sigemptyset(&set);
      sigaddset(&set, SIGINT);
      sigaddset(&set, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &set, nullptr);
      study::StudyServer server(paths, rpp, study_static);
      int port = server.start(study_host, study_port);
      spdlog::info("study serve: listening on http://{}:{}", study_host, port);
      wait_for_signal();
      server.stop();
      return kExitOk;
    }
    if (*export_cmd) {
      auto pairs = study::read_pairs(paths.pairs());
      study::RatingStore store(paths.root, study::read_assignments(paths.assignments()));
      auto text = study::export_ratings(store, pairs);
      if (study_out.empty())
        std::cout << text;
      else
        fs::write_file_atomic(study_out, text);
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return kExitConfig;
  } catch (const ToolError& e) {
    spdlog::error("{}", e.what());
    return kExitConfig;
  } catch (const study::BalanceError& e) {
    spdlog::error("{}", e.what());
    return kExitConfig;
  } catch (const PreconditionError& e) {
    spdlog::error("{}", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace fbench::cli
