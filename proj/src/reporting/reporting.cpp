#include "fbench/reporting/reporting.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "fbench/errors.hpp"

namespace fbench::reporting {

using metrics::Metric;
using metrics::ScoreRecord;
using metrics::ScoreStatus;

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw PreconditionError("pearson: series lengths differ");
  if (xs.size() < 2) throw PreconditionError("pearson: needs at least 2 points");
  double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double n = static_cast<double>(i + 1);
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    mx += dx / n;
    my += dy / n;
    sxx += dx * (xs[i] - mx);
    syy += dy * (ys[i] - my);
    sxy += dx * (ys[i] - my);
  }
  if (!(sxx > 0) || !(syy > 0)) throw UndefinedCorrelation("pearson: zero variance");
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

std::vector<LeaderboardEntry> aggregate(const std::vector<ScoreRecord>& scores, const AggregateOptions& opts) {
  struct Acc {
    std::set<std::tuple<std::string, std::size_t>> pairs, missing, inline_pairs, display_pairs;
    double sum_inline = 0, sum_display = 0;
    std::size_t n_judge_inline = 0, n_judge_display = 0;
    std::map<Metric, std::pair<double, std::size_t>> sums;
    std::map<Metric, metrics::Coverage> cov;
  };
  std::map<std::string, Acc> by_parser;
  for (const auto& r : scores) {
    auto& a = by_parser[r.parser];
    const auto key = std::make_tuple(r.doc_id, r.gt_index);
    a.pairs.insert(key);
    if (r.missing) a.missing.insert(key);
    (r.placement == synthdoc::Placement::inline_math ? a.inline_pairs : a.display_pairs).insert(key);
    auto& c = a.cov[r.metric];
    ++c.total;
    if (r.status == ScoreStatus::unscored) ++c.unscored;
    if (r.status == ScoreStatus::unavailable) ++c.unavailable;
    if (r.status != ScoreStatus::scored) continue;
    ++c.scored;
    if (r.missing && !opts.missing_as_zero) continue;
    auto& s = a.sums[r.metric];
    s.first += r.value;
    ++s.second;
    if (r.metric == Metric::judge) {
      if (r.placement == synthdoc::Placement::inline_math) {
        a.sum_inline += r.value;
        ++a.n_judge_inline;
      } else {
        a.sum_display += r.value;
        ++a.n_judge_display;
      }
    }
  }
  std::vector<LeaderboardEntry> out;
  for (auto& [parser, a] : by_parser) {
    LeaderboardEntry e;
    e.parser = parser;
    e.n_pairs = a.pairs.size();
    e.n_missing = a.missing.size();
    e.n_inline = a.inline_pairs.size();
    e.n_display = a.display_pairs.size();
    for (Metric m : metrics::kMetrics) {
      if (!a.cov.count(m)) continue;
      auto s = a.sums.find(m);
      if (s != a.sums.end() && s->second.second > 0)
        e.metric_means[m] = s->second.first / static_cast<double>(s->second.second);
      else
        e.metric_means[m] = std::nullopt;
    }
    e.coverage = a.cov;
    if (auto j = e.metric_means.find(Metric::judge); j != e.metric_means.end() && j->second) e.mean_judge = *j->second;
    if (a.n_judge_inline) e.mean_inline = a.sum_inline / static_cast<double>(a.n_judge_inline);
    if (a.n_judge_display) e.mean_display = a.sum_display / static_cast<double>(a.n_judge_display);
    out.push_back(std::move(e));
  }
  std::sort(out.begin(), out.end(), [](const LeaderboardEntry& a, const LeaderboardEntry& b) {
    if (a.mean_judge != b.mean_judge) return a.mean_judge > b.mean_judge;
    return a.parser < b.parser;
  });
  return out;
}

std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s = buf;
  if (s.find_first_not_of("-0.") == std::string::npos && s[0] == '-') s.erase(0, 1);  // no "-0.00"
  return s;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

namespace {

const Metric kExtraColumns[] = {Metric::lev_sim, Metric::bleu, Metric::cdm_f1};

std::string optional_mean(const LeaderboardEntry& e, Metric m, int decimals) {
  auto it = e.metric_means.find(m);
  if (it == e.metric_means.end() || !it->second) return "";
  return format_fixed(*it->second, decimals);
}

std::string md_cell(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace

std::string render_leaderboard_md(const std::vector<LeaderboardEntry>& entries) {
  std::string out =
      "| Rank | Parser | Score | n | Missing | Inline | Display | lev_sim | bleu | cdm_f1 |\n"
      "|---:|:---|---:|---:|---:|---:|---:|---:|---:|---:|\n";
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    out += "| " + std::to_string(i + 1) + " | " + md_cell(e.parser) + " | " + format_fixed(e.mean_judge, 2) + " | " +
           std::to_string(e.n_pairs) + " | " + std::to_string(e.n_missing) + " | " + format_fixed(e.mean_inline, 2) +
           " | " + format_fixed(e.mean_display, 2);
    for (Metric m : kExtraColumns) {
      auto v = optional_mean(e, m, 3);
      out += " | " + (v.empty() ? std::string("n/a") : v);
    }
    out += " |\n";
  }
  return out;
}

std::string render_leaderboard_csv(const std::vector<LeaderboardEntry>& entries) {
  std::string out = "rank,parser,score,n,missing,inline,display,lev_sim,bleu,cdm_f1\n";
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    out += std::to_string(i + 1) + "," + csv_field(e.parser) + "," + format_fixed(e.mean_judge, 6) + "," +
           std::to_string(e.n_pairs) + "," + std::to_string(e.n_missing) + "," + format_fixed(e.mean_inline, 6) + "," +
           format_fixed(e.mean_display, 6);
    for (Metric m : kExtraColumns) out += "," + optional_mean(e, m, 6);
    out += "\n";
  }
  return out;
}

MetricScores collect_pair_scores(const std::vector<ScoreRecord>& scores) {
  MetricScores out;
  for (const auto& r : scores)
    if (r.status == ScoreStatus::scored) out[{r.parser, r.doc_id, r.gt_index}][r.metric] = r.value;
  return out;
}

CorrelationReport correlation_report(const MetricScores& metric_scores, const std::map<PairKey, double>& human_means,
                                     const std::vector<Metric>& metric_order) {
  CorrelationReport rep;
  for (Metric m : metric_order) {
    std::vector<double> xs, ys;
    for (const auto& [key, human] : human_means) {
      auto p = metric_scores.find(key);
      if (p == metric_scores.end()) continue;
      auto v = p->second.find(m);
      if (v == p->second.end()) continue;
      xs.push_back(v->second);
      ys.push_back(human);
    }
    if (xs.size() < 2) {
      rep.omitted.push_back({m, xs.size(), std::nullopt, "omitted: fewer than 2 scored pairs with human ratings"});
      continue;
    }
    CorrelationRow row{m, xs.size(), std::nullopt, ""};
    try {
      row.r = pearson(xs, ys);
    } catch (const UndefinedCorrelation&) {
      row.note = "undefined: zero variance";
    }
    rep.rows.push_back(row);
  }
  return rep;
}

std::string render_correlations_csv(const CorrelationReport& report) {
  std::string out = "metric,n,pearson_r,note\n";
  for (const auto* rows : {&report.rows, &report.omitted})
    for (const auto& row : *rows)
      out += metrics::to_string(row.metric) + "," + std::to_string(row.n) + "," +
           (row.r ? format_fixed(*row.r, 6) : std::string()) + "," + csv_field(row.note) + "\n";
  return out;
}

}  // namespace fbench::reporting
