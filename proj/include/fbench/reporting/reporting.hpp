#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "fbench/metrics/scoring.hpp"

namespace fbench::reporting {

class UndefinedCorrelation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Sample Pearson correlation, accumulated with online co-moments.
// Throws PreconditionError for |xs| != |ys| or fewer than 2 points.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

struct PairKey {
  std::string parser;
  std::string doc_id;
  std::size_t gt_index = 0;
  auto operator<=>(const PairKey&) const = default;
};

struct AggregateOptions {
  bool missing_as_zero = true;  // false: MISSING pairs are left out of means
};

struct LeaderboardEntry {
  std::string parser;
  double mean_judge = 0.0;
  double mean_inline = 0.0;
  double mean_display = 0.0;
  std::size_t n_pairs = 0;
  std::size_t n_missing = 0;
  std::size_t n_inline = 0;
  std::size_t n_display = 0;
  std::map<metrics::Metric, std::optional<double>> metric_means;  // nullopt when nothing was scored
  std::map<metrics::Metric, metrics::Coverage> coverage;
};

// Means use the judge metric; pairs are counted once whatever the metric set.
std::vector<LeaderboardEntry> aggregate(const std::vector<metrics::ScoreRecord>& scores,
                                        const AggregateOptions& opts = {});

std::string render_leaderboard_md(const std::vector<LeaderboardEntry>& entries);
std::string render_leaderboard_csv(const std::vector<LeaderboardEntry>& entries);

struct CorrelationRow {
  metrics::Metric metric;
  std::size_t n = 0;
  std::optional<double> r;
  std::string note;
};

struct CorrelationReport {
  std::vector<CorrelationRow> rows;   // metrics with >= 2 paired values
  std::vector<CorrelationRow> omitted;  // r is always nullopt; note says why
};

using MetricScores = std::map<PairKey, std::map<metrics::Metric, double>>;

// Scored values per pair, MISSING counted as 0 like the leaderboard.
MetricScores collect_pair_scores(const std::vector<metrics::ScoreRecord>& scores);
CorrelationReport correlation_report(const MetricScores& metric_scores, const std::map<PairKey, double>& human_means,
                                     const std::vector<metrics::Metric>& metric_order = {std::begin(metrics::kMetrics),
                                                                                         std::end(metrics::kMetrics)});
std::string render_correlations_csv(const CorrelationReport& report);

std::string csv_field(std::string_view s);
std::string format_fixed(double v, int decimals);

}  // namespace fbench::reporting
