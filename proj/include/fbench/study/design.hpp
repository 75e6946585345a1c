#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace fbench::study {

class BalanceError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PairSource {
  std::string parser;
  std::string doc_id;
  std::size_t gt_index = 0;
  auto operator<=>(const PairSource&) const = default;
};

// A scored (ground truth, extraction) pair offered for selection.
struct CandidatePair {
  PairSource source;
  std::string gt_latex;
  std::optional<std::string> extracted;  // nullopt = MISSING
  std::optional<double> cdm_f1;
  std::optional<double> judge;
};

struct StudyPair {
  std::string pair_id;
  std::string gt_latex;
  std::string extracted_latex;
  std::string gt_image;         // file name under the image directory
  std::string extracted_image;
  PairSource source;
  std::optional<double> cdm_f1;
  std::optional<double> judge;

  bool operator==(const StudyPair&) const = default;
};

struct Assignment {
  std::string rater_id;
  std::vector<std::string> pair_ids;
  bool operator==(const Assignment&) const = default;
};

std::string pair_id_for(const PairSource& s);
bool is_perfect(const CandidatePair& c);

// Drops MISSING pairs and pairs where both CDM and judge are perfect, then keeps
// `cap` of the rest by seeded sampling. Output is ordered by pair source.
std::vector<StudyPair> select_challenge_pairs(const std::vector<CandidatePair>& candidates, std::size_t cap,
                                              std::uint64_t seed);

std::vector<std::string> rater_ids(std::size_t count);

// Throws BalanceError unless |pairs| * raters_per_pair == |raters| * pairs_per_rater
// and the design can avoid repeating a pair for one rater.
std::vector<Assignment> build_assignments(const std::vector<std::string>& pair_ids, const std::vector<std::string>& raters,
                                          std::size_t raters_per_pair, std::size_t pairs_per_rater, std::uint64_t seed);

// Problems with a design; empty when both marginals hold and no rater repeats a pair.
std::vector<std::string> check_design(const std::vector<Assignment>& design, const std::vector<std::string>& pair_ids,
                                      std::size_t raters_per_pair, std::size_t pairs_per_rater);

struct HumanRating {
  std::string rater_id;
  std::string pair_id;
  int score = 0;
  std::string timestamp;
  bool operator==(const HumanRating&) const = default;
};

struct HumanMean {
  double mean = 0.0;
  std::size_t n = 0;
  bool incomplete = false;
};

// Pairs without ratings are absent.
std::map<std::string, HumanMean> aggregate_human(const std::vector<HumanRating>& ratings, std::size_t raters_per_pair);

nlohmann::json to_json(const StudyPair& p);
StudyPair study_pair_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Assignment& a);
Assignment assignment_from_json(const nlohmann::json& j);
nlohmann::json to_json(const HumanRating& r);
HumanRating human_rating_from_json(const nlohmann::json& j);

}  // namespace fbench::study
