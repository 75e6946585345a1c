#include "fbench/study/design.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "fbench/util/hash.hpp"
#include "fbench/util/rng.hpp"

namespace fbench::study {

using nlohmann::json;

std::string pair_id_for(const PairSource& s) {
  return "pr_" + hash::sha256_hex(s.parser + "\x1f" + s.doc_id + "\x1f" + std::to_string(s.gt_index)).substr(0, 16);
}

bool is_perfect(const CandidatePair& c) { return c.cdm_f1 == 1.0 && c.judge == 10.0; }

std::vector<StudyPair> select_challenge_pairs(const std::vector<CandidatePair>& candidates, std::size_t cap,
                                              std::uint64_t seed) {
  std::vector<const CandidatePair*> eligible;
  for (const auto& c : candidates)
    if (c.extracted && !is_perfect(c)) eligible.push_back(&c);
  std::sort(eligible.begin(), eligible.end(), [](auto* a, auto* b) { return a->source < b->source; });
  eligible.erase(std::unique(eligible.begin(), eligible.end(), [](auto* a, auto* b) { return a->source == b->source; }),
                 eligible.end());
  if (eligible.size() > cap) {
    Rng rng(derive_seed(seed, "study/select"));
    rng.shuffle(eligible);
    eligible.resize(cap);
    std::sort(eligible.begin(), eligible.end(), [](auto* a, auto* b) { return a->source < b->source; });
  }
  std::vector<StudyPair> out;
  for (const auto* c : eligible) {
    StudyPair p;
    p.pair_id = pair_id_for(c->source);
    p.gt_latex = c->gt_latex;
    p.extracted_latex = *c->extracted;
    p.gt_image = p.pair_id + "_gt.png";
    p.extracted_image = p.pair_id + "_ext.png";
    p.source = c->source;
    p.cdm_f1 = c->cdm_f1;
    p.judge = c->judge;
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<std::string> rater_ids(std::size_t count) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < count; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "rater_%02zu", i + 1);
    out.emplace_back(buf);
  }
  return out;
}

namespace {

bool has(const std::vector<std::size_t>& v, std::size_t x) { return std::find(v.begin(), v.end(), x) != v.end(); }

std::size_t first_repeat(const std::vector<std::size_t>& v) {
  for (std::size_t a = 0; a < v.size(); ++a)
    for (std::size_t b = 0; b < a; ++b)
      if (v[a] == v[b]) return a;
  return v.size();
}

// Swaps a repeated pair of rater r with a pair of another rater when neither
// side then repeats. Returns false when no such swap exists.
bool repair_one(std::vector<std::vector<std::size_t>>& slots, std::size_t r, std::size_t pos, Rng& rng) {
  const std::size_t p = slots[r][pos];
  std::vector<std::size_t> others(slots.size());
  for (std::size_t i = 0; i < others.size(); ++i) others[i] = i;
  rng.shuffle(others);
  for (std::size_t o : others) {
    if (o == r || has(slots[o], p)) continue;
    for (std::size_t q_pos = 0; q_pos < slots[o].size(); ++q_pos) {
      const std::size_t q = slots[o][q_pos];
      if (has(slots[r], q)) continue;
      std::swap(slots[r][pos], slots[o][q_pos]);
      return true;
    }
  }
  return false;
}

}  // namespace

std::vector<Assignment> build_assignments(const std::vector<std::string>& pair_ids, const std::vector<std::string>& raters,
                                          std::size_t raters_per_pair, std::size_t pairs_per_rater, std::uint64_t seed) {
  const std::size_t n_pairs = pair_ids.size(), n_raters = raters.size();
  if (n_pairs * raters_per_pair != n_raters * pairs_per_rater)
    throw BalanceError("unbalanced design: " + std::to_string(n_pairs) + " pairs x " + std::to_string(raters_per_pair) +
                       " raters per pair != " + std::to_string(n_raters) + " raters x " +
                       std::to_string(pairs_per_rater) + " pairs per rater");
  if (n_pairs == 0 || raters_per_pair == 0) throw BalanceError("design needs at least one pair and one rating per pair");
  if (raters_per_pair > n_raters || pairs_per_rater > n_pairs)
    throw BalanceError("design would give some rater the same pair twice");
  if (std::set<std::string>(pair_ids.begin(), pair_ids.end()).size() != n_pairs)
    throw BalanceError("pair ids are not unique");
  if (std::set<std::string>(raters.begin(), raters.end()).size() != n_raters)
    throw BalanceError("rater ids are not unique");

  Rng rng(derive_seed(seed, "study/assign"));
  std::vector<std::size_t> multiset;
  for (std::size_t k = 0; k < raters_per_pair; ++k)
    for (std::size_t i = 0; i < n_pairs; ++i) multiset.push_back(i);
  rng.shuffle(multiset);

  std::vector<std::vector<std::size_t>> slots(n_raters);
  for (std::size_t i = 0; i < multiset.size(); ++i) slots[i % n_raters].push_back(multiset[i]);

  bool repaired = true;
  for (std::size_t r = 0; r < n_raters && repaired; ++r) {
    for (std::size_t pos = first_repeat(slots[r]); pos < slots[r].size(); pos = first_repeat(slots[r])) {
      if (!repair_one(slots, r, pos, rng)) {
        repaired = false;
        break;
      }
    }
  }
  if (!repaired) {
    // Cyclic fallback: consecutive windows of a shuffled cycle never repeat a pair.
    std::vector<std::size_t> cycle(n_pairs);
    for (std::size_t i = 0; i < n_pairs; ++i) cycle[i] = i;
    rng.shuffle(cycle);
    for (std::size_t r = 0; r < n_raters; ++r) {
      slots[r].clear();
      for (std::size_t k = 0; k < pairs_per_rater; ++k) slots[r].push_back(cycle[(r * pairs_per_rater + k) % n_pairs]);
      rng.shuffle(slots[r]);
    }
  }

  std::vector<Assignment> out;
  for (std::size_t r = 0; r < n_raters; ++r) {
    Assignment a{raters[r], {}};
    for (auto i : slots[r]) a.pair_ids.push_back(pair_ids[i]);
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<std::string> check_design(const std::vector<Assignment>& design, const std::vector<std::string>& pair_ids,
                                      std::size_t raters_per_pair, std::size_t pairs_per_rater) {
  std::vector<std::string> problems;
  std::map<std::string, std::size_t> seen;
  for (const auto& p : pair_ids) seen[p] = 0;
  for (const auto& a : design) {
    if (a.pair_ids.size() != pairs_per_rater)
      problems.push_back(a.rater_id + " has " + std::to_string(a.pair_ids.size()) + " pairs");
    std::set<std::string> mine;
    for (const auto& p : a.pair_ids) {
      if (!mine.insert(p).second) problems.push_back(a.rater_id + " sees " + p + " twice");
      auto it = seen.find(p);
      if (it == seen.end())
        problems.push_back(a.rater_id + " has unknown pair " + p);
      else
        ++it->second;
    }
  }
  for (const auto& [p, n] : seen)
    if (n != raters_per_pair) problems.push_back(p + " is rated " + std::to_string(n) + " times");
  return problems;
}

std::map<std::string, HumanMean> aggregate_human(const std::vector<HumanRating>& ratings, std::size_t raters_per_pair) {
  std::map<std::string, std::pair<double, std::size_t>> sums;
  for (const auto& r : ratings) {
    auto& s = sums[r.pair_id];
    s.first += r.score;
    ++s.second;
  }
  std::map<std::string, HumanMean> out;
  for (const auto& [p, s] : sums)
    out[p] = HumanMean{s.first / static_cast<double>(s.second), s.second, s.second < raters_per_pair};
  return out;
}

namespace {
json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
std::optional<double> opt_from(const json& j, const char* k) {
  if (!j.contains(k) || j[k].is_null()) return std::nullopt;
  return j[k].get<double>();
}
}  // namespace

json to_json(const StudyPair& p) {
  return json{{"pair_id", p.pair_id},
              {"gt_latex", p.gt_latex},
              {"extracted_latex", p.extracted_latex},
              {"gt_image", p.gt_image},
              {"extracted_image", p.extracted_image},
              {"source", {{"parser", p.source.parser}, {"doc_id", p.source.doc_id}, {"gt_index", p.source.gt_index}}},
              {"cdm_f1", opt(p.cdm_f1)},
              {"judge", opt(p.judge)}};
}

StudyPair study_pair_from_json(const json& j) {
  StudyPair p;
  p.pair_id = j.at("pair_id").get<std::string>();
  p.gt_latex = j.at("gt_latex").get<std::string>();
  p.extracted_latex = j.at("extracted_latex").get<std::string>();
  p.gt_image = j.at("gt_image").get<std::string>();
  p.extracted_image = j.at("extracted_image").get<std::string>();
  const auto& s = j.at("source");
  p.source = {s.at("parser").get<std::string>(), s.at("doc_id").get<std::string>(), s.at("gt_index").get<std::size_t>()};
  p.cdm_f1 = opt_from(j, "cdm_f1");
  p.judge = opt_from(j, "judge");
  return p;
}

json to_json(const Assignment& a) { return json{{"rater_id", a.rater_id}, {"pair_ids", a.pair_ids}}; }

Assignment assignment_from_json(const json& j) {
  return Assignment{j.at("rater_id").get<std::string>(), j.at("pair_ids").get<std::vector<std::string>>()};
}

json to_json(const HumanRating& r) {
  return json{{"rater_id", r.rater_id}, {"pair_id", r.pair_id}, {"score", r.score}, {"timestamp", r.timestamp}};
}

HumanRating human_rating_from_json(const json& j) {
  return HumanRating{j.at("rater_id").get<std::string>(), j.at("pair_id").get<std::string>(), j.at("score").get<int>(),
                     j.value("timestamp", std::string())};
}

}  // namespace fbench::study
