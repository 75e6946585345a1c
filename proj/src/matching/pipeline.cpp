#include "fbench/matching/pipeline.hpp"

#include <algorithm>
#include <map>

#include "fbench/errors.hpp"
#include "fbench/util/assets.hpp"
#include "fbench/util/hash.hpp"
#include "fbench/util/text.hpp"

namespace fbench::matching {

using nlohmann::json;

std::string to_string(MatchMethod m) {
  switch (m) {
    case MatchMethod::exact: return "exact";
    case MatchMethod::fuzzy: return "fuzzy";
    case MatchMethod::retry_exact: return "retry_exact";
    case MatchMethod::retry_fuzzy: return "retry_fuzzy";
    case MatchMethod::split_from_group: return "split_from_group";
    case MatchMethod::missing: return "missing";
  }
  return "missing";
}

MatchMethod match_method_from_string(std::string_view s) {
  for (auto m : {MatchMethod::exact, MatchMethod::fuzzy, MatchMethod::retry_exact, MatchMethod::retry_fuzzy,
                 MatchMethod::split_from_group, MatchMethod::missing})
    if (to_string(m) == s) return m;
  throw std::invalid_argument("unknown match method: " + std::string(s));
}

json extraction_schema(std::size_t count) {
  json item{{"type", "object"},
            {"properties",
             {{"index", {{"type", "integer"}, {"minimum", 0}}},
              {"extracted", {{"type", "string"}}},
              {"grouped", {{"type", "boolean"}}}}},
            {"required", {"index", "extracted", "grouped"}},
            {"additionalProperties", false}};
  return json{{"type", "object"},
              {"properties", {{"formulas", {{"type", "array"}, {"items", item}, {"minItems", count}, {"maxItems", count}}}}},
              {"required", {"formulas"}},
              {"additionalProperties", false}};
}

std::string prompt_fingerprint() {
  return hash::sha256_hex(std::string(assets::get("prompts/extract_system.txt")) + "\x1f" +
                          std::string(assets::get("prompts/extract_user.txt")) + "\x1f" + extraction_schema(0).dump());
}

llm::LlmRequest extraction_request(const std::vector<std::pair<std::size_t, std::string>>& gt,
                                   const std::string& parsed_text, const std::string& model) {
  json list = json::array();
  for (const auto& [i, latex] : gt) list.push_back({{"index", i}, {"latex", latex}});
  llm::LlmRequest req;
  req.model = model;
  req.system_prompt = std::string(assets::get("prompts/extract_system.txt"));
  req.user_prompt = text::substitute(assets::get("prompts/extract_user.txt"),
                                     {{"count", std::to_string(gt.size())},
                                      {"ground_truth", list.dump()},
                                      {"parsed_output", parsed_text}});
  req.schema_name = llm::kExtractionSchema;
  req.response_schema = extraction_schema(gt.size());
  req.temperature = 0.0;
  return req;
}

ExtractionResponse llm_extract(const std::vector<std::pair<std::size_t, std::string>>& gt, const std::string& parsed_text,
                               llm::LlmClient& client, const std::string& model) {
  if (gt.empty()) throw PreconditionError("llm_extract needs at least one ground-truth formula");
  auto resp = client.complete_structured(extraction_request(gt, parsed_text, model), "match");
  ExtractionResponse out;
  out.payload = resp.payload;
  out.fingerprint = resp.fingerprint;
  out.retry_count = resp.retry_count;
  out.tokens_in = resp.tokens_in;
  out.tokens_out = resp.tokens_out;
  out.cost = resp.cost_estimate;
  std::map<std::size_t, ExtractionItem> by_index;
  for (const auto& it : resp.payload.at("formulas")) {
    ExtractionItem e{it.at("index").get<std::size_t>(), it.at("extracted").get<std::string>(), it.at("grouped").get<bool>()};
    if (!by_index.emplace(e.index, e).second)
      throw llm::ProtocolError("extraction response repeats index " + std::to_string(e.index));
  }
  for (const auto& [i, _] : gt) {
    auto f = by_index.find(i);
    if (f == by_index.end()) throw llm::ProtocolError("extraction response lacks index " + std::to_string(i));
    out.items.push_back(f->second);
  }
  return out;
}

ExtractionResponse llm_extract(const std::vector<std::string>& gt, const std::string& parsed_text, llm::LlmClient& client,
                               const std::string& model) {
  std::vector<std::pair<std::size_t, std::string>> indexed;
  for (std::size_t i = 0; i < gt.size(); ++i) indexed.emplace_back(i, gt[i]);
  return llm_extract(indexed, parsed_text, client, model);
}

std::string strip_math_delimiters(std::string_view s) {
  auto t = text::trim(s);
  const std::pair<std::string_view, std::string_view> pairs[] = {{"$$", "$$"}, {"\\[", "\\]"}, {"\\(", "\\)"}, {"$", "$"}};
  for (const auto& [open, close] : pairs) {
    if (t.size() >= open.size() + close.size() + 1 && text::starts_with(t, open) && text::ends_with(t, close))
      return std::string(text::trim(t.substr(open.size(), t.size() - open.size() - close.size())));
  }
  return std::string(t);
}

std::string excise(std::string_view text, std::vector<Span> spans) {
  std::sort(spans.begin(), spans.end(), [](const Span& a, const Span& b) { return a.begin < b.begin; });
  std::string out;
  std::size_t pos = 0;
  for (const auto& s : spans) {
    if (s.begin < pos) continue;
    out.append(text.substr(pos, s.begin - pos));
    out += ' ';
    pos = s.end;
  }
  out.append(text.substr(pos));
  return out;
}

namespace {

struct StageOutcome {
  std::map<std::size_t, MatchResult> validated;
};

// Stage 2 over one text version: validates extractions against `text`.
StageOutcome validate(const ExtractionResponse& ex, const std::map<std::size_t, std::string>& gt_latex,
                      const std::string& text, double max_ratio, bool is_retry) {
  StageOutcome out;
  std::vector<Span> blocked;
  const auto version = is_retry ? TextVersion::residual : TextVersion::original;

  // Grouped items: runs of consecutive indices flagged grouped with the same extraction.
  struct Unit {
    std::vector<std::size_t> members;  // positions in ex.items
    std::string needle;
    std::size_t norm_len = 0;
  };
  std::vector<Unit> units;
  for (std::size_t p = 0; p < ex.items.size(); ++p) {
    const auto& it = ex.items[p];
    const auto needle = strip_math_delimiters(it.extracted);
    if (needle.empty()) continue;
    if (it.grouped && !units.empty()) {
      const auto& prev = ex.items[units.back().members.back()];
      if (prev.grouped && prev.index + 1 == it.index && units.back().needle == needle) {
        units.back().members.push_back(p);
        continue;
      }
    }
    units.push_back({{p}, needle, normalize(needle).size()});
  }
  std::stable_sort(units.begin(), units.end(), [&](const Unit& a, const Unit& b) {
    if (a.norm_len != b.norm_len) return a.norm_len > b.norm_len;
    return ex.items[a.members[0]].index < ex.items[b.members[0]].index;
  });

  for (const auto& u : units) {
    auto loc = fuzzy_locate(u.needle, text, max_ratio, blocked);
    if (!loc) continue;
    if (u.members.size() == 1) {
      const auto& it = ex.items[u.members[0]];
      MatchResult r;
      r.gt_index = it.index;
      r.llm_extracted = it.extracted;
      r.extracted = text.substr(loc->span.begin, loc->span.end - loc->span.begin);
      r.method = loc->exact_raw ? (is_retry ? MatchMethod::retry_exact : MatchMethod::exact)
                                : (is_retry ? MatchMethod::retry_fuzzy : MatchMethod::fuzzy);
      r.edit_ratio = loc->exact_raw ? 0.0 : loc->edit_ratio;
      r.span = loc->span;
      r.text_version = version;
      blocked.push_back(loc->span);
      out.validated[it.index] = std::move(r);
      continue;
    }
    const std::string region = text.substr(loc->span.begin, loc->span.end - loc->span.begin);
    std::vector<std::string> parts;
    std::vector<std::size_t> indices;
    for (auto p : u.members) {
      indices.push_back(ex.items[p].index);
      parts.push_back(gt_latex.at(ex.items[p].index));
    }
    auto split = split_grouped(region, parts);
    if (split.degenerate) continue;
    blocked.push_back(loc->span);
    for (std::size_t k = 0; k < u.members.size(); ++k) {
      const auto& it = ex.items[u.members[k]];
      MatchResult r;
      r.gt_index = it.index;
      r.llm_extracted = it.extracted;
      r.extracted = split.segments[k];
      r.method = MatchMethod::split_from_group;
      r.edit_ratio = loc->exact_raw ? 0.0 : loc->edit_ratio;
      r.span = Span{loc->span.begin + split.spans[k].begin, loc->span.begin + split.spans[k].end};
      r.text_version = version;
      r.group = indices;
      out.validated[it.index] = std::move(r);
    }
  }
  return out;
}

json stage_json(const ExtractionResponse& ex) {
  return json{{"fingerprint", ex.fingerprint}, {"retry_count", ex.retry_count}, {"tokens_in", ex.tokens_in},
              {"tokens_out", ex.tokens_out}, {"cost", ex.cost}, {"payload", ex.payload}};
}

}  // namespace

DocumentMatches match_pipeline(const synthdoc::DocumentManifest& m, const adapters::ParsedOutput& parsed,
                               llm::LlmClient& client, const MatchOptions& opts) {
  DocumentMatches d;
  d.doc_id = m.doc_id;
  d.parser = parsed.parser;
  d.prompt_fingerprint = prompt_fingerprint();
  d.max_ratio = opts.max_ratio;
  d.stage1 = nullptr;
  d.retry = nullptr;
  const std::size_t n = m.ground_truth.size();
  d.results.resize(n);
  for (std::size_t i = 0; i < n; ++i) d.results[i].gt_index = i;
  if (parsed.status != adapters::ParseStatus::ok || n == 0) return d;

  std::vector<std::pair<std::size_t, std::string>> gt;
  std::map<std::size_t, std::string> gt_latex;
  for (const auto& g : m.ground_truth) {
    gt.emplace_back(g.gt_index, g.latex);
    gt_latex[g.gt_index] = g.latex;
  }

  auto ex = llm_extract(gt, parsed.text, client, opts.model);
  d.stage1 = stage_json(ex);
  for (const auto& it : ex.items) d.results[it.index].llm_extracted = it.extracted;
  auto first = validate(ex, gt_latex, parsed.text, opts.max_ratio, false);
  std::vector<Span> matched;
  for (auto& [i, r] : first.validated) {
    matched.push_back(*r.span);
    d.results[i] = std::move(r);
  }

  std::vector<std::pair<std::size_t, std::string>> failed;
  for (const auto& g : gt)
    if (!first.validated.count(g.first)) failed.push_back(g);
  if (failed.empty() || !opts.retry) return d;

  const std::string residual = excise(parsed.text, matched);
  d.residual_text = residual;
  auto rex = llm_extract(failed, residual, client, opts.model);
  d.retry = stage_json(rex);
  auto second = validate(rex, gt_latex, residual, opts.max_ratio, true);
  for (const auto& it : rex.items)
    if (!second.validated.count(it.index)) d.results[it.index].llm_extracted = it.extracted;
  for (auto& [i, r] : second.validated) d.results[i] = std::move(r);
  return d;
}

double DocumentMatches::cost() const {
  double c = 0.0;
  for (const auto* s : {&stage1, &retry})
    if (s->is_object()) c += s->value("cost", 0.0);
  return c;
}

std::vector<std::string> check_matches(const DocumentMatches& d, const synthdoc::DocumentManifest& m,
                                       const std::string& parsed_text) {
  std::vector<std::string> problems;
  if (d.results.size() != m.ground_truth.size()) problems.push_back("result count differs from ground truth");
  std::map<std::pair<TextVersion, bool>, std::vector<Span>> by_stage;
  for (std::size_t i = 0; i < d.results.size(); ++i) {
    const auto& r = d.results[i];
    const auto tag = "result " + std::to_string(i) + ": ";
    if (r.gt_index != i) problems.push_back(tag + "gt_index out of order");
    if ((r.method == MatchMethod::exact || r.method == MatchMethod::retry_exact) && r.edit_ratio != 0.0)
      problems.push_back(tag + "exact match with nonzero ratio");
    if (r.method == MatchMethod::missing) {
      if (r.extracted || r.span) problems.push_back(tag + "missing result carries an extraction");
      continue;
    }
    if (!r.extracted || r.extracted->empty() || !r.span) {
      problems.push_back(tag + "matched result without extraction or span");
      continue;
    }
    const std::string& text = r.text_version == TextVersion::original ? parsed_text : *d.residual_text;
    if (r.span->end > text.size() || r.span->begin > r.span->end) {
      problems.push_back(tag + "span outside its text");
      continue;
    }
    if (r.method != MatchMethod::split_from_group &&
        text.substr(r.span->begin, r.span->end - r.span->begin) != *r.extracted)
      problems.push_back(tag + "span text differs from extraction");
    auto& spans = by_stage[{r.text_version, r.method == MatchMethod::split_from_group}];
    for (const auto& s : spans)
      if (s.overlaps(*r.span)) problems.push_back(tag + "span overlaps another in the same stage");
    spans.push_back(*r.span);
  }
  return problems;
}

json to_json(const MatchResult& r) {
  json j{{"gt_index", r.gt_index},
         {"method", to_string(r.method)},
         {"extracted", r.extracted ? json(*r.extracted) : json(nullptr)},
         {"llm_extracted", r.llm_extracted},
         {"edit_ratio", r.edit_ratio ? json(*r.edit_ratio) : json(nullptr)},
         {"span", r.span ? json::array({r.span->begin, r.span->end}) : json(nullptr)},
         {"text_version", r.text_version == TextVersion::original ? "original" : "residual"}};
  if (!r.group.empty()) j["group"] = r.group;
  return j;
}

MatchResult match_result_from_json(const json& j) {
  MatchResult r;
  r.gt_index = j.at("gt_index").get<std::size_t>();
  r.method = match_method_from_string(j.at("method").get<std::string>());
  if (!j.at("extracted").is_null()) r.extracted = j.at("extracted").get<std::string>();
  r.llm_extracted = j.value("llm_extracted", std::string());
  if (!j.at("edit_ratio").is_null()) r.edit_ratio = j.at("edit_ratio").get<double>();
  if (!j.at("span").is_null()) r.span = Span{j["span"][0].get<std::size_t>(), j["span"][1].get<std::size_t>()};
  r.text_version = j.value("text_version", std::string("original")) == "residual" ? TextVersion::residual : TextVersion::original;
  if (j.contains("group")) r.group = j.at("group").get<std::vector<std::size_t>>();
  return r;
}

json to_json(const DocumentMatches& d) {
  json results = json::array();
  for (const auto& r : d.results) results.push_back(to_json(r));
  return json{{"doc_id", d.doc_id},
              {"parser", d.parser},
              {"max_ratio", d.max_ratio},
              {"prompt_fingerprint", d.prompt_fingerprint},
              {"stage1", d.stage1},
              {"retry", d.retry},
              {"residual_text", d.residual_text ? json(*d.residual_text) : json(nullptr)},
              {"results", std::move(results)}};
}

DocumentMatches document_matches_from_json(const json& j) {
  DocumentMatches d;
  d.doc_id = j.at("doc_id").get<std::string>();
  d.parser = j.at("parser").get<std::string>();
  d.max_ratio = j.at("max_ratio").get<double>();
  d.prompt_fingerprint = j.at("prompt_fingerprint").get<std::string>();
  d.stage1 = j.at("stage1");
  d.retry = j.at("retry");
  if (!j.at("residual_text").is_null()) d.residual_text = j.at("residual_text").get<std::string>();
  for (const auto& r : j.at("results")) d.results.push_back(match_result_from_json(r));
  return d;
}

}  // namespace fbench::matching
