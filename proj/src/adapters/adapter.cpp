#include "fbench/adapters/adapter.hpp"

#include <httplib.h>

#include <cstdlib>

#include "fbench/errors.hpp"
#include "fbench/util/fs.hpp"
#include "fbench/util/hash.hpp"
#include "fbench/util/subprocess.hpp"
#include "fbench/util/text.hpp"

namespace fbench::adapters {

namespace stdfs = std::filesystem;
using nlohmann::json;

std::string to_string(AdapterMode m) {
  switch (m) {
    case AdapterMode::subprocess: return "subprocess";
    case AdapterMode::http: return "http";
    case AdapterMode::builtin_mock: return "builtin_mock";
  }
  return "builtin_mock";
}

std::string to_string(ParseStatus s) {
  switch (s) {
    case ParseStatus::ok: return "ok";
    case ParseStatus::error: return "error";
    case ParseStatus::timeout: return "timeout";
  }
  return "error";
}

ParseStatus parse_status_from_string(std::string_view s) {
  if (s == "ok") return ParseStatus::ok;
  if (s == "error") return ParseStatus::error;
  if (s == "timeout") return ParseStatus::timeout;
  throw std::invalid_argument("unknown parse status: " + std::string(s));
}

void AdapterSpec::validate() const {
  auto fail = [&](const std::string& msg) { throw ConfigError("adapter '" + name + "': " + msg); };
  if (name.empty()) throw ConfigError("adapter name must not be empty");
  if (name.find('/') != std::string::npos || name == "." || name == "..") fail("name must be usable as a directory name");
  if (timeout.count() <= 0) fail("timeout must be positive");
  if (max_concurrency == 0) fail("max_concurrency must be at least 1");
  const bool has_cmd = !command_template.empty();
  const bool has_http = !endpoint.empty() || !auth_env.empty() || !response_field.empty();
  switch (mode) {
    case AdapterMode::subprocess:
      if (!has_cmd) fail("subprocess mode needs command_template");
      if (command_template.find("{pdf}") == std::string::npos) fail("command_template must contain {pdf}");
      if (has_http) fail("http fields are not allowed in subprocess mode");
      if (!mock_profile.is_identity()) fail("mock_profile is only allowed in builtin_mock mode");
      break;
    case AdapterMode::http:
      if (endpoint.empty()) fail("http mode needs endpoint");
      if (!text::split_url(endpoint)) fail("endpoint must be an absolute URL");
      if (has_cmd) fail("command_template is not allowed in http mode");
      if (!mock_profile.is_identity()) fail("mock_profile is only allowed in builtin_mock mode");
      break;
    case AdapterMode::builtin_mock:
      if (has_cmd || has_http) fail("builtin_mock mode takes only mock_profile");
      mock_profile.validate();
      break;
  }
}

json AdapterSpec::to_json() const {
  json j{{"name", name}, {"mode", to_string(mode)}, {"timeout_s", timeout.count()}, {"max_concurrency", max_concurrency}};
  switch (mode) {
    case AdapterMode::subprocess: j["command_template"] = command_template; break;
    case AdapterMode::http:
      j["endpoint"] = endpoint;
      if (!auth_env.empty()) j["auth_env"] = auth_env;
      j["upload"] = upload == UploadKind::binary ? "binary" : "multipart";
      if (upload == UploadKind::multipart) j["multipart_field"] = multipart_field;
      if (!response_field.empty()) j["response_field"] = response_field;
      break;
    case AdapterMode::builtin_mock: j["mock_profile"] = mock_profile.to_json(); break;
  }
  return j;
}

AdapterSpec AdapterSpec::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("adapter spec must be an object");
  AdapterSpec s;
  try {
    s.name = j.value("name", std::string());
    const auto mode = j.value("mode", std::string());
    if (mode == "subprocess") s.mode = AdapterMode::subprocess;
    else if (mode == "http") s.mode = AdapterMode::http;
    else if (mode == "builtin_mock") s.mode = AdapterMode::builtin_mock;
    else throw ConfigError("adapter '" + s.name + "': unknown mode '" + mode + "'");
    static const char* known[] = {"name",     "mode",           "command_template", "endpoint",
                                  "auth_env", "upload",         "multipart_field",  "response_field",
                                  "timeout_s", "max_concurrency", "mock_profile"};
    for (const auto& [k, _] : j.items())
      if (std::find(std::begin(known), std::end(known), k) == std::end(known))
        throw ConfigError("adapter '" + s.name + "': unknown field '" + k + "'");
    s.command_template = j.value("command_template", std::string());
    s.endpoint = j.value("endpoint", std::string());
    s.auth_env = j.value("auth_env", std::string());
    const auto upload = j.value("upload", std::string("binary"));
    if (upload == "binary") s.upload = UploadKind::binary;
    else if (upload == "multipart") s.upload = UploadKind::multipart;
    else throw ConfigError("adapter '" + s.name + "': upload must be binary or multipart");
    s.multipart_field = j.value("multipart_field", std::string("file"));
    s.response_field = j.value("response_field", std::string());
    s.timeout = std::chrono::seconds(j.value("timeout_s", static_cast<std::int64_t>(kDefaultParserTimeout.count())));
    s.max_concurrency = j.value("max_concurrency", 1u);
    if (j.contains("mock_profile")) s.mock_profile = PerturbationSpec::from_json(j.at("mock_profile"));
  } catch (const json::exception& e) {
    throw ConfigError("adapter '" + s.name + "': " + e.what());
  }
  s.validate();
  return s;
}

ParserRun perturb_output(const synthdoc::DocumentManifest& m, const PerturbationSpec& spec, const std::string& parser) {
  auto p = perturb(m, spec);
  ParserRun run;
  run.output.parser = parser;
  run.output.doc_id = m.doc_id;
  run.output.text = std::move(p.text);
  run.output.status = ParseStatus::ok;
  run.ledger = std::move(p.ledger);
  return run;
}

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t ms_since(Clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t0).count();
}

ParsedOutput run_subprocess(const AdapterSpec& spec, const stdfs::path& pdf, const std::string& doc_id) {
  ParsedOutput out{spec.name, doc_id, "", 0, ParseStatus::ok, ""};
  const auto scratch = fs::make_temp_dir("fbench-parse");
  const auto out_file = scratch / "output.md";
  const auto cmd = text::substitute(spec.command_template, {{"pdf", text::shell_quote(stdfs::absolute(pdf).string())},
                                                            {"out", text::shell_quote(out_file.string())}});
  auto res = run_shell(cmd, std::chrono::duration_cast<std::chrono::milliseconds>(spec.timeout), scratch);
  out.runtime_ms = res.elapsed.count();
  std::error_code ec;
  if (res.timed_out) {
    out.status = ParseStatus::timeout;
    out.error_detail = "timed out after " + std::to_string(spec.timeout.count()) + " s";
  } else if (res.spawn_failed || res.exit_code != 0) {
    out.status = ParseStatus::error;
    out.error_detail = "exit status " + std::to_string(res.exit_code) + ": " + text::tail(res.err, 2000);
  } else if (spec.command_template.find("{out}") != std::string::npos && stdfs::exists(out_file, ec)) {
    out.text = fs::read_file(out_file);
  } else {
    out.text = std::move(res.out);
  }
  stdfs::remove_all(scratch, ec);
  return out;
}

ParsedOutput run_http(const AdapterSpec& spec, const stdfs::path& pdf, const std::string& doc_id) {
  ParsedOutput out{spec.name, doc_id, "", 0, ParseStatus::ok, ""};
  const auto url = *text::split_url(spec.endpoint);
  const std::string body = fs::read_file(pdf);
  httplib::Client cli(url.origin);
  const auto t = std::chrono::duration_cast<std::chrono::microseconds>(spec.timeout);
  cli.set_connection_timeout(t);
  cli.set_read_timeout(t);
  cli.set_write_timeout(t);
  httplib::Headers headers;
  if (!spec.auth_env.empty()) headers.emplace("Authorization", std::string("Bearer ") + std::getenv(spec.auth_env.c_str()));
  const std::string path = url.path.empty() ? "/" : url.path;
  const auto t0 = Clock::now();
  httplib::Result res = spec.upload == UploadKind::binary
                            ? cli.Post(path, headers, body, "application/pdf")
                            : cli.Post(path, headers,
                                       httplib::MultipartFormDataItems{
                                           {spec.multipart_field, body, pdf.filename().string(), "application/pdf"}});
  out.runtime_ms = ms_since(t0);
  if (!res) {
    const auto err = res.error();
    const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                           (err == httplib::Error::Read && out.runtime_ms >= spec.timeout.count() * 1000 - 50);
    out.status = timed_out ? ParseStatus::timeout : ParseStatus::error;
    out.error_detail = httplib::to_string(err);
    return out;
  }
  if (res->status < 200 || res->status >= 300) {
    out.status = ParseStatus::error;
    out.error_detail = "HTTP " + std::to_string(res->status) + ": " + text::tail(res->body, 2000);
    return out;
  }
  if (spec.response_field.empty()) {
    out.text = res->body;
    return out;
  }
  try {
    auto j = json::parse(res->body);
    out.text = j.at(spec.response_field).get<std::string>();
  } catch (const json::exception& e) {
    out.status = ParseStatus::error;
    out.error_detail = "response field '" + spec.response_field + "': " + e.what();
  }
  return out;
}

}  // namespace

ParserRun run_parser(const AdapterSpec& spec, const stdfs::path& pdf, const synthdoc::DocumentManifest& m) {
  spec.validate();
  if (spec.mode == AdapterMode::http && !spec.auth_env.empty()) {
    const char* key = std::getenv(spec.auth_env.c_str());
    if (!key || !*key) throw ConfigError("adapter '" + spec.name + "': environment variable " + spec.auth_env + " is not set");
  }
  if (spec.mode == AdapterMode::builtin_mock) return perturb_output(m, spec.mock_profile, spec.name);

  ParserRun run;
  std::error_code ec;
  if (!stdfs::is_regular_file(pdf, ec)) {
    run.output = {spec.name, m.doc_id, "", 0, ParseStatus::error, "input PDF not found: " + pdf.string()};
    return run;
  }
  try {
    run.output = spec.mode == AdapterMode::subprocess ? run_subprocess(spec, pdf, m.doc_id) : run_http(spec, pdf, m.doc_id);
  } catch (const std::exception& e) {
    run.output = {spec.name, m.doc_id, "", 0, ParseStatus::error, e.what()};
  }
  return run;
}

void write_parser_run(const stdfs::path& dir, const ParserRun& run, const json& provenance) {
  const auto& o = run.output;
  fs::write_file_atomic(dir / "output.md", o.text);
  if (run.ledger) fs::write_json(dir / "perturbations.json", run.ledger->to_json());
  json status{{"parser", o.parser},
              {"doc_id", o.doc_id},
              {"status", to_string(o.status)},
              {"runtime_ms", o.runtime_ms},
              {"error_detail", o.error_detail},
              {"output_sha256", hash::sha256_hex(o.text)},
              {"provenance", provenance}};
  fs::write_json(dir / "status.json", status);
}

std::optional<ParserRun> read_parser_run(const stdfs::path& dir) {
  std::error_code ec;
  if (!stdfs::exists(dir / "status.json", ec) || !stdfs::exists(dir / "output.md", ec)) return std::nullopt;
  try {
    auto st = fs::read_json(dir / "status.json");
    ParserRun run;
    run.output.parser = st.at("parser").get<std::string>();
    run.output.doc_id = st.at("doc_id").get<std::string>();
    run.output.status = parse_status_from_string(st.at("status").get<std::string>());
    run.output.runtime_ms = st.at("runtime_ms").get<std::int64_t>();
    run.output.error_detail = st.at("error_detail").get<std::string>();
    run.output.text = fs::read_file(dir / "output.md");
    if (hash::sha256_hex(run.output.text) != st.at("output_sha256").get<std::string>()) return std::nullopt;
    if (stdfs::exists(dir / "perturbations.json", ec))
      run.ledger = PerturbationLedger::from_json(fs::read_json(dir / "perturbations.json"));
    return run;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace fbench::adapters
