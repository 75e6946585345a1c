#include "fbench/llm/schema.hpp"

#include <cmath>
#include <set>

namespace fbench::llm {

using nlohmann::json;

namespace {

bool type_matches(const json& v, const std::string& type) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "boolean") return v.is_boolean();
  if (type == "null") return v.is_null();
  if (type == "integer") {
    if (v.is_number_integer()) return true;
    return v.is_number_float() && std::floor(v.get<double>()) == v.get<double>();
  }
  if (type == "number") return v.is_number();
  return false;
}

std::optional<std::string> validate_at(const json& v, const json& s, const std::string& path) {
  if (!s.is_object()) return std::nullopt;
  if (auto t = s.find("type"); t != s.end()) {
    bool ok = false;
    if (t->is_string()) {
      ok = type_matches(v, t->get<std::string>());
    } else if (t->is_array()) {
      for (const auto& alt : *t) ok = ok || type_matches(v, alt.get<std::string>());
    }
    if (!ok) return path + ": expected type " + t->dump();
  }
  if (auto e = s.find("enum"); e != s.end()) {
    bool hit = false;
    for (const auto& x : *e) hit = hit || x == v;
    if (!hit) return path + ": value not in enum";
  }
  if (v.is_number()) {
    const double d = v.get<double>();
    if (auto m = s.find("minimum"); m != s.end() && d < m->get<double>())
      return path + ": below minimum";
    if (auto m = s.find("maximum"); m != s.end() && d > m->get<double>())
      return path + ": above maximum";
    if (auto m = s.find("multipleOf"); m != s.end()) {
      const double q = d / m->get<double>();
      if (std::fabs(q - std::round(q)) > 1e-9) return path + ": not a multiple of " + m->dump();
    }
  }
  if (v.is_string()) {
    if (auto m = s.find("minLength"); m != s.end() && v.get<std::string>().size() < m->get<std::size_t>())
      return path + ": string too short";
  }
  if (v.is_array()) {
    if (auto m = s.find("minItems"); m != s.end() && v.size() < m->get<std::size_t>())
      return path + ": expected at least " + m->dump() + " items, got " + std::to_string(v.size());
    if (auto m = s.find("maxItems"); m != s.end() && v.size() > m->get<std::size_t>())
      return path + ": expected at most " + m->dump() + " items, got " + std::to_string(v.size());
    if (auto items = s.find("items"); items != s.end()) {
      for (std::size_t i = 0; i < v.size(); ++i)
        if (auto err = validate_at(v[i], *items, path + "[" + std::to_string(i) + "]")) return err;
    }
  }
  if (v.is_object()) {
    if (auto req = s.find("required"); req != s.end()) {
      for (const auto& name : *req)
        if (!v.contains(name.get<std::string>()))
          return path + ": missing required field '" + name.get<std::string>() + "'";
    }
    const auto props = s.find("properties");
    if (props != s.end()) {
      for (auto it = v.begin(); it != v.end(); ++it) {
        auto p = props->find(it.key());
        if (p != props->end()) {
          if (auto err = validate_at(it.value(), *p, path + "." + it.key())) return err;
        } else if (s.value("additionalProperties", true) == false) {
          return path + ": unexpected field '" + it.key() + "'";
        }
      }
    }
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::string> validate(const json& value, const json& schema) {
  return validate_at(value, schema, "$");
}

std::optional<std::string> check_schema(const json& schema) {
  if (!schema.is_object()) return "schema must be an object";
  if (schema.value("type", "") == "object") {
    std::set<std::string> required;
    if (auto r = schema.find("required"); r != schema.end() && r->is_array())
      for (const auto& n : *r) required.insert(n.get<std::string>());
    if (auto p = schema.find("properties"); p != schema.end()) {
      for (auto it = p->begin(); it != p->end(); ++it) {
        if (!required.count(it.key())) return "property '" + it.key() + "' is not listed as required";
        if (auto err = check_schema(it.value())) return err;
      }
    }
  }
  if (auto items = schema.find("items"); items != schema.end())
    if (auto err = check_schema(*items)) return err;
  return std::nullopt;
}

}  // namespace fbench::llm
