#pragma once

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

namespace fbench::llm {

// Validates `value` against a JSON-Schema subset: type, properties, required,
// additionalProperties=false, items, minItems, maxItems, enum, minimum,
// maximum, multipleOf, minLength. Returns the first violation.
std::optional<std::string> validate(const nlohmann::json& value, const nlohmann::json& schema);

// Every object schema must list each of its properties under "required".
std::optional<std::string> check_schema(const nlohmann::json& schema);

}  // namespace fbench::llm
