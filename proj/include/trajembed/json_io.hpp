#ifndef TRAJEMBED_JSON_IO_HPP
#define TRAJEMBED_JSON_IO_HPP

#include <string>

#include <json.hpp>

#include "trajembed/process.hpp"
#include "trajembed/types.hpp"

namespace trajembed {

enum class SpecKind { kHsmm, kHmm };

// Top-level "kind" discriminator of a process spec document.
SpecKind spec_kind(const nlohmann::json& j);

nlohmann::json to_json(const ProcessSpec& spec);
nlohmann::json to_json(const DiscreteProcessSpec& spec);
ProcessSpec process_spec_from_json(const nlohmann::json& j);
DiscreteProcessSpec discrete_spec_from_json(const nlohmann::json& j);

// Complex matrices serialize as row-major arrays of {"re": , "im": }.
nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);
nlohmann::json vector_to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j);

// Canonical form: sorted keys, two-space indent, trailing newline. Writing,
// reading back, and writing again yields identical bytes.
std::string canonical_dump(const nlohmann::json& j);
void write_json_file(const nlohmann::json& j, const std::string& path);
nlohmann::json load_json_file(const std::string& path);  // parse diagnostics on error

// FNV-1a over the canonical serialization; used to tag event logs.
std::string model_hash(const nlohmann::json& j);

}  // namespace trajembed

#endif
