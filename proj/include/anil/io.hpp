#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "anil/task.hpp"

namespace anil {

// Serialization format for specs, tasks and pools. Doubles are stored as JSON
// numbers with shortest round-trip printing, so load(save(x)) reproduces x
// bit for bit. Matrices are stored row-major with explicit shape.
inline constexpr int kFormatVersion = 1;

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);
nlohmann::json vector_to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j);

nlohmann::json spec_to_json(const TaskFamilySpec& spec);
TaskFamilySpec spec_from_json(const nlohmann::json& j);

nlohmann::json task_to_json(const TaskInstance& t);
TaskInstance task_from_json(const nlohmann::json& j);

nlohmann::json pool_to_json(const std::vector<TaskInstance>& pool);
std::vector<TaskInstance> pool_from_json(const nlohmann::json& j);

// Shortest representation of x that parses back to exactly x.
std::string format_double(double x);

// FNV-1a content hash, printed as 16 hex digits. Used by run manifests to
// fingerprint output files for replay verification.
std::uint64_t fnv1a64(std::string_view data);
std::string content_hash_hex(std::string_view data);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace anil
