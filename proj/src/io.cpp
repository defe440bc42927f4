#include "anil/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace anil {
namespace {

using nlohmann::json;

Geometry geometry_from_string(const std::string& s) {
  if (s == "strongly_convex") return Geometry::kStronglyConvex;
  if (s == "nonconvex") return Geometry::kNonconvex;
  throw ConfigError("unknown geometry: " + s);
}

json loss_to_json(const LossParams& p) {
  json j;
  j["A"] = matrix_to_json(p.A);
  j["B"] = matrix_to_json(p.B);
  j["C"] = matrix_to_json(p.C);
  j["c_w"] = vector_to_json(p.c_w);
  j["c_phi"] = vector_to_json(p.c_phi);
  j["sine"] = vector_to_json(p.sine);
  return j;
}

LossParams loss_from_json(const json& j) {
  LossParams p;
  p.A = matrix_from_json(j.at("A"));
  p.B = matrix_from_json(j.at("B"));
  p.C = matrix_from_json(j.at("C"));
  p.c_w = vector_from_json(j.at("c_w"));
  p.c_phi = vector_from_json(j.at("c_phi"));
  p.sine = vector_from_json(j.at("sine"));
  return p;
}

json cert_to_json(const Certificates& c) {
  json j;
  j["inner_a_min"] = c.inner_a_min;
  j["inner_a_max"] = c.inner_a_max;
  j["inner_b_norm"] = c.inner_b_norm;
  j["outer_joint_norm"] = c.outer_joint_norm;
  j["required_m"] = c.required_m;
  j["witness_min_eig"] = c.witness_min_eig;
  return j;
}

Certificates cert_from_json(const json& j) {
  Certificates c;
  c.inner_a_min = j.at("inner_a_min").get<double>();
  c.inner_a_max = j.at("inner_a_max").get<double>();
  c.inner_b_norm = j.at("inner_b_norm").get<double>();
  c.outer_joint_norm = j.at("outer_joint_norm").get<double>();
  c.required_m = j.at("required_m").get<double>();
  c.witness_min_eig = j.at("witness_min_eig").get<double>();
  return c;
}

}  // namespace

json matrix_to_json(const Matrix& m) {
  json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  json data = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  j["data"] = std::move(data);
  return j;
}

Matrix matrix_from_json(const json& j) {
  const Index rows = j.at("rows").get<Index>();
  const Index cols = j.at("cols").get<Index>();
  const json& data = j.at("data");
  check_config(rows >= 0 && cols >= 0, "matrix shape must be nonnegative");
  check_config(static_cast<Index>(data.size()) == rows * cols,
               "matrix data length does not match shape");
  Matrix m(rows, cols);
  Index i = 0;
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) m(r, c) = data[i++].get<double>();
  }
  return m;
}

json vector_to_json(const Vector& v) {
  json data = json::array();
  for (Index i = 0; i < v.size(); ++i) data.push_back(v(i));
  return data;
}

Vector vector_from_json(const json& j) {
  check_config(j.is_array(), "vector must be a JSON array");
  Vector v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

json spec_to_json(const TaskFamilySpec& spec) {
  json j;
  j["geometry"] = to_string(spec.geometry);
  j["mu"] = spec.mu;
  j["smoothness_L"] = spec.smoothness_L;
  j["lipschitz_M"] = spec.lipschitz_M;
  j["rho"] = spec.rho;
  j["tau"] = spec.tau;
  j["n_w"] = spec.n_w;
  j["n_phi"] = spec.n_phi;
  j["seed"] = spec.seed;
  j["nonconvexity_amplitude"] = spec.nonconvexity_amplitude;
  j["operating_radius"] = spec.operating_radius;
  return j;
}

TaskFamilySpec spec_from_json(const json& j) {
  try {
    TaskFamilySpec spec;
    spec.geometry = geometry_from_string(j.at("geometry").get<std::string>());
    spec.mu = j.at("mu").get<double>();
    spec.smoothness_L = j.at("smoothness_L").get<double>();
    spec.lipschitz_M = j.at("lipschitz_M").get<double>();
    spec.n_w = j.at("n_w").get<Index>();
    spec.n_phi = j.at("n_phi").get<Index>();
    spec.rho = j.value("rho", spec.rho);
    spec.tau = j.value("tau", spec.tau);
    spec.seed = j.value("seed", spec.seed);
    spec.nonconvexity_amplitude = j.value("nonconvexity_amplitude", spec.nonconvexity_amplitude);
    spec.operating_radius = j.value("operating_radius", spec.operating_radius);
    return spec;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed family spec: ") + e.what());
  }
}

json task_to_json(const TaskInstance& t) {
  json j;
  j["task_id"] = t.task_id;
  j["geometry"] = to_string(t.geometry);
  j["mu"] = t.mu;
  j["smoothness_L"] = t.smoothness_L;
  j["inner"] = loss_to_json(t.inner);
  j["outer"] = loss_to_json(t.outer);
  j["cert"] = cert_to_json(t.cert);
  return j;
}

TaskInstance task_from_json(const json& j) {
  try {
    TaskInstance t;
    t.task_id = j.at("task_id").get<std::int64_t>();
    t.geometry = geometry_from_string(j.at("geometry").get<std::string>());
    t.mu = j.at("mu").get<double>();
    t.smoothness_L = j.at("smoothness_L").get<double>();
    t.inner = loss_from_json(j.at("inner"));
    t.outer = loss_from_json(j.at("outer"));
    t.cert = cert_from_json(j.at("cert"));
    return t;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed task: ") + e.what());
  }
}

json pool_to_json(const std::vector<TaskInstance>& pool) {
  json j;
  j["format_version"] = kFormatVersion;
  json tasks = json::array();
  for (const TaskInstance& t : pool) tasks.push_back(task_to_json(t));
  j["tasks"] = std::move(tasks);
  return j;
}

std::vector<TaskInstance> pool_from_json(const json& j) {
  try {
    const int version = j.at("format_version").get<int>();
    check_config(version == kFormatVersion, "unsupported format_version");
    std::vector<TaskInstance> pool;
    for (const json& t : j.at("tasks")) pool.push_back(task_from_json(t));
    return pool;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed task pool: ") + e.what());
  }
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string content_hash_hex(std::string_view data) {
  static const char* kHex = "0123456789abcdef";
  std::uint64_t h = fnv1a64(data);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kHex[h & 0xF];
    h >>= 4;
  }
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  out << content;
  if (!out) throw std::runtime_error("failed writing file: " + path);
}

}  // namespace anil
