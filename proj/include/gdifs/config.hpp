#pragma once

// JSON system configs ("v1"). Every error names the JSON pointer of the
// offending field.

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "gdifs/graph.hpp"
#include "gdifs/sft.hpp"

namespace gdifs {

using Json = nlohmann::json;

struct SystemConfig {
  std::string kind;  // "gdifs" or "sft"
  int dim = 0;
  GdIfs graph;
  std::optional<SftSystem> sft;
  std::string source_text;  // canonical dump, hashed into certificates
};

namespace detail {

[[noreturn]] inline void config_error(const std::string& where, const std::string& what) {
  throw InputError("config " + (where.empty() ? std::string("/") : where) + ": " + what);
}

inline const Json& field(const Json& obj, const std::string& where, const char* key) {
  if (!obj.is_object()) config_error(where, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) config_error(where + "/" + key, "missing field");
  return *it;
}

inline double number(const Json& v, const std::string& where) {
  if (!v.is_number()) config_error(where, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) config_error(where, "must be finite");
  return x;
}

inline int integer(const Json& v, const std::string& where) {
  if (!v.is_number_integer()) config_error(where, "expected an integer");
  return v.get<int>();
}

inline Vec vector_of(const Json& v, const std::string& where, int d) {
  if (!v.is_array() || static_cast<int>(v.size()) != d)
    config_error(where, "expected an array of " + std::to_string(d) + " numbers");
  Vec out(d);
  for (int i = 0; i < d; ++i) out(i) = number(v[static_cast<size_t>(i)], where + "/" + std::to_string(i));
  return out;
}

inline OrthogonalTransform rotation_of(const Json& v, const std::string& where, int d) {
  try {
    if (v.is_array()) {
      if (static_cast<int>(v.size()) != d) config_error(where, "expected " + std::to_string(d) + " rows");
      Mat m(d, d);
      for (int r = 0; r < d; ++r) {
        const std::string row = where + "/" + std::to_string(r);
        const Vec x = vector_of(v[static_cast<size_t>(r)], row, d);
        m.row(r) = x.transpose();
      }
      // Written-out matrices must already be orthogonal up to rounding; a
      // grossly non-orthogonal entry is a typo, not something to project away.
      if (detail::op_norm(m.transpose() * m - Mat::Identity(d, d)) > 1e-6)
        config_error(where, "matrix is not orthogonal (|Q^T Q - I| > 1e-6)");
      return OrthogonalTransform(m);
    }
    if (!v.is_object()) config_error(where, "expected a matrix or an object");
    if (v.contains("axis")) {
      if (d != 3) config_error(where + "/axis", "axis-angle form needs dimension 3");
      return OrthogonalTransform::axis_angle(vector_of(v["axis"], where + "/axis", 3),
                                             number(field(v, where, "angle"), where + "/angle"));
    }
    const bool reflect = v.contains("reflect") ? v["reflect"].is_boolean() && v["reflect"].get<bool>() : false;
    if (v.contains("reflect") && !v["reflect"].is_boolean()) config_error(where + "/reflect", "expected a boolean");
    if (d == 1) {
      if (v.contains("angle")) config_error(where + "/angle", "angles need dimension 2");
      Mat m(1, 1);
      m(0, 0) = reflect ? -1.0 : 1.0;
      return OrthogonalTransform(m);
    }
    if (d != 2) config_error(where, "angle form needs dimension 2");
    return OrthogonalTransform::planar(number(field(v, where, "angle"), where + "/angle"), reflect);
  } catch (const InputError& e) {
    const std::string msg = e.what();
    if (msg.rfind("config ", 0) == 0) throw;
    config_error(where, msg);
  }
}

inline Similarity similarity_of(const Json& v, const std::string& where, int d) {
  const double r = number(field(v, where, "ratio"), where + "/ratio");
  if (!(r > 0.0 && r < 1.0)) config_error(where + "/ratio", "must lie in (0,1)");
  const OrthogonalTransform t =
      v.contains("rotation") ? rotation_of(v["rotation"], where + "/rotation", d) : OrthogonalTransform::identity(d);
  const Vec x = vector_of(field(v, where, "translation"), where + "/translation", d);
  return Similarity(r, t, x);
}

}  // namespace detail

inline SystemConfig parse_config(const Json& j) {
  using namespace detail;
  if (!j.is_object()) config_error("", "expected an object");
  if (j.contains("version")) {
    const Json& v = j["version"];
    const bool ok = (v.is_number_integer() && v.get<int>() == 1) || (v.is_string() && v.get<std::string>() == "v1");
    if (!ok) config_error("/version", "unsupported version (expected 1 or \"v1\")");
  }
  const Json& kind = field(j, "", "kind");
  if (!kind.is_string()) config_error("/kind", "expected a string");
  const int d = integer(field(j, "", "dim"), "/dim");
  if (d < 1) config_error("/dim", "must be >= 1");
  if (j.contains("tolerances") && !j["tolerances"].is_object()) config_error("/tolerances", "expected an object");

  const std::string k = kind.get<std::string>();
  if (k == "gdifs") {
    const int q = integer(field(j, "", "vertices"), "/vertices");
    if (q < 1) config_error("/vertices", "must be >= 1");
    const Json& edges = field(j, "", "edges");
    if (!edges.is_array() || edges.empty()) config_error("/edges", "expected a nonempty array");
    std::vector<Edge> out;
    for (size_t i = 0; i < edges.size(); ++i) {
      const std::string at = "/edges/" + std::to_string(i);
      const int from = integer(field(edges[i], at, "from"), at + "/from");
      const int to = integer(field(edges[i], at, "to"), at + "/to");
      if (from < 0 || from >= q) config_error(at + "/from", "vertex out of range");
      if (to < 0 || to >= q) config_error(at + "/to", "vertex out of range");
      out.push_back({from, to, similarity_of(field(edges[i], at, "map"), at + "/map", d)});
    }
    try {
      return {k, d, GdIfs(q, std::move(out)), std::nullopt, j.dump()};
    } catch (const InputError& e) {
      config_error("/edges", e.what());
    }
  }
  if (k == "sft") {
    const Json& mat = field(j, "", "matrix");
    if (!mat.is_array() || mat.empty()) config_error("/matrix", "expected a nonempty square array");
    TransitionMatrix a;
    for (size_t r = 0; r < mat.size(); ++r) {
      const std::string at = "/matrix/" + std::to_string(r);
      if (!mat[r].is_array() || mat[r].size() != mat.size()) config_error(at, "row length must equal the row count");
      std::vector<int> row;
      for (size_t c = 0; c < mat[r].size(); ++c) {
        const int v = integer(mat[r][c], at + "/" + std::to_string(c));
        if (v != 0 && v != 1) config_error(at + "/" + std::to_string(c), "entries must be 0 or 1");
        row.push_back(v);
      }
      a.push_back(std::move(row));
    }
    if (j.contains("alphabet")) {
      const Json& al = j["alphabet"];
      const size_t size = al.is_array() ? al.size() : al.is_number_integer() ? al.get<size_t>() : 0;
      if (size != a.size()) config_error("/alphabet", "size must match the transition matrix");
    }
    const Json& maps = field(j, "", "maps");
    if (!maps.is_array() || maps.size() != a.size()) config_error("/maps", "need one map per symbol");
    std::vector<Similarity> sims;
    for (size_t i = 0; i < maps.size(); ++i) sims.push_back(similarity_of(maps[i], "/maps/" + std::to_string(i), d));
    try {
      SftSystem s(std::move(a), std::move(sims));
      GdIfs g = to_gdifs(s);
      return {k, d, std::move(g), std::move(s), j.dump()};
    } catch (const InputError& e) {
      config_error("/matrix", e.what());
    }
  }
  config_error("/kind", "must be \"gdifs\" or \"sft\"");
}

inline SystemConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw InputError("config " + path + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

/// 64-bit FNV-1a as 16 hex digits.
inline std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

}  // namespace gdifs
