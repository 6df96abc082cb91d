#pragma once

// Extraction certificates: JSON form and independent re-verification.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gdifs/approximator.hpp"
#include "gdifs/config.hpp"

namespace gdifs {

struct MapRecord {
  double ratio = 0.0;
  Mat rotation;
  Vec translation;
  std::vector<EdgeId> edges;
};

struct CertificateData {
  int version = 1;
  std::string input_hash;
  std::string mode;
  VertexId j = 0;
  double epsilon = 0.0;
  int max_depth = 0;
  size_t group_budget = 4096;
  std::vector<MapRecord> maps;
  DimensionResult achieved;
  DimensionResult reference;
  bool partial = false;
  SeparationCertificate separation;
  GroupReport group;
  std::optional<double> uniform_ratio;
  int power_floor = 0;
  std::vector<long> powers;
  std::vector<CoveringStep> covering;
  int class_length = 0;
  std::map<std::string, double> timings;
};

inline CertificateData make_certificate(const Extraction& ex, const SystemConfig& cfg, const ExtractionOptions& opt,
                                        std::map<std::string, double> timings = {}) {
  const auto& c = ex.certificate;
  CertificateData out;
  out.input_hash = fnv1a_hex(cfg.source_text);
  out.mode = mode_name(c.group.mode);
  out.j = c.vertex;
  out.epsilon = c.epsilon;
  out.max_depth = opt.max_depth;
  out.group_budget = opt.group_budget;
  for (size_t i = 0; i < ex.system.size(); ++i) {
    const Similarity& m = ex.system.maps[i];
    out.maps.push_back({m.ratio(), m.rotation().matrix(), m.translation(), ex.system.provenance[i].edges()});
  }
  out.achieved = c.achieved;
  out.reference = c.reference;
  out.partial = c.partial;
  out.separation = c.separation;
  out.group = c.group;
  out.uniform_ratio = c.uniform_ratio;
  out.power_floor = c.power_floor;
  out.powers = c.powers;
  out.covering = c.covering;
  out.class_length = c.class_length;
  out.timings = std::move(timings);
  return out;
}

namespace detail {

inline Json number_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

inline double number_from(const Json& v, const std::string& where) {
  if (v.is_null()) return std::numeric_limits<double>::infinity();
  if (!v.is_number()) throw InputError("certificate " + where + ": expected a number");
  return v.get<double>();
}

inline Json matrix_json(const Mat& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Json vector_json(const Vec& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline Mat matrix_from(const Json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) throw InputError("certificate " + where + ": expected a square matrix");
  const auto n = static_cast<Eigen::Index>(v.size());
  Mat m(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Json& row = v[static_cast<size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n)
      throw InputError("certificate " + where + ": expected a square matrix");
    for (Eigen::Index c = 0; c < n; ++c) m(r, c) = number_from(row[static_cast<size_t>(c)], where);
  }
  return m;
}

inline Vec vector_from(const Json& v, const std::string& where) {
  if (!v.is_array()) throw InputError("certificate " + where + ": expected an array");
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = number_from(v[i], where);
  return out;
}

inline Json dimension_json(const DimensionResult& d) {
  return {{"value", d.value}, {"lo", d.lo}, {"hi", d.hi}, {"method", to_string(d.method)}};
}

inline DimensionResult dimension_from(const Json& v, const std::string& where) {
  DimensionResult d;
  d.value = number_from(v.at("value"), where);
  d.lo = number_from(v.at("lo"), where);
  d.hi = number_from(v.at("hi"), where);
  const std::string m = v.at("method").get<std::string>();
  if (m == "scalar_moran") d.method = DimensionMethod::scalar_moran;
  else if (m == "spectral_radius") d.method = DimensionMethod::spectral_radius;
  else if (m == "box_counting") d.method = DimensionMethod::box_counting;
  else throw InputError("certificate " + where + ": unknown method " + m);
  return d;
}

inline GroupMode group_mode_from(const std::string& s) {
  for (GroupMode m : {GroupMode::dense_subgroup, GroupMode::epsilon_close, GroupMode::exact, GroupMode::planar_so2})
    if (s == mode_name(m) || s == to_string(m)) return m;
  throw InputError("certificate: unknown mode " + s);
}

}  // namespace detail

inline Json to_json(const CertificateData& c) {
  using namespace detail;
  Json maps = Json::array();
  for (const auto& m : c.maps)
    maps.push_back({{"ratio", m.ratio},
                    {"rotation", matrix_json(m.rotation)},
                    {"translation", vector_json(m.translation)},
                    {"provenance_edges", m.edges}});
  Json pairs = Json::array();
  for (const auto& p : c.separation.pairs) pairs.push_back({{"pair", {p.a, p.b}}, {"gap", p.gap}});
  const GroupReport& g = c.group;
  Json group = {{"mode", to_string(g.mode)},
                {"target", g.target ? matrix_json(g.target->matrix()) : Json(nullptr)},
                {"resolution", g.resolution},
                {"reference_net_size", g.reference_net_size},
                {"reference_finite", g.reference_finite},
                {"reference_truncated", g.reference_truncated},
                {"output_net_size", g.output_net_size},
                {"output_finite", g.output_finite},
                {"coverage_distance", g.coverage_distance},
                {"target_distance", g.target_distance},
                {"group_gap", number_or_null(g.group_gap)},
                {"snap_radius", g.snap_radius},
                {"heuristic", g.heuristic},
                {"sampled", g.sampled},
                {"density", g.reference_finite ? "exact finite group" : "verified to resolution"}};
  Json covering = Json::array();
  for (const auto& s : c.covering)
    covering.push_back({{"delta", s.delta},
                        {"selected", s.selected},
                        {"dimension", s.dimension},
                        {"lower_bound", std::isnan(s.lower_bound) ? Json(nullptr) : Json(s.lower_bound)}});
  return {{"version", c.version},
          {"input_hash", c.input_hash},
          {"mode", c.mode},
          {"j", c.j},
          {"epsilon", c.epsilon},
          {"max_depth", c.max_depth},
          {"group_budget", c.group_budget},
          {"ssifs", std::move(maps)},
          {"achieved_dimension", dimension_json(c.achieved)},
          {"reference_dimension", dimension_json(c.reference)},
          {"partial", c.partial},
          {"separation", std::move(pairs)},
          {"ssc",
           {{"ball_center", vector_json(c.separation.ball.center)},
            {"ball_radius", c.separation.ball.radius},
            {"min_gap", c.separation.min_gap},
            {"cutoff", c.separation.cutoff},
            {"refinement_depth", c.separation.refinement_depth}}},
          {"group_report", std::move(group)},
          {"construction",
           {{"uniform_ratio", c.uniform_ratio ? Json(*c.uniform_ratio) : Json(nullptr)},
            {"power_floor", c.power_floor},
            {"powers", c.powers},
            {"covering", std::move(covering)},
            {"class_length", c.class_length}}},
          {"timings", c.timings}};
}

inline CertificateData certificate_from_json(const Json& j) {
  using namespace detail;
  try {
    CertificateData c;
    c.version = j.at("version").get<int>();
    if (c.version != 1) throw InputError("certificate: unsupported version");
    c.input_hash = j.at("input_hash").get<std::string>();
    c.mode = j.at("mode").get<std::string>();
    c.j = j.at("j").get<int>();
    c.epsilon = number_from(j.at("epsilon"), "/epsilon");
    c.max_depth = j.at("max_depth").get<int>();
    c.group_budget = j.at("group_budget").get<size_t>();
    for (const auto& m : j.at("ssifs")) {
      c.maps.push_back({number_from(m.at("ratio"), "/ssifs/ratio"), matrix_from(m.at("rotation"), "/ssifs/rotation"),
                        vector_from(m.at("translation"), "/ssifs/translation"),
                        m.at("provenance_edges").get<std::vector<EdgeId>>()});
    }
    c.achieved = dimension_from(j.at("achieved_dimension"), "/achieved_dimension");
    c.reference = dimension_from(j.at("reference_dimension"), "/reference_dimension");
    c.partial = j.at("partial").get<bool>();
    for (const auto& p : j.at("separation")) {
      const auto ab = p.at("pair").get<std::vector<int>>();
      if (ab.size() != 2) throw InputError("certificate /separation: pair needs two indices");
      c.separation.pairs.push_back({ab[0], ab[1], number_from(p.at("gap"), "/separation/gap")});
    }
    const Json& ssc = j.at("ssc");
    c.separation.ball.center = vector_from(ssc.at("ball_center"), "/ssc/ball_center");
    c.separation.ball.radius = number_from(ssc.at("ball_radius"), "/ssc/ball_radius");
    c.separation.min_gap = number_from(ssc.at("min_gap"), "/ssc/min_gap");
    c.separation.cutoff = number_from(ssc.at("cutoff"), "/ssc/cutoff");
    c.separation.refinement_depth = ssc.at("refinement_depth").get<int>();
    const Json& g = j.at("group_report");
    c.group.mode = group_mode_from(g.at("mode").get<std::string>());
    if (!g.at("target").is_null()) c.group.target = OrthogonalTransform(matrix_from(g.at("target"), "/group_report/target"));
    c.group.resolution = number_from(g.at("resolution"), "/group_report/resolution");
    c.group.reference_net_size = g.at("reference_net_size").get<size_t>();
    c.group.reference_finite = g.at("reference_finite").get<bool>();
    c.group.reference_truncated = g.at("reference_truncated").get<bool>();
    c.group.output_net_size = g.at("output_net_size").get<size_t>();
    c.group.output_finite = g.at("output_finite").get<bool>();
    c.group.coverage_distance = number_from(g.at("coverage_distance"), "/group_report/coverage_distance");
    c.group.target_distance = number_from(g.at("target_distance"), "/group_report/target_distance");
    c.group.group_gap = number_from(g.at("group_gap"), "/group_report/group_gap");
    c.group.snap_radius = number_from(g.at("snap_radius"), "/group_report/snap_radius");
    c.group.heuristic = g.at("heuristic").get<bool>();
    c.group.sampled = g.at("sampled").get<bool>();
    const Json& k = j.at("construction");
    if (!k.at("uniform_ratio").is_null()) c.uniform_ratio = number_from(k.at("uniform_ratio"), "/construction/uniform_ratio");
    c.power_floor = k.at("power_floor").get<int>();
    c.powers = k.at("powers").get<std::vector<long>>();
    for (const auto& s : k.at("covering")) {
      CoveringStep step;
      step.delta = number_from(s.at("delta"), "/construction/covering/delta");
      step.selected = s.at("selected").get<size_t>();
      step.dimension = number_from(s.at("dimension"), "/construction/covering/dimension");
      if (!s.at("lower_bound").is_null()) step.lower_bound = s.at("lower_bound").get<double>();
      c.covering.push_back(step);
    }
    c.class_length = k.at("class_length").get<int>();
    c.timings = j.at("timings").get<std::map<std::string, double>>();
    return c;
  } catch (const Json::exception& e) {
    throw InputError(std::string("certificate is malformed: ") + e.what());
  }
}

struct VerifyReport {
  bool ok = true;
  std::string failed_check;  // first failing check
  std::string message;
  std::vector<std::string> passed;
};

namespace detail {

struct CheckFailed {
  std::string message;
};

[[noreturn]] inline void fail(std::string message) { throw CheckFailed{std::move(message)}; }

inline std::string at_map(size_t i) { return "map " + std::to_string(i) + ": "; }

}  // namespace detail

/// Checks in order: hash, provenance, separation, dimension, group. Stops at
/// the first failure.
inline VerifyReport verify_certificate(const CertificateData& c, const SystemConfig& cfg) {
  using detail::fail;
  VerifyReport rep;
  const GdIfs& g = cfg.graph;
  const int d = g.ambient_dim();
  std::vector<EdgePath> paths;
  std::optional<SystemContext> ctx;

  auto run = [&](const std::string& name, auto&& body) {
    if (!rep.ok) return;
    try {
      body();
      rep.passed.push_back(name);
    } catch (const detail::CheckFailed& f) {
      rep.ok = false;
      rep.failed_check = name;
      rep.message = f.message;
    } catch (const InputError& e) {
      rep.ok = false;
      rep.failed_check = name;
      rep.message = e.what();
    }
  };

  run("hash", [&] {
    if (c.input_hash != fnv1a_hex(cfg.source_text)) fail("input hash does not match the config");
  });

  run("provenance", [&] {
    if (c.maps.empty()) fail("no maps");
    if (c.j < 0 || c.j >= g.vertex_count()) fail("vertex out of range");
    for (size_t i = 0; i < c.maps.size(); ++i) {
      const MapRecord& m = c.maps[i];
      const EdgePath p = EdgePath::from_edges(g, m.edges);
      if (!p.is_cycle() || p.source() != c.j) fail(detail::at_map(i) + "provenance is not a cycle at the vertex");
      const Similarity& s = p.composite();
      if (m.rotation.rows() != d || m.translation.size() != d) fail(detail::at_map(i) + "wrong dimension");
      if (std::abs(m.ratio - s.ratio()) > 1e-10 * s.ratio())
        fail(detail::at_map(i) + "ratio differs from the recomposed path");
      if ((m.translation - s.translation()).norm() > 1e-10 * (1.0 + s.translation().norm()))
        fail(detail::at_map(i) + "translation differs from the recomposed path");
      // Rotations may have been snapped, but never further than the snap radius.
      const double rot = detail::op_norm(m.rotation - s.rotation().matrix());
      if (rot > std::max(1e-10, c.group.snap_radius)) fail(detail::at_map(i) + "rotation differs from the recomposed path");
      paths.push_back(p);
    }
  });

  run("separation", [&] {
    ctx = SystemContext::make(g);
    const Ball& ball = ctx->enclosure.at(c.j);
    const Ball& listed = c.separation.ball;
    if (listed.center.size() != d || (listed.center - ball.center).norm() > 1e-9 * (1.0 + ball.radius) ||
        std::abs(listed.radius - ball.radius) > 1e-9 * ball.radius)
      fail("enclosure ball does not match the recomputed one");
    std::vector<Similarity> maps;
    for (const auto& p : paths) maps.push_back(p.composite());
    if (!ball_invariant_under(ball, maps, 1e-9 * ball.radius)) fail("enclosure ball is not invariant");
    const double cutoff = detail::image_radius_cutoff(maps, ball);
    if (std::abs(cutoff - c.separation.cutoff) > 1e-12 * (1.0 + cutoff)) fail("cutoff does not match");
    const SscResult res = verify_ssc(g, ctx->enclosure, paths, c.max_depth);
    if (!res.certificate) fail("subsystem is not strongly separated at the recorded depth");
    const double slack = 1e-12 * (1.0 + ball.radius);
    if (c.separation.min_gap > res.certificate->min_gap + slack) fail("minimum gap exceeds the recomputed one");
    for (const auto& pg : c.separation.pairs) {
      if (pg.a < 0 || pg.b < 0 || pg.a >= static_cast<int>(paths.size()) || pg.b >= static_cast<int>(paths.size()) ||
          pg.a == pg.b)
        fail("pair index out of range");
      const size_t a = static_cast<size_t>(pg.a), b = static_cast<size_t>(pg.b);
      double gap = (maps[a].apply(ball.center) - maps[b].apply(ball.center)).norm() -
                   (maps[a].ratio() + maps[b].ratio()) * ball.radius;
      if (gap + slack < pg.gap) {
        const DisjointnessResult r = cylinders_disjoint(g, paths[a], paths[b], ctx->enclosure, c.max_depth);
        if (r.verdict == Verdict::disjoint) gap = std::max(gap, r.gap);
      }
      if (gap + slack < pg.gap)
        fail("gap of pair (" + std::to_string(pg.a) + "," + std::to_string(pg.b) + ") exceeds the recomputed bound");
      if (pg.gap + slack < c.separation.min_gap) fail("minimum gap exceeds a listed pair gap");
    }
  });

  run("dimension", [&] {
    std::vector<double> ratios;
    for (const auto& m : c.maps) ratios.push_back(m.ratio);
    const DimensionResult ach = similarity_dimension(ratios);
    if (std::abs(ach.value - c.achieved.value) > 1e-10) fail("achieved dimension does not match the ratios");
    if (std::abs(ctx->reference.value - c.reference.value) > 1e-9) fail("reference dimension does not match");
    if (ach.value > ctx->reference.value + 1e-8) fail("achieved dimension exceeds the reference");
    const bool floor = ach.value > ctx->reference.value - c.epsilon;
    if (floor == c.partial) fail(c.partial ? "certificate is marked partial but meets the floor"
                                           : "achieved dimension is below reference - epsilon");
  });

  run("group", [&] {
    const GroupMode mode = detail::group_mode_from(c.mode);
    if (mode != c.group.mode) fail("mode does not match the group report");
    SsIfs sys;
    for (const auto& p : paths) sys.push(p);
    ExtractionOptions opt;
    opt.group_budget = c.group_budget;
    GroupReport fresh;
    detail::fill_group_report(fresh, g, c.j, sys, c.epsilon, opt);
    if (fresh.reference_net_size != c.group.reference_net_size || fresh.output_net_size != c.group.output_net_size ||
        fresh.reference_finite != c.group.reference_finite || fresh.output_finite != c.group.output_finite)
      fail("group nets do not match the recomputed ones");
    if (std::abs(fresh.coverage_distance - c.group.coverage_distance) > 1e-9) fail("coverage distance does not match");

    auto rotation = [&](size_t i) { return OrthogonalTransform(c.maps[i].rotation); };
    if (mode == GroupMode::epsilon_close || mode == GroupMode::exact || mode == GroupMode::planar_so2) {
      for (size_t i = 1; i < c.maps.size(); ++i)
        if (c.maps[i].ratio != c.maps[0].ratio) fail(detail::at_map(i) + "ratio is not uniform");
      // Equal ratios must come from equal factor multisets.
      auto factors = [&](size_t i) {
        std::vector<double> f;
        for (EdgeId e : c.maps[i].edges) f.push_back(g.edge(e).map.ratio());
        std::sort(f.begin(), f.end());
        return f;
      };
      const auto f0 = factors(0);
      for (size_t i = 1; i < c.maps.size(); ++i)
        if (factors(i) != f0) fail(detail::at_map(i) + "ratio factors differ");
    }
    if (mode == GroupMode::epsilon_close) {
      if (!c.group.target) fail("uniform certificate has no target");
      double worst = 0.0;
      for (size_t i = 0; i < c.maps.size(); ++i) worst = std::max(worst, operator_distance(rotation(i), *c.group.target));
      if (!(worst < c.epsilon)) fail("a transform is not within epsilon of the target");
    }
    if (mode == GroupMode::exact || mode == GroupMode::planar_so2) {
      if (!c.group.target) fail("certificate has no common transform");
      for (size_t i = 0; i < c.maps.size(); ++i)
        if (c.maps[i].rotation != c.group.target->matrix()) fail(detail::at_map(i) + "transform differs from the target");
    }
    if (mode == GroupMode::exact || (mode == GroupMode::planar_so2 && fresh.reference_finite)) {
      if (!fresh.reference_finite) fail("group is not finite");
      if (!(c.group.snap_radius <= 0.5 * fresh.group_gap + 1e-12)) fail("snap radius exceeds half the group gap");
      const EpsilonNet net = group_closure(generator_cycles(g, c.j).transforms, d, c.epsilon, c.group_budget);
      if (net.distance_to(*c.group.target) > 1e-8) fail("target is not a group element");
    }
    if (mode == GroupMode::planar_so2) {
      if (d != 2) fail("planar certificate outside the plane");
      if (std::abs(c.group.target->determinant() - 1.0) > 1e-9) fail("common transform reverses orientation");
      if (!fresh.reference_finite && rotation_order(*c.group.target, 10'000).finite)
        fail("common rotation has finite order");
    }
  });
  return rep;
}

}  // namespace gdifs
