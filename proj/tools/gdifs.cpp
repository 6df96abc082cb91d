// gdifs command-line front end.
//
// Exit codes: 0 ok, 1 input error, 2 graph not strongly connected,
// 3 precondition failure, 4 verification failure.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "gdifs/gdifs.hpp"

namespace {

using namespace gdifs;

constexpr int kOk = 0, kInput = 1, kDisconnected = 2, kPrecondition = 3, kVerify = 4;

OrthogonalTransform parse_rotation(const std::string& spec, int d) {
  Json j;
  try {
    j = Json::parse(spec);
  } catch (const Json::parse_error&) {
    throw InputError("--target-rotation: not valid JSON: " + spec);
  }
  // A bare number is a planar angle in radians.
  if (j.is_number()) {
    if (d != 2) throw InputError("--target-rotation: a bare angle needs dimension 2");
    return OrthogonalTransform::planar(j.get<double>());
  }
  return detail::rotation_of(j, "--target-rotation", d);
}

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw InputError(path + " is not valid JSON: " + e.what());
  }
}

void print_dimension(const char* label, const DimensionResult& d) {
  std::printf("%s %.12f  bracket [%.12f, %.12f]  method %s\n", label, d.value, d.lo, d.hi, to_string(d.method));
}

int cmd_dim(const std::string& config_path, std::optional<int> vertex) {
  const SystemConfig cfg = load_config(config_path);
  const GdIfs& g = cfg.graph;
  require_strongly_connected(g);
  if (g.vertex_count() == 1) {
    std::vector<double> r;
    for (const auto& e : g.edges()) r.push_back(e.map.ratio());
    print_dimension("dimension", similarity_dimension(r));
  } else {
    print_dimension("dimension", mauldin_williams_dimension(g));
  }
  if (vertex) {
    if (*vertex < 0 || *vertex >= g.vertex_count()) throw InputError("--vertex out of range");
    print_dimension("vertex", vertex_dimension(g, *vertex));
  }
  return kOk;
}

struct ApproxArgs {
  std::string config, out, mode = "dense";
  std::optional<std::string> target;
  int vertex = 0;
  double epsilon = 0.1;
  std::uint64_t seed = ExtractionOptions{}.seed;
  int max_depth = ExtractionOptions{}.max_depth;
  size_t word_budget = ExtractionOptions{}.word_budget;
};

int cmd_approximate(const ApproxArgs& a) {
  const SystemConfig cfg = load_config(a.config);
  const GdIfs& g = cfg.graph;
  if (a.vertex < 0 || a.vertex >= g.vertex_count()) throw InputError("--vertex out of range");
  ExtractionOptions opt;
  opt.seed = a.seed;
  opt.max_depth = a.max_depth;
  opt.word_budget = a.word_budget;
  const auto t0 = std::chrono::steady_clock::now();
  const SystemContext ctx = SystemContext::make(g);
  Extraction ex;
  if (a.mode == "dense") {
    ex = extract_dense_group(ctx, a.vertex, a.epsilon, opt);
  } else if (a.mode == "uniform" || a.mode == "exact") {
    if (!a.target) throw InputError("--mode " + a.mode + " needs --target-rotation");
    const OrthogonalTransform t = parse_rotation(*a.target, g.ambient_dim());
    ex = a.mode == "uniform" ? extract_uniform(ctx, a.vertex, a.epsilon, t, opt)
                             : extract_exact_finite(ctx, a.vertex, a.epsilon, t, opt);
  } else if (a.mode == "planar") {
    ex = extract_planar(ctx, a.vertex, a.epsilon, opt);
  } else {
    throw InputError("--mode must be dense, uniform, exact or planar");
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const CertificateData cert = make_certificate(ex, cfg, opt, {{"extraction_seconds", seconds}});
  write_file_atomic(a.out, to_json(cert).dump(2) + "\n");

  const auto& c = ex.certificate;
  std::printf("mode %s  vertex %d  epsilon %g\n", cert.mode.c_str(), a.vertex, a.epsilon);
  std::printf("maps %zu  achieved %.9f  reference %.9f  floor %.9f\n", ex.system.size(), c.achieved.value,
              c.reference.value, c.reference.value - a.epsilon);
  std::printf("min gap %.3e  depth %d  group net %zu/%zu  coverage %.3e\n", c.separation.min_gap,
              c.separation.refinement_depth, c.group.output_net_size, c.group.reference_net_size,
              c.group.coverage_distance);
  if (c.group.target) std::printf("target distance %.3e\n", c.group.target_distance);
  std::printf("certificate %s\n", a.out.c_str());

  const VerifyReport rep = verify_certificate(cert, cfg);
  if (!rep.ok) {
    std::fprintf(stderr, "post-hoc check failed at %s: %s\n", rep.failed_check.c_str(), rep.message.c_str());
    return kVerify;
  }
  if (c.partial) {
    std::fprintf(stderr, "dimension floor not reached within the budgets (partial certificate)\n");
    return kVerify;
  }
  return kOk;
}

int cmd_verify(const std::string& config_path, const std::string& cert_path) {
  const SystemConfig cfg = load_config(config_path);
  const CertificateData cert = certificate_from_json(read_json(cert_path));
  const VerifyReport rep = verify_certificate(cert, cfg);
  for (const auto& name : rep.passed) std::printf("ok   %s\n", name.c_str());
  if (!rep.ok) {
    std::printf("FAIL %s: %s\n", rep.failed_check.c_str(), rep.message.c_str());
    return kVerify;
  }
  if (cert.partial) std::printf("note: certificate is partial (dimension floor not reached)\n");
  return kOk;
}

int cmd_render(const std::string& config_path, const RenderSpec& spec, const std::string& out,
               const std::optional<std::string>& cert_path) {
  const SystemConfig cfg = load_config(config_path);
  std::vector<Similarity> overlay;
  if (cert_path) {
    const CertificateData cert = certificate_from_json(read_json(*cert_path));
    for (const auto& m : cert.maps) overlay.emplace_back(m.ratio, OrthogonalTransform(m.rotation), m.translation);
  }
  write_file_atomic(out, encode_p6(render(cfg.graph, spec, overlay)));
  std::printf("wrote %s (%dx%d, %ld iterations)\n", out.c_str(), spec.width, spec.height, spec.iterations);
  return kOk;
}

int cmd_log_ratio(const std::string& a, const std::string& b, int ja, int jb, int max_length) {
  const SystemConfig ca = load_config(a), cb = load_config(b);
  const LogRatioReport rep = log_ratio_check(ca.graph, ja, cb.graph, jb, max_length);
  for (const auto& p : rep.pairs) {
    std::printf("%-8s quotient %.15g", p.flagged() ? "FLAG" : "rational", p.quotient);
    if (p.rational) std::printf("  = %ld/%ld", p.rational->p, p.rational->q);
    std::printf("\n");
  }
  std::printf("%zu of %zu pairs far from rationals with denominator <= 10000 (indication only, not a proof)\n",
              rep.flagged, rep.pairs.size());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-directed IFS dimensions and certified self-similar subsystems"};
  app.require_subcommand(1);

  std::string config;
  std::optional<int> dim_vertex;
  auto* dim = app.add_subcommand("dim", "Print the attractor dimension");
  dim->add_option("--config", config, "system config (JSON)")->required();
  dim->add_option("--vertex", dim_vertex, "also print the dimension seen from this vertex");

  ApproxArgs ax;
  auto* approx = app.add_subcommand("approximate", "Extract a certified SSC subsystem");
  approx->add_option("--config", ax.config, "system config (JSON)")->required();
  approx->add_option("--vertex", ax.vertex, "vertex j");
  approx->add_option("--epsilon", ax.epsilon, "dimension tolerance")->required();
  approx->add_option("--mode", ax.mode, "dense | uniform | exact | planar");
  approx->add_option("--target-rotation", ax.target, "JSON rotation or a planar angle in radians");
  approx->add_option("--seed", ax.seed, "seed for class sampling");
  approx->add_option("--out", ax.out, "certificate path")->required();
  approx->add_option("--max-depth", ax.max_depth, "refinement depth for separation checks");
  approx->add_option("--word-budget", ax.word_budget, "words examined per class step");

  std::string cert_path;
  auto* verify = app.add_subcommand("verify", "Re-verify a certificate against its config");
  verify->add_option("--config", config, "system config (JSON)")->required();
  verify->add_option("--certificate,certificate", cert_path, "certificate path")->required();

  RenderSpec spec;
  std::string render_out;
  std::optional<std::string> overlay;
  std::vector<int> axes;
  auto* rend = app.add_subcommand("render", "Chaos-game point cloud as a P6 pixmap");
  rend->add_option("--config", config, "system config (JSON)")->required();
  rend->add_option("--out", render_out, "output .ppm path")->required();
  rend->add_option("--certificate", overlay, "overlay the certified subsystem");
  rend->add_option("--width", spec.width);
  rend->add_option("--height", spec.height);
  rend->add_option("--iterations", spec.iterations);
  rend->add_option("--seed", spec.seed);
  rend->add_option("--axes", axes, "projection coordinates for d > 2")->expected(2);

  std::string config_b;
  int ja = 0, jb = 0, max_length = 4;
  auto* lr = app.add_subcommand("log-ratio-check", "Scan cycle pairs for log-ratio quotients far from rationals");
  lr->add_option("--config", config, "first system")->required();
  lr->add_option("--config-b", config_b, "second system")->required();
  lr->add_option("--vertex", ja);
  lr->add_option("--vertex-b", jb);
  lr->add_option("--max-length", max_length, "cycle length cap");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInput;
  }

  try {
    if (*dim) return cmd_dim(config, dim_vertex);
    if (*approx) return cmd_approximate(ax);
    if (*verify) return cmd_verify(config, cert_path);
    if (*rend) {
      if (axes.size() == 2) spec.axis_x = axes[0], spec.axis_y = axes[1];
      return cmd_render(config, spec, render_out, overlay);
    }
    if (*lr) return cmd_log_ratio(config, config_b, ja, jb, max_length);
  } catch (const NotStronglyConnected& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kDisconnected;
  } catch (const PreconditionError& e) {
    std::fprintf(stderr, "precondition failed: %s\n", e.what());
    return kPrecondition;
  } catch (const InternalError& e) {
    std::fprintf(stderr, "construction failed: %s\n", e.what());
    return kPrecondition;
  } catch (const InputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInput;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInput;
  }
  return kInput;
}
