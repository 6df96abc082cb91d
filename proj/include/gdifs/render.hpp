#pragma once

// Chaos-game point clouds and P6 pixmaps.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gdifs/graph.hpp"
#include "gdifs/separation.hpp"

namespace gdifs {

struct RenderSpec {
  int width = 512;
  int height = 512;
  long iterations = 100'000;
  std::uint64_t seed = 1;
  int axis_x = 0;  // projection coordinates for d > 2
  int axis_y = 1;
};

struct CloudPoint {
  Vec x;
  VertexId vertex;
};

/// Backward random walk: from a point of K_l, an incoming edge e: i -> l maps
/// it into K_i. The first 64 steps are discarded.
inline std::vector<CloudPoint> chaos_game(const GdIfs& g, long iterations, std::uint64_t seed) {
  if (iterations < 1) throw InputError("chaos game needs at least one iteration");
  const Enclosure enc = compute_enclosure(g);
  std::mt19937_64 rng(seed);
  VertexId v = 0;
  Vec x = enc.at(0).center;
  std::vector<CloudPoint> out;
  out.reserve(static_cast<size_t>(iterations));
  for (long step = -64; step < iterations; ++step) {
    const auto& in = g.incoming(v);
    if (in.empty()) throw PreconditionError("vertex " + std::to_string(v) + " has no incoming edge");
    const Edge& e = g.edge(in[std::uniform_int_distribution<size_t>(0, in.size() - 1)(rng)]);
    x = e.map.apply(x);
    v = e.source;
    if (step >= 0) out.push_back({x, v});
  }
  return out;
}

/// Pixel frame covering the enclosure balls of every vertex.
struct Frame {
  double x0 = 0.0, y0 = 0.0, scale = 1.0;
  int width = 0, height = 0;
  int axis_x = 0, axis_y = 1;

  static Frame fit(const GdIfs& g, const RenderSpec& spec) {
    const int d = g.ambient_dim();
    if (spec.width < 1 || spec.height < 1) throw InputError("image size must be positive");
    if (d > 2 && (spec.axis_x < 0 || spec.axis_y < 0 || spec.axis_x >= d || spec.axis_y >= d || spec.axis_x == spec.axis_y))
      throw InputError("projection axes out of range");
    const Enclosure enc = compute_enclosure(g);
    Frame f;
    f.width = spec.width;
    f.height = spec.height;
    f.axis_x = d > 2 ? spec.axis_x : 0;
    f.axis_y = d > 2 ? spec.axis_y : 1;
    double lx = INFINITY, hx = -INFINITY, ly = INFINITY, hy = -INFINITY;
    for (const auto& b : enc.balls) {
      lx = std::min(lx, b.center(f.axis_x) - b.radius);
      hx = std::max(hx, b.center(f.axis_x) + b.radius);
      const double cy = d > 1 ? b.center(f.axis_y) : 0.0;
      ly = std::min(ly, cy - b.radius);
      hy = std::max(hy, cy + b.radius);
    }
    // One scale for both axes so shapes are not distorted.
    f.scale = std::min((spec.width - 1) / std::max(hx - lx, 1e-300), (spec.height - 1) / std::max(hy - ly, 1e-300));
    f.x0 = 0.5 * (lx + hx) - 0.5 * (spec.width - 1) / f.scale;
    f.y0 = 0.5 * (ly + hy) - 0.5 * (spec.height - 1) / f.scale;
    return f;
  }

  std::optional<std::pair<int, int>> pixel(const Vec& p) const {
    const double y = p.size() > 1 ? p(axis_y) : 0.0;
    const long c = std::lround((p(axis_x) - x0) * scale);
    const long r = height - 1 - std::lround((y - y0) * scale);
    if (c < 0 || c >= width || r < 0 || r >= height) return std::nullopt;
    return std::pair<int, int>{static_cast<int>(c), static_cast<int>(r)};
  }
};

struct Image {
  int width = 0, height = 0;
  std::vector<std::uint8_t> rgb;

  std::uint8_t* at(int col, int row) { return &rgb[3 * (static_cast<size_t>(row) * static_cast<size_t>(width) + static_cast<size_t>(col))]; }
  const std::uint8_t* at(int col, int row) const {
    return &rgb[3 * (static_cast<size_t>(row) * static_cast<size_t>(width) + static_cast<size_t>(col))];
  }
  bool lit(int col, int row) const {
    const auto* p = at(col, row);
    return p[0] || p[1] || p[2];
  }
};

/// Base attractor with one colour per vertex; the overlay system, if given,
/// is drawn on top in white.
inline Image render(const GdIfs& g, const RenderSpec& spec, std::span<const Similarity> overlay = {}) {
  if (spec.iterations < 1000) throw InputError("render needs at least 1000 iterations");
  const Frame f = Frame::fit(g, spec);
  Image img{spec.width, spec.height, std::vector<std::uint8_t>(3 * static_cast<size_t>(spec.width) * static_cast<size_t>(spec.height), 0)};
  static constexpr std::uint8_t palette[6][3] = {{230, 80, 60}, {60, 160, 230}, {90, 200, 90},
                                                 {220, 180, 50}, {180, 90, 220}, {60, 200, 190}};
  for (const auto& p : chaos_game(g, spec.iterations, spec.seed)) {
    const auto px = f.pixel(p.x);
    if (!px) continue;
    const auto* c = palette[static_cast<size_t>(p.vertex) % 6];
    std::copy(c, c + 3, img.at(px->first, px->second));
  }
  if (!overlay.empty()) {
    for (const auto& p : chaos_game(GdIfs::from_maps(overlay), spec.iterations, spec.seed + 1)) {
      const auto px = f.pixel(p.x);
      if (!px) continue;
      std::fill(img.at(px->first, px->second), img.at(px->first, px->second) + 3, std::uint8_t{255});
    }
  }
  return img;
}

inline std::string encode_p6(const Image& img) {
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.rgb.data()), img.rgb.size());
  return out;
}

/// Writes through a temporary file in the same directory and renames it.
inline void write_file_atomic(const std::string& path, const std::string& bytes) {
  const std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InputError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw InputError("cannot rename onto " + path + ": " + ec.message());
  }
}

}  // namespace gdifs
