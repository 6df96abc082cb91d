#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "gdifs/gdifs.hpp"

namespace testing_support {

using namespace gdifs;

inline std::string fixture(const std::string& name) { return std::string(GDIFS_FIXTURES) + "/" + name + ".json"; }

inline Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

inline Similarity line_map(double r, double t, bool flip = false) {
  Mat m(1, 1);
  m(0, 0) = flip ? -1.0 : 1.0;
  return {r, OrthogonalTransform(m), vec({t})};
}

inline Similarity plane_map(double r, double angle, double x, double y, bool reflect = false) {
  return {r, OrthogonalTransform::planar(angle, reflect), vec({x, y})};
}

inline GdIfs cantor() {
  const std::vector<Similarity> maps{line_map(1.0 / 3.0, 0.0), line_map(1.0 / 3.0, 2.0 / 3.0)};
  return GdIfs::from_maps(maps);
}

inline OrthogonalTransform random_orthogonal(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> n;
  Mat m(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) m(r, c) = n(rng);
  return OrthogonalTransform(Eigen::HouseholderQR<Mat>(m).householderQ() * Mat::Identity(d, d));
}

inline Similarity random_similarity(std::mt19937_64& rng, int d) {
  std::uniform_real_distribution<double> u(0.05, 0.95), t(-2.0, 2.0);
  Vec v(d);
  for (int i = 0; i < d; ++i) v(i) = t(rng);
  return {u(rng), random_orthogonal(rng, d), v};
}

// Strongly connected random graph: a Hamiltonian cycle plus random extra edges.
inline GdIfs random_graph(std::mt19937_64& rng, int q, int extra, int d) {
  std::vector<Edge> edges;
  for (int v = 0; v < q; ++v) edges.push_back({v, (v + 1) % q, random_similarity(rng, d)});
  std::uniform_int_distribution<int> pick(0, q - 1);
  for (int i = 0; i < extra; ++i) edges.push_back({pick(rng), pick(rng), random_similarity(rng, d)});
  return {q, std::move(edges)};
}

}  // namespace testing_support
