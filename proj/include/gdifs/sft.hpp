#pragma once

// Subshifts of finite type with one similarity per symbol.

#include <string>
#include <vector>

#include "gdifs/graph.hpp"

namespace gdifs {

using TransitionMatrix = std::vector<std::vector<int>>;

namespace detail {

inline void check_transition_matrix(const TransitionMatrix& a) {
  if (a.empty()) throw InputError("transition matrix is empty");
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != a.size()) throw InputError("transition matrix must be square");
    for (int v : a[i])
      if (v != 0 && v != 1) throw InputError("transition matrix entries must be 0 or 1");
  }
}

}  // namespace detail

/// True iff every symbol can reach every other through allowed transitions.
inline bool is_irreducible(const TransitionMatrix& a) {
  detail::check_transition_matrix(a);
  const size_t m = a.size();
  for (size_t s = 0; s < m; ++s) {
    std::vector<bool> seen(m, false);
    std::vector<size_t> stack{s};
    // Reachability in one or more steps, so a lone symbol needs a self-loop.
    while (!stack.empty()) {
      const size_t v = stack.back();
      stack.pop_back();
      for (size_t w = 0; w < m; ++w)
        if (a[v][w] && !seen[w]) {
          seen[w] = true;
          stack.push_back(w);
        }
    }
    for (size_t w = 0; w < m; ++w)
      if (!seen[w]) return false;
  }
  return true;
}

class SftSystem {
 public:
  SftSystem(TransitionMatrix a, std::vector<Similarity> maps) : a_(std::move(a)), maps_(std::move(maps)) {
    detail::check_transition_matrix(a_);
    if (maps_.size() != a_.size()) throw InputError("need one map per symbol");
    for (size_t i = 0; i < a_.size(); ++i) {
      bool any = false;
      for (int v : a_[i]) any = any || v == 1;
      if (!any) throw InputError("symbol " + std::to_string(i) + " has no allowed successor");
    }
  }

  int alphabet_size() const { return static_cast<int>(a_.size()); }
  const TransitionMatrix& matrix() const { return a_; }
  const std::vector<Similarity>& maps() const { return maps_; }

 private:
  TransitionMatrix a_;
  std::vector<Similarity> maps_;
};

/// One vertex per symbol and an edge i -> l carrying S_i for each A_il = 1.
inline GdIfs to_gdifs(const SftSystem& s) {
  std::vector<Edge> edges;
  for (int i = 0; i < s.alphabet_size(); ++i)
    for (int l = 0; l < s.alphabet_size(); ++l)
      if (s.matrix()[static_cast<size_t>(i)][static_cast<size_t>(l)]) edges.push_back({i, l, s.maps()[static_cast<size_t>(i)]});
  return GdIfs(s.alphabet_size(), std::move(edges));
}

}  // namespace gdifs
