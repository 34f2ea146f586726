#pragma once

// Test-only reference implementations. They deliberately share no code path
// with the library routines they check: weights are recomputed here from the
// definitions, and distances/partition functions come from exhaustive
// enumeration rather than dynamic programming.

#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <vector>

#include "variata/notation.hpp"
#include "variata/similarity.hpp"

namespace oracle {

using variata::Melody;
using variata::Note;
using variata::WeightParams;

inline double pitch_weight(const Note& a, const Note& b, const WeightParams& p) {
  const bool ra = a.pitch == variata::kRest, rb = b.pitch == variata::kRest;
  if (ra && rb) return 0.0;
  if (ra != rb) return p.rest_mismatch;
  int d = a.pitch - b.pitch;
  if (d < 0) d = -d;
  return p.pitch_table[d % 12];
}

/// Weight of replacing a[i0, i1) by b[j0, j1) as one edit operation, or NaN
/// when the shape is not an operation.
inline double op_weight(const Melody& a, std::size_t i0, std::size_t i1, const Melody& b, std::size_t j0,
                        std::size_t j1, const WeightParams& p) {
  const std::size_t na = i1 - i0, nb = j1 - j0;
  if (na == 1 && nb == 0) return p.k_del + p.k1 * a[i0].ticks;
  if (na == 0 && nb == 1) return p.k_ins + p.k1 * b[j0].ticks;
  if (na == 1 && nb == 1) return pitch_weight(a[i0], b[j0], p) + p.k1 * std::abs(a[i0].ticks - b[j0].ticks);
  if ((na == 1 && nb >= 2) || (na >= 2 && nb == 1)) {
    double pitch = 0.0;
    int ta = 0, tb = 0;
    for (std::size_t i = i0; i < i1; ++i) ta += a[i].ticks;
    for (std::size_t j = j0; j < j1; ++j) tb += b[j].ticks;
    for (std::size_t i = i0; i < i1; ++i)
      for (std::size_t j = j0; j < j1; ++j) pitch += pitch_weight(a[i], b[j], p);
    return pitch + p.k1 * std::abs(ta - tb) + p.penalty_p;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

struct ScriptStep {
  std::size_t a_len, b_len;
};

/// Visits every valid edit script turning a into b. The callback receives
/// the steps and the script weight.
inline void enumerate_scripts(const Melody& a, const Melody& b, const WeightParams& p,
                              const std::function<void(const std::vector<ScriptStep>&, double)>& visit) {
  std::vector<ScriptStep> steps;
  const std::size_t g = static_cast<std::size_t>(p.max_group);
  std::function<void(std::size_t, std::size_t, double)> rec = [&](std::size_t i, std::size_t j, double acc) {
    if (i == a.size() && j == b.size()) {
      visit(steps, acc);
      return;
    }
    auto go = [&](std::size_t da, std::size_t db) {
      if (i + da > a.size() || j + db > b.size()) return;
      steps.push_back({da, db});
      rec(i + da, j + db, acc + op_weight(a, i, i + da, b, j, j + db, p));
      steps.pop_back();
    };
    go(1, 0);
    go(0, 1);
    go(1, 1);
    for (std::size_t k = 2; k <= g; ++k) {
      go(1, k);
      go(k, 1);
    }
  };
  rec(0, 0, 0.0);
}

/// Minimum script weight by exhaustive search. Partial scripts already at
/// or above the best complete script are abandoned (all weights are >= 0),
/// which changes the running time but not the minimum.
inline double min_script_weight(const Melody& a, const Melody& b, const WeightParams& p) {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t g = static_cast<std::size_t>(p.max_group);
  std::function<void(std::size_t, std::size_t, double)> rec = [&](std::size_t i, std::size_t j, double acc) {
    if (acc >= best) return;
    if (i == a.size() && j == b.size()) {
      best = acc;
      return;
    }
    auto go = [&](std::size_t da, std::size_t db) {
      if (i + da > a.size() || j + db > b.size()) return;
      rec(i + da, j + db, acc + op_weight(a, i, i + da, b, j, j + db, p));
    };
    go(1, 1);
    for (std::size_t k = 2; k <= g; ++k) {
      go(1, k);
      go(k, 1);
    }
    go(1, 0);
    go(0, 1);
  };
  rec(0, 0, 0.0);
  return best;
}

/// All melodies of length <= max_len over the given note alphabet.
inline std::vector<Melody> all_melodies(const std::vector<Note>& alphabet, std::size_t max_len) {
  std::vector<Melody> out{Melody{}};
  std::vector<Melody> frontier{Melody{}};
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::vector<Melody> next;
    for (const Melody& m : frontier)
      for (const Note& n : alphabet) {
        Melody e = m;
        e.notes.push_back(n);
        next.push_back(e);
      }
    out.insert(out.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  return out;
}

/// Exhaustive enumeration of exact-duration state sequences. `weight`
/// receives (prev_state or -1, state, onset) and returns the edge factor.
inline void enumerate_paths(int num_states, const std::function<int(int)>& ticks, int total,
                            const std::function<double(int, int, int)>& weight,
                            const std::function<void(const std::vector<int>&, double)>& visit) {
  std::vector<int> path;
  std::function<void(int, int, double)> rec = [&](int onset, int prev, double w) {
    if (onset == total) {
      visit(path, w);
      return;
    }
    for (int s = 0; s < num_states; ++s) {
      if (onset + ticks(s) > total) continue;
      const double f = weight(prev, s, onset);
      if (!(f > 0.0)) continue;
      path.push_back(s);
      rec(onset + ticks(s), s, w * f);
      path.pop_back();
    }
  };
  rec(0, -1, 1.0);
}

}  // namespace oracle
