#pragma once

// Mongeau & Sankoff melodic edit distance with fragmentation and
// consolidation, extended with a fixed penalty on both operations so that
// splitting a note into same-pitch pieces is no longer free.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "variata/errors.hpp"
#include "variata/notation.hpp"

namespace variata {

struct WeightParams {
  double k1 = 0.5;         // weight per tick of length difference
  double penalty_p = 8.0;  // added to every fragmentation and consolidation
  // Indexed by interval class |p_a - p_b| mod 12.
  std::array<double, 12> pitch_table = {0, 3, 2, 1, 1, 2, 3, 1, 2, 2, 2, 3};
  double rest_mismatch = 3.0;
  double k_del = 4.0;
  double k_ins = 4.0;
  int max_group = 8;
};

inline void validate(const WeightParams& p) {
  auto nonneg = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ArgumentError(std::string(name) + " must be a finite value >= 0");
  };
  nonneg(p.k1, "k1");
  nonneg(p.penalty_p, "penalty_p");
  nonneg(p.rest_mismatch, "rest_mismatch");
  nonneg(p.k_del, "k_del");
  nonneg(p.k_ins, "k_ins");
  for (double w : p.pitch_table) nonneg(w, "pitch_table entry");
  if (p.pitch_table[0] != 0.0) throw ArgumentError("pitch_table[0] must be 0");
  if (p.max_group < 2) throw ArgumentError("max_group must be >= 2");
}

inline double w_pitch(const Note& a, const Note& b, const WeightParams& p) {
  if (a.is_rest() && b.is_rest()) return 0.0;
  if (a.is_rest() || b.is_rest()) return p.rest_mismatch;
  return p.pitch_table[std::abs(a.pitch - b.pitch) % 12];
}

inline double w_subst(const Note& a, const Note& b, const WeightParams& p) {
  return w_pitch(a, b, p) + p.k1 * std::abs(a.ticks - b.ticks);
}

inline double w_del(const Note& a, const WeightParams& p) { return p.k_del + p.k1 * a.ticks; }
inline double w_ins(const Note& b, const WeightParams& p) { return p.k_ins + p.k1 * b.ticks; }

namespace detail {
inline void check_group(std::size_t k, const WeightParams& p) {
  if (k < 2 || k > static_cast<std::size_t>(p.max_group)) {
    throw ArgumentError("group of " + std::to_string(k) + " notes outside [2, " + std::to_string(p.max_group) + "]");
  }
}
}  // namespace detail

/// One note of A replaced by the notes `bs` of B.
inline double w_frag(const Note& a, std::span<const Note> bs, const WeightParams& p) {
  detail::check_group(bs.size(), p);
  double pitch = 0.0;
  int ticks = 0;
  for (const Note& b : bs) {
    pitch += w_pitch(a, b, p);
    ticks += b.ticks;
  }
  return pitch + p.k1 * std::abs(a.ticks - ticks) + p.penalty_p;
}

/// The notes `as` of A replaced by one note of B.
inline double w_cons(std::span<const Note> as, const Note& b, const WeightParams& p) {
  detail::check_group(as.size(), p);
  double pitch = 0.0;
  int ticks = 0;
  for (const Note& a : as) {
    pitch += w_pitch(a, b, p);
    ticks += a.ticks;
  }
  return pitch + p.k1 * std::abs(ticks - b.ticks) + p.penalty_p;
}

enum class EditKind { substitute, consolidate, fragment, deletion, insertion };

inline std::string_view to_string(EditKind k) {
  switch (k) {
    case EditKind::substitute: return "substitute";
    case EditKind::consolidate: return "consolidate";
    case EditKind::fragment: return "fragment";
    case EditKind::deletion: return "delete";
    case EditKind::insertion: return "insert";
  }
  return "?";
}

/// One step of an edit script. Consumes A[a_begin, a_end) and produces
/// B[b_begin, b_end); `output` holds the produced notes so a script can be
/// replayed without B at hand.
struct EditOp {
  EditKind kind;
  std::size_t a_begin = 0, a_end = 0;
  std::size_t b_begin = 0, b_end = 0;
  double weight = 0.0;
  std::vector<Note> output;
};

struct DistanceResult {
  double distance = 0.0;
  std::vector<EditOp> edit_script;
};

namespace detail {

struct Choice {
  EditKind kind = EditKind::substitute;
  int k = 1;
};

// Fills the (m+1) x (n+1) table row-major. Ties keep the first case tried:
// substitute, consolidate, fragment, delete, insert.
inline void ms_fill(std::span<const Note> a, std::span<const Note> b, const WeightParams& p,
                    std::vector<double>& d, std::vector<Choice>* choices) {
  const std::size_t m = a.size(), n = b.size(), w = n + 1;
  const std::size_t g = static_cast<std::size_t>(std::max(p.max_group, 1));
  d.assign((m + 1) * w, 0.0);
  if (choices) choices->assign((m + 1) * w, Choice{});
  for (std::size_t i = 1; i <= m; ++i) {
    d[i * w] = d[(i - 1) * w] + w_del(a[i - 1], p);
    if (choices) (*choices)[i * w] = {EditKind::deletion, 1};
  }
  for (std::size_t j = 1; j <= n; ++j) {
    d[j] = d[j - 1] + w_ins(b[j - 1], p);
    if (choices) (*choices)[j] = {EditKind::insertion, 1};
  }
  for (std::size_t i = 1; i <= m; ++i) {
    const Note& ai = a[i - 1];
    for (std::size_t j = 1; j <= n; ++j) {
      const Note& bj = b[j - 1];
      double best = d[(i - 1) * w + (j - 1)] + w_subst(ai, bj, p);
      Choice choice{EditKind::substitute, 1};

      // consolidate a[i-k..i-1] -> b[j-1]
      double pitch = w_pitch(ai, bj, p);
      int ticks = ai.ticks;
      for (std::size_t k = 2; k <= g && k <= i; ++k) {
        const Note& ak = a[i - k];
        pitch += w_pitch(ak, bj, p);
        ticks += ak.ticks;
        const double c = d[(i - k) * w + (j - 1)] + pitch + p.k1 * std::abs(ticks - bj.ticks) + p.penalty_p;
        if (c < best) {
          best = c;
          choice = {EditKind::consolidate, static_cast<int>(k)};
        }
      }

      // fragment a[i-1] -> b[j-k..j-1]
      pitch = w_pitch(ai, bj, p);
      ticks = bj.ticks;
      for (std::size_t k = 2; k <= g && k <= j; ++k) {
        const Note& bk = b[j - k];
        pitch += w_pitch(ai, bk, p);
        ticks += bk.ticks;
        const double c = d[(i - 1) * w + (j - k)] + pitch + p.k1 * std::abs(ai.ticks - ticks) + p.penalty_p;
        if (c < best) {
          best = c;
          choice = {EditKind::fragment, static_cast<int>(k)};
        }
      }

      const double del = d[(i - 1) * w + j] + w_del(ai, p);
      if (del < best) {
        best = del;
        choice = {EditKind::deletion, 1};
      }
      const double ins = d[i * w + (j - 1)] + w_ins(bj, p);
      if (ins < best) {
        best = ins;
        choice = {EditKind::insertion, 1};
      }
      d[i * w + j] = best;
      if (choices) (*choices)[i * w + j] = choice;
    }
  }
}

}  // namespace detail

/// Distance only, without building an edit script.
inline double ms_distance_value(std::span<const Note> a, std::span<const Note> b, const WeightParams& p) {
  thread_local std::vector<double> table;
  detail::ms_fill(a, b, p, table, nullptr);
  return table.back();
}

inline DistanceResult ms_distance(const Melody& a, const Melody& b, const WeightParams& p = {}) {
  std::vector<double> d;
  std::vector<detail::Choice> choices;
  detail::ms_fill(a.notes, b.notes, p, d, &choices);
  const std::size_t w = b.size() + 1;

  DistanceResult result;
  result.distance = d.back();
  std::size_t i = a.size(), j = b.size();
  while (i > 0 || j > 0) {
    const detail::Choice c = choices[i * w + j];
    EditOp op{c.kind, 0, 0, 0, 0, 0.0, {}};
    switch (c.kind) {
      case EditKind::substitute:
        op.a_begin = i - 1, op.a_end = i, op.b_begin = j - 1, op.b_end = j;
        op.weight = w_subst(a[i - 1], b[j - 1], p);
        break;
      case EditKind::consolidate:
        op.a_begin = i - c.k, op.a_end = i, op.b_begin = j - 1, op.b_end = j;
        op.weight = w_cons(std::span(a.notes).subspan(i - c.k, c.k), b[j - 1], p);
        break;
      case EditKind::fragment:
        op.a_begin = i - 1, op.a_end = i, op.b_begin = j - c.k, op.b_end = j;
        op.weight = w_frag(a[i - 1], std::span(b.notes).subspan(j - c.k, c.k), p);
        break;
      case EditKind::deletion:
        op.a_begin = i - 1, op.a_end = i, op.b_begin = j, op.b_end = j;
        op.weight = w_del(a[i - 1], p);
        break;
      case EditKind::insertion:
        op.a_begin = i, op.a_end = i, op.b_begin = j - 1, op.b_end = j;
        op.weight = w_ins(b[j - 1], p);
        break;
    }
    op.output.assign(b.notes.begin() + op.b_begin, b.notes.begin() + op.b_end);
    i = op.a_begin;
    j = op.b_begin;
    result.edit_script.push_back(std::move(op));
  }
  std::reverse(result.edit_script.begin(), result.edit_script.end());
  return result;
}

/// Applies an edit script to A. Throws if the script does not consume A
/// contiguously from start to end.
inline Melody replay(const Melody& a, const std::vector<EditOp>& script) {
  Melody out;
  std::size_t next = 0;
  for (const EditOp& op : script) {
    if (op.a_begin != next || op.a_end < op.a_begin || op.a_end > a.size()) {
      throw ArgumentError("edit script does not consume the source melody in order");
    }
    const std::size_t consumed = op.a_end - op.a_begin;
    const std::size_t produced = op.output.size();
    const bool shape_ok = (op.kind == EditKind::substitute && consumed == 1 && produced == 1) ||
                          (op.kind == EditKind::consolidate && consumed >= 2 && produced == 1) ||
                          (op.kind == EditKind::fragment && consumed == 1 && produced >= 2) ||
                          (op.kind == EditKind::deletion && consumed == 1 && produced == 0) ||
                          (op.kind == EditKind::insertion && consumed == 0 && produced == 1);
    if (!shape_ok) throw ArgumentError("malformed " + std::string(to_string(op.kind)) + " operation");
    out.notes.insert(out.notes.end(), op.output.begin(), op.output.end());
    next = op.a_end;
  }
  if (next != a.size()) throw ArgumentError("edit script leaves source notes unconsumed");
  return out;
}

/// Distance between a candidate note (optionally preceded by `prev`) and the
/// theme fragment it would replace when `cand` starts at tick t. The window
/// runs from t - d(prev) to t + d(cand), clipped to the theme, and theme
/// notes overlapping its ends are trimmed.
inline double localized_mgd(const Melody& theme, const std::optional<Note>& prev, const Note& cand, int t,
                            const WeightParams& p) {
  const int total = theme.total_ticks();
  if (t < 0 || t > total) {
    throw RangeError("localized window at tick " + std::to_string(t) + " outside theme of " +
                     std::to_string(total) + " ticks");
  }
  auto clip = [total](int x) { return std::clamp(x, 0, total); };
  if (prev) {
    const Melody window = clipped_slice(theme, clip(t - prev->ticks), clip(t + cand.ticks));
    const std::array<Note, 2> pair = {*prev, cand};
    return ms_distance_value(pair, window.notes, p);
  }
  const Melody window = clipped_slice(theme, t, clip(t + cand.ticks));
  const std::array<Note, 1> one = {cand};
  return ms_distance_value(one, window.notes, p);
}

}  // namespace variata
