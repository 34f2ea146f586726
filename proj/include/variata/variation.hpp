#pragma once

// Theme-biased sampling. Every candidate placement (predecessor n', element
// n, onset t) gets a multiplicative bias derived from how much placing n
// there increases the localized distance to the theme:
//
//   delta = MGD([n', n], t) - MGD([n'], t)
//   beta  = exp(1 - clamp(delta, 0, max_delta) / max_delta)
//   beta' = (1 - alpha) * beta + alpha
//
// so beta' lies in [1, e] at alpha = 0 and is identically 1 at alpha = 1.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <set>
#include <vector>

#include "variata/chain.hpp"
#include "variata/errors.hpp"
#include "variata/notation.hpp"
#include "variata/sequencegraph.hpp"
#include "variata/similarity.hpp"
#include "variata/stylemodel.hpp"

namespace variata {

/// Blended biases for placements whose onset lies inside the theme span
/// [origin, origin + span) of a trellis. Placements outside the span, or not
/// enumerated (unsupported by the model), have bias 1.
class BiasTable {
 public:
  BiasTable() = default;
  BiasTable(int origin, int span, int vocab_size, double alpha)
      : origin_(origin), span_(span), vocab_(vocab_size), alpha_(alpha) {
    const std::size_t n = static_cast<std::size_t>(span) * (vocab_size + 1) * vocab_size;
    delta_.assign(n, std::numeric_limits<double>::quiet_NaN());
    beta_.assign(n, 1.0);
  }

  int origin() const { return origin_; }
  int span() const { return span_; }
  double alpha() const { return alpha_; }
  double mgd_max() const { return mgd_max_; }

  bool enumerated(int prev, int cand, int t) const {
    return in_span(t) && !std::isnan(delta_[slot(prev, cand, t)]);
  }

  /// Blended bias beta'; `prev` = -1 at the sequence start.
  double operator()(int prev, int cand, int t) const { return in_span(t) ? beta_[slot(prev, cand, t)] : 1.0; }

  /// Incremental localized distance (before clamping); 0 where not enumerated.
  double delta(int prev, int cand, int t) const {
    if (!in_span(t)) return 0.0;
    const double d = delta_[slot(prev, cand, t)];
    return std::isnan(d) ? 0.0 : d;
  }

  void set_delta(int prev, int cand, int t, double d) { delta_[slot(prev, cand, t)] = d; }

  /// Rescales every enumerated delta by the largest one and blends with alpha.
  void finalize() {
    mgd_max_ = 0.0;
    for (double d : delta_)
      if (!std::isnan(d)) mgd_max_ = std::max(mgd_max_, d);
    for (std::size_t i = 0; i < delta_.size(); ++i)
      if (!std::isnan(delta_[i])) beta_[i] = blend(raw_bias(delta_[i], mgd_max_), alpha_);
  }

  static double raw_bias(double delta, double mgd_max) {
    return mgd_max > 0.0 ? std::exp(1.0 - std::clamp(delta, 0.0, mgd_max) / mgd_max) : std::exp(1.0);
  }
  static double blend(double beta, double alpha) { return (1.0 - alpha) * beta + alpha; }

 private:
  bool in_span(int t) const { return t >= origin_ && t < origin_ + span_; }
  std::size_t slot(int prev, int cand, int t) const {
    return (static_cast<std::size_t>(t - origin_) * (vocab_ + 1) + (prev + 1)) * vocab_ + cand;
  }

  int origin_ = 0;
  int span_ = 0;
  int vocab_ = 0;
  double alpha_ = 0.0;
  double mgd_max_ = 0.0;
  std::vector<double> delta_;
  std::vector<double> beta_;
};

inline void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ArgumentError("alpha must lie in [0, 1]");
}

/// Onsets that can start an element and still be completed to `total` ticks
/// with the chain's durations.
template <class Symbol>
std::vector<bool> reachable_onsets(const MarkovChain<Symbol>& chain, int total) {
  std::set<int> durations;
  for (const Symbol& s : chain.symbols()) durations.insert(s.ticks);
  std::vector<bool> from_start(total + 1, false), to_end(total + 1, false);
  from_start[0] = true;
  for (int t = 0; t <= total; ++t)
    if (from_start[t])
      for (int d : durations)
        if (t + d <= total) from_start[t + d] = true;
  to_end[total] = true;
  for (int t = total; t >= 0; --t)
    for (int d : durations)
      if (t + d <= total && to_end[t + d]) to_end[t] = true;
  std::vector<bool> out(total + 1, false);
  for (int t = 0; t <= total; ++t) out[t] = from_start[t] && to_end[t];
  return out;
}

/// Generic builder: enumerates every model-supported placement with onset in
/// [origin, origin + span) and fills the table from `delta_fn(prev, cand,
/// t_local)`, where t_local is measured from the theme start.
template <class Symbol>
BiasTable build_bias_table(const MarkovChain<Symbol>& chain, int origin, int span, int total_ticks, double alpha,
                           const std::function<double(int, int, int)>& delta_fn) {
  check_alpha(alpha);
  if (origin < 0 || span < 1 || origin + span > total_ticks) throw ArgumentError("theme span outside trellis");
  const int v = static_cast<int>(chain.symbols().size());
  BiasTable table(origin, span, v, alpha);
  const auto support = chain.symbol_bigram_support();
  const auto starts = chain.initial_symbol_support();
  const auto onsets = reachable_onsets(chain, total_ticks);
  const auto& syms = chain.symbols();

  for (int tl = 0; tl < span; ++tl) {
    const int t = origin + tl;
    if (!onsets[t]) continue;
    for (int cand = 0; cand < v; ++cand) {
      if (tl + syms[cand].ticks > span) continue;
      if (t == 0) {
        if (starts[cand]) table.set_delta(-1, cand, t, delta_fn(-1, cand, tl));
        continue;
      }
      for (int prev = 0; prev < v; ++prev) {
        const int prev_onset = t - syms[prev].ticks;
        if (prev_onset < 0 || !onsets[prev_onset] || !support[prev][cand]) continue;
        table.set_delta(prev, cand, t, delta_fn(prev, cand, tl));
      }
    }
  }
  table.finalize();
  return table;
}

/// Melodic bias for a theme placed at [origin, origin + theme length) of a
/// `total_ticks` trellis.
inline BiasTable build_bias_at(const Melody& theme, const MarkovChain<NoteState>& chain, int origin, int total_ticks,
                               const WeightParams& params, double alpha) {
  validate(params);
  const int span = theme.total_ticks();
  const auto& syms = chain.symbols();
  const int v = static_cast<int>(syms.size());
  // MGD([n'], t) depends only on (n', t); cache it.
  std::vector<double> single(static_cast<std::size_t>(span) * v, std::numeric_limits<double>::quiet_NaN());
  auto one_note = [&](int prev, int tl) {
    double& slot = single[static_cast<std::size_t>(tl) * v + prev];
    if (std::isnan(slot)) {
      const Note n = syms[prev].note();
      const Melody window = clipped_slice(theme, std::max(tl - n.ticks, 0), tl);
      const std::array<Note, 1> one = {n};
      slot = ms_distance_value(one, window.notes, params);
    }
    return slot;
  };
  auto delta_fn = [&](int prev, int cand, int tl) {
    const Note c = syms[cand].note();
    if (prev < 0) return localized_mgd(theme, std::nullopt, c, tl, params);
    return localized_mgd(theme, syms[prev].note(), c, tl, params) - one_note(prev, tl);
  };
  return build_bias_table(chain, origin, span, total_ticks, alpha, delta_fn);
}

inline BiasTable build_bias(const Melody& theme, const MarkovChain<NoteState>& chain, const WeightParams& params,
                            double alpha) {
  return build_bias_at(theme, chain, 0, theme.total_ticks(), params, alpha);
}

/// p_pi for notes under a fixed chord track, tabulated per (tick, symbol).
inline Trellis<NoteState>::Factor harmonic_factor(const StyleModel& model, const std::vector<ChordEvent>& chords) {
  const int total = total_ticks(chords);
  const auto& syms = model.notes.symbols();
  const int v = static_cast<int>(syms.size());
  auto table = std::make_shared<std::vector<double>>(static_cast<std::size_t>(total) * v, 0.0);
  int onset = 0;
  for (const ChordEvent& c : chords) {
    const HarmonicRow* row = model.harmonic_row(c);
    for (int t = onset; t < onset + c.ticks; ++t)
      for (int s = 0; s < v; ++s) (*table)[static_cast<std::size_t>(t) * v + s] = row ? row->prob(syms[s]) : 0.0;
    onset += c.ticks;
  }
  return [table, v, total](int, int symbol, int t) {
    return t >= 0 && t < total ? (*table)[static_cast<std::size_t>(t) * v + symbol] : 0.0;
  };
}

inline Trellis<NoteState>::Factor bias_factor(std::shared_ptr<const BiasTable> table) {
  return [table](int prev, int cand, int t) { return (*table)(prev, cand, t); };
}

template <class Symbol>
struct VariationSample {
  std::vector<Symbol> elements;
  double log_pb = kNegInf;             // biased model
  double log_po = kNegInf;             // unbiased model
  double log_bias_product = kNegInf;   // sum of applied log biases
  double sum_localized = 0.0;          // sum of localized deltas along the sequence
};

template <class Symbol>
struct VariationRun {
  double log_z_biased = kNegInf;
  double log_z_unbiased = kNegInf;
  std::shared_ptr<const BiasTable> bias;
  std::vector<VariationSample<Symbol>> samples;
};

namespace detail {

template <class Symbol>
VariationRun<Symbol> run_biased(const Trellis<Symbol>& unbiased, const Trellis<Symbol>& biased,
                                std::shared_ptr<const BiasTable> table, std::uint64_t seed, int count) {
  const ForwardTable fu = forward(unbiased);
  const ForwardTable fb = forward(biased);
  VariationRun<Symbol> run;
  run.log_z_biased = fb.log_z;
  run.log_z_unbiased = fu.log_z;
  run.bias = table;
  for (auto& s : sample(biased, fb, seed, count)) {
    VariationSample<Symbol> v;
    v.log_pb = s.log_prob;
    v.log_po = evaluate(unbiased, fu, s.elements).log_prob;
    v.log_bias_product = log_bias_product(biased, s.states);
    int onset = 0, prev = -1;
    for (int st : s.states) {
      const int sym = biased.chain().emitted(st);
      v.sum_localized += table->delta(prev, sym, onset);
      onset += biased.ticks(st);
      prev = sym;
    }
    v.elements = std::move(s.elements);
    run.samples.push_back(std::move(v));
  }
  return run;
}

}  // namespace detail

/// Samples melodic variations of `theme` under the chord track `chords`.
/// Each sample carries its log probability under the biased and unbiased
/// models.
inline VariationRun<NoteState> variate_melody(const StyleModel& model, const std::vector<ChordEvent>& chords,
                                              const Melody& theme, double alpha, std::uint64_t seed, int count,
                                              const WeightParams& params = {},
                                              BiasRenorm renorm = BiasRenorm::global) {
  check_alpha(alpha);
  const int total = theme.total_ticks();
  if (total != total_ticks(chords)) throw ArgumentError("theme and chord track differ in duration");
  auto table = std::make_shared<const BiasTable>(build_bias(theme, model.notes, params, alpha));
  Trellis<NoteState> unbiased(model.notes, total);
  unbiased.set_temporal(harmonic_factor(model, chords));
  Trellis<NoteState> biased(model.notes, total);
  biased.set_temporal(harmonic_factor(model, chords)).set_bias(bias_factor(table)).set_bias_renorm(renorm);
  return detail::run_biased(unbiased, biased, table, seed, count);
}

// ---------------------------------------------------------------------------
// Chord sequences
// ---------------------------------------------------------------------------

/// Scalar product of the two chords' pitch histograms.
inline double chord_similarity(const ChordEvent& a, const ChordEvent& b, const StyleModel& model) {
  auto ha = model.histograms.find(ChordKey::of(a));
  auto hb = model.histograms.find(ChordKey::of(b));
  if (ha == model.histograms.end() || hb == model.histograms.end()) {
    throw ArgumentError("chord quality missing from the histogram table");
  }
  double dot = 0.0;
  for (int pc = 0; pc < 12; ++pc) dot += ha->second[pc] * hb->second[pc];
  return dot;
}

/// Largest histogram product over pairs drawn from the model vocabulary and
/// the theme.
inline double max_chord_similarity(const StyleModel& model, const std::vector<ChordEvent>& theme) {
  std::vector<ChordEvent> pool = theme;
  for (const ChordState& s : model.chords.symbols()) pool.push_back(s.event());
  double best = 0.0;
  for (const auto& a : pool)
    for (const auto& b : pool) best = std::max(best, chord_similarity(a, b, model));
  return best;
}

/// Chord distance over the ticks [t, t + c.ticks) against the theme track,
/// in beats: sum over overlapping theme chords of overlap * (max_sim - sim).
inline double local_chord_distance(const ChordEvent& c, int t, const std::vector<ChordEvent>& theme,
                                   const StyleModel& model, double max_sim) {
  double d = 0.0;
  int onset = 0;
  for (const ChordEvent& th : theme) {
    const int lo = std::max(onset, t), hi = std::min(onset + th.ticks, t + c.ticks);
    if (lo < hi) d += (hi - lo) * (max_sim - chord_similarity(c, th, model)) / kTicksPerQuarter;
    onset += th.ticks;
  }
  return d;
}

/// Tick-aligned distance between two chord tracks of equal duration.
inline double chord_track_distance(const std::vector<ChordEvent>& a, const std::vector<ChordEvent>& theme,
                                   const StyleModel& model, double max_sim) {
  double d = 0.0;
  int onset = 0;
  for (const ChordEvent& c : a) {
    d += local_chord_distance(c, onset, theme, model, max_sim);
    onset += c.ticks;
  }
  return d;
}

inline BiasTable build_chord_bias(const std::vector<ChordEvent>& theme, const StyleModel& model, double alpha) {
  const double max_sim = max_chord_similarity(model, theme);
  const auto& syms = model.chords.symbols();
  auto delta_fn = [&](int, int cand, int tl) {
    return local_chord_distance(syms[cand].event(), tl, theme, model, max_sim);
  };
  const int total = total_ticks(theme);
  return build_bias_table(model.chords, 0, total, total, alpha, delta_fn);
}

inline VariationRun<ChordState> variate_chords(const StyleModel& model, const std::vector<ChordEvent>& theme_chords,
                                               double alpha, std::uint64_t seed, int count,
                                               BiasRenorm renorm = BiasRenorm::global) {
  check_alpha(alpha);
  for (const ChordEvent& c : theme_chords) validate(c);
  const int total = total_ticks(theme_chords);
  if (total < 1) throw ArgumentError("empty theme chord track");
  auto table = std::make_shared<const BiasTable>(build_chord_bias(theme_chords, model, alpha));
  Trellis<ChordState> unbiased(model.chords, total);
  Trellis<ChordState> biased(model.chords, total);
  biased.set_bias([table](int p, int c, int t) { return (*table)(p, c, t); }).set_bias_renorm(renorm);
  return detail::run_biased(unbiased, biased, table, seed, count);
}

inline std::vector<ChordEvent> to_events(const std::vector<ChordState>& states) {
  std::vector<ChordEvent> out;
  for (const ChordState& s : states) out.push_back(s.event());
  return out;
}

inline Melody to_melody(const std::vector<NoteState>& states) {
  Melody m;
  for (const NoteState& s : states) m.notes.push_back(s.note());
  return m;
}

}  // namespace variata
