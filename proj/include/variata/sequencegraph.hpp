#pragma once

// Exact inference on the chain factor graph that combines a Markov model with
// a duration automaton. The graph is unrolled as a tick-indexed trellis: a
// node (t, s) stands for "state s ends exactly at tick t", so every accepted
// path fills the imposed total duration exactly. Sum-product forward
// messages give the partition function and backward sampling draws
// sequences with probability weight / Z.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "variata/chain.hpp"
#include "variata/errors.hpp"

namespace variata {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

enum class BiasRenorm { global, local };

/// Independent, reproducible stream for draw `index` of a run seeded with `seed`.
inline std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

template <class Symbol>
class Trellis {
 public:
  /// Factor over symbol indices; `prev_symbol` is -1 for the first element.
  using Factor = std::function<double(int prev_symbol, int symbol, int onset)>;
  using Unary = std::function<double(int onset, int symbol)>;

  Trellis(const MarkovChain<Symbol>& chain, int total_ticks) : chain_(&chain), total_(total_ticks) {
    if (total_ticks < 1) throw ArgumentError("trellis needs a positive total duration");
    const std::size_t n = chain.num_states();
    preds_.resize(n);
    for (std::size_t s = 0; s < n; ++s)
      for (const auto& e : chain.successors(static_cast<int>(s)))
        if (e.prob > 0.0) preds_[e.to].push_back({static_cast<int>(s), e.prob});
    required_symbol_.assign(total_ + 1, kFree);
    boundary_.assign(total_ + 1, false);
    refresh_boundaries();
  }

  Trellis& set_temporal(Factor f) {
    temporal_ = std::move(f);
    refresh_renorm();
    return *this;
  }

  Trellis& set_bias(Factor f) {
    bias_ = std::move(f);
    refresh_renorm();
    return *this;
  }

  Trellis& set_bias_renorm(BiasRenorm mode) {
    renorm_ = mode;
    refresh_renorm();
    return *this;
  }

  Trellis& add_unary(Unary u) {
    unary_.push_back(std::move(u));
    return *this;
  }

  /// Requires `symbol` to occupy [start, start + symbol.ticks).
  Trellis& pin(int start, const Symbol& symbol) {
    const int end = start + symbol.ticks;
    if (start < 0 || end > total_) throw ArgumentError("pin outside the trellis span");
    for (int t = start; t < end; ++t) {
      if (covered(t)) throw ArgumentError("pinned intervals overlap at tick " + std::to_string(t));
    }
    const int idx = chain_->symbol_index(symbol);
    required_symbol_[start] = idx >= 0 ? idx : kUnknown;
    pins_.push_back({start, end});
    boundary_[start] = boundary_[end] = true;
    refresh_boundaries();
    return *this;
  }

  /// Forces an element boundary at `tick` without fixing the element.
  Trellis& require_boundary(int tick) {
    if (tick < 0 || tick > total_) throw ArgumentError("boundary outside the trellis span");
    boundary_[tick] = true;
    refresh_boundaries();
    return *this;
  }

  const MarkovChain<Symbol>& chain() const { return *chain_; }
  int total_ticks() const { return total_; }
  std::size_t num_states() const { return chain_->num_states(); }
  int ticks(int state) const { return chain_->ticks(state); }
  BiasRenorm bias_renorm() const { return renorm_; }
  bool has_bias() const { return static_cast<bool>(bias_); }

  struct Pred {
    int state;
    double prob;
  };
  const std::vector<Pred>& predecessors(int state) const { return preds_[state]; }

  /// Whether `state` may start at `onset` given the total duration, pins, and
  /// required boundaries.
  bool admissible(int state, int onset) const {
    const int end = onset + ticks(state);
    if (onset < 0 || end > total_) return false;
    const int req = required_symbol_[onset];
    if (req != kFree && req != chain_->emitted(state)) return false;
    return next_boundary_[onset] >= end;
  }

  double markov(int prev_state, int state) const {
    return prev_state < 0 ? chain_->initial()[state] : chain_->transition(prev_state, state);
  }

  double temporal(int prev_state, int state, int onset) const {
    return temporal_ ? temporal_(prev_symbol(prev_state), chain_->emitted(state), onset) : 1.0;
  }

  /// Bias as supplied, before any renormalization.
  double raw_bias(int prev_state, int state, int onset) const {
    return bias_ ? bias_(prev_symbol(prev_state), chain_->emitted(state), onset) : 1.0;
  }

  /// Bias multiplier actually applied on the edge.
  double bias(int prev_state, int state, int onset) const {
    const double b = raw_bias(prev_state, state, onset);
    if (renorm_ == BiasRenorm::local && bias_) return b * renorm_table_[renorm_slot(prev_state, onset)];
    return b;
  }

  double unary(int state, int onset) const {
    double w = 1.0;
    for (const auto& u : unary_) w *= u(onset, chain_->emitted(state));
    return w;
  }

  /// Product of all factors on the edge prev_state -> state with `state`
  /// starting at `onset`; prev_state = -1 at the sequence start.
  double factor(int prev_state, int state, int onset) const {
    return factor_given_markov(markov(prev_state, state), prev_state, state, onset);
  }

  double factor_given_markov(double m, int prev_state, int state, int onset) const {
    if (m <= 0.0) return 0.0;
    const double v = m * temporal(prev_state, state, onset) * bias(prev_state, state, onset) * unary(state, onset);
    return v > 0.0 && std::isfinite(v) ? v : 0.0;
  }

  /// Ticks that start a pin whose symbol is missing from the vocabulary.
  std::vector<int> unknown_pins() const {
    std::vector<int> out;
    for (const auto& p : pins_)
      if (required_symbol_[p.first] == kUnknown) out.push_back(p.first);
    return out;
  }

 private:
  static constexpr int kFree = -1;
  static constexpr int kUnknown = -2;

  int prev_symbol(int prev_state) const { return prev_state < 0 ? -1 : chain_->emitted(prev_state); }

  bool covered(int t) const {
    for (const auto& p : pins_)
      if (t >= p.first && t < p.second) return true;
    return false;
  }

  void refresh_boundaries() {
    next_boundary_.assign(total_ + 1, total_ + 1);
    int next = total_ + 1;
    for (int t = total_; t >= 0; --t) {
      next_boundary_[t] = next;
      if (boundary_[t]) next = t;
    }
  }

  std::size_t renorm_slot(int prev_state, int onset) const {
    return static_cast<std::size_t>(prev_state + 1) * (total_ + 1) + onset;
  }

  // Per (predecessor, onset) scale that restores the unbiased row mass:
  // sum_x m(x) pi(x) / sum_x m(x) pi(x) beta(x).
  void refresh_renorm() {
    renorm_table_.clear();
    if (renorm_ != BiasRenorm::local || !bias_) return;
    const int n = static_cast<int>(chain_->num_states());
    renorm_table_.assign(static_cast<std::size_t>(n + 1) * (total_ + 1), 1.0);
    for (int prev = -1; prev < n; ++prev) {
      for (int t = 0; t <= total_; ++t) {
        if (prev < 0 && t != 0) continue;
        double plain = 0.0, biased = 0.0;
        auto accumulate = [&](int s, double m) {
          const double base = m * temporal(prev, s, t);
          plain += base;
          biased += base * raw_bias(prev, s, t);
        };
        if (prev < 0) {
          for (int s = 0; s < n; ++s)
            if (chain_->initial()[s] > 0.0) accumulate(s, chain_->initial()[s]);
        } else {
          for (const auto& e : chain_->successors(prev)) accumulate(e.to, e.prob);
        }
        renorm_table_[renorm_slot(prev, t)] = biased > 0.0 ? plain / biased : 1.0;
      }
    }
  }

  const MarkovChain<Symbol>* chain_;
  int total_;
  std::vector<std::vector<Pred>> preds_;
  Factor temporal_;
  Factor bias_;
  BiasRenorm renorm_ = BiasRenorm::global;
  std::vector<Unary> unary_;
  std::vector<int> required_symbol_;
  std::vector<bool> boundary_;
  std::vector<int> next_boundary_;
  std::vector<std::pair<int, int>> pins_;
  std::vector<double> renorm_table_;
};

/// Scaled forward messages: alpha(t, s) = exp(scale[t]) * alpha[t][s] is the
/// total weight of partial paths whose last element s ends at tick t.
struct ForwardTable {
  int total_ticks = 0;
  std::vector<double> scale;
  std::vector<std::vector<double>> alpha;
  double log_z = kNegInf;

  double log_alpha(int t, int s) const {
    const double a = alpha[t][s];
    return a > 0.0 ? std::log(a) + scale[t] : kNegInf;
  }
};

template <class Symbol>
ForwardTable forward(const Trellis<Symbol>& trellis) {
  const int total = trellis.total_ticks();
  const int n = static_cast<int>(trellis.num_states());
  ForwardTable table;
  table.total_ticks = total;
  table.scale.assign(total + 1, kNegInf);
  table.alpha.assign(total + 1, std::vector<double>(n, 0.0));

  for (const int t : trellis.unknown_pins()) {
    throw InfeasibleError("infeasible model: pinned element at tick " + std::to_string(t) +
                          " is not in the model vocabulary");
  }

  std::vector<double> logs(n);
  int furthest = 0;
  for (int t = 1; t <= total; ++t) {
    double best = kNegInf;
    for (int s = 0; s < n; ++s) {
      logs[s] = kNegInf;
      const int u = t - trellis.ticks(s);
      if (u < 0 || !trellis.admissible(s, u)) continue;
      if (u == 0) {
        const double f = trellis.factor(-1, s, 0);
        if (f > 0.0) logs[s] = std::log(f);
      } else if (table.scale[u] > kNegInf) {
        double sum = 0.0;
        const auto& row = table.alpha[u];
        for (const auto& p : trellis.predecessors(s)) {
          if (row[p.state] > 0.0) sum += row[p.state] * trellis.factor_given_markov(p.prob, p.state, s, u);
        }
        if (sum > 0.0) logs[s] = std::log(sum) + table.scale[u];
      }
      best = std::max(best, logs[s]);
    }
    if (best == kNegInf) continue;
    furthest = t;
    table.scale[t] = best;
    for (int s = 0; s < n; ++s) table.alpha[t][s] = logs[s] > kNegInf ? std::exp(logs[s] - best) : 0.0;
  }

  double sum = 0.0;
  for (double a : table.alpha[total]) sum += a;
  if (!(sum > 0.0) || table.scale[total] == kNegInf) {
    throw InfeasibleError("infeasible model: no admissible sequence fills " + std::to_string(total) +
                          " ticks; the empty frontier starts after tick " + std::to_string(furthest));
  }
  table.log_z = std::log(sum) + table.scale[total];
  return table;
}

template <class Symbol>
struct ScoredSequence {
  std::vector<Symbol> elements;
  std::vector<int> states;  // chain states along the path, -1 when unknown
  double log_weight = kNegInf;
  double log_prob = kNegInf;
};

namespace detail {

template <class Symbol>
double path_log_weight(const Trellis<Symbol>& trellis, const std::vector<int>& states) {
  double lw = 0.0;
  int onset = 0;
  int prev = -1;
  for (int s : states) {
    if (s < 0 || !trellis.admissible(s, onset)) return kNegInf;
    const double f = trellis.factor(prev, s, onset);
    if (!(f > 0.0)) return kNegInf;
    lw += std::log(f);
    onset += trellis.ticks(s);
    prev = s;
  }
  return onset == trellis.total_ticks() ? lw : kNegInf;
}

}  // namespace detail

/// Log of the path weight and probability of a given element sequence.
template <class Symbol>
ScoredSequence<Symbol> evaluate(const Trellis<Symbol>& trellis, const ForwardTable& table,
                                const std::vector<Symbol>& elements) {
  int ticks = 0;
  for (const Symbol& e : elements) ticks += e.ticks;
  if (ticks != trellis.total_ticks()) {
    throw ArgumentError("sequence lasts " + std::to_string(ticks) + " ticks, trellis expects " +
                        std::to_string(trellis.total_ticks()));
  }
  ScoredSequence<Symbol> out;
  out.elements = elements;
  out.states = trellis.chain().states_for(elements);
  out.log_weight = detail::path_log_weight(trellis, out.states);
  out.log_prob = out.log_weight == kNegInf ? kNegInf : out.log_weight - table.log_z;
  return out;
}

/// Draws one sequence by backward sampling; `rng` is the caller's stream.
template <class Symbol>
ScoredSequence<Symbol> sample_one(const Trellis<Symbol>& trellis, const ForwardTable& table, std::mt19937_64& rng) {
  auto pick = [&rng](const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double r = uniform01(rng) * total;
    int last = -1;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] <= 0.0) continue;
      last = static_cast<int>(i);
      if (r < weights[i]) return last;
      r -= weights[i];
    }
    return last;
  };

  std::vector<int> path;
  int t = trellis.total_ticks();
  int s = pick(table.alpha[t]);
  std::vector<double> weights;
  while (true) {
    path.push_back(s);
    const int u = t - trellis.ticks(s);
    if (u == 0) break;
    const auto& preds = trellis.predecessors(s);
    weights.assign(preds.size(), 0.0);
    for (std::size_t k = 0; k < preds.size(); ++k) {
      const double a = table.alpha[u][preds[k].state];
      if (a > 0.0) weights[k] = a * trellis.factor_given_markov(preds[k].prob, preds[k].state, s, u);
    }
    s = preds[pick(weights)].state;
    t = u;
  }
  std::reverse(path.begin(), path.end());

  ScoredSequence<Symbol> out;
  out.states = path;
  for (int st : path) out.elements.push_back(trellis.chain().symbol_of(st));
  out.log_weight = detail::path_log_weight(trellis, path);
  out.log_prob = out.log_weight - table.log_z;
  return out;
}

/// `count` independent draws; draw i uses the stream sub_seed(seed, i), so
/// results are reproducible from (seed, index) alone.
template <class Symbol>
std::vector<ScoredSequence<Symbol>> sample(const Trellis<Symbol>& trellis, const ForwardTable& table,
                                           std::uint64_t seed, int count) {
  std::vector<ScoredSequence<Symbol>> out;
  out.reserve(std::max(count, 0));
  for (int i = 0; i < count; ++i) {
    std::mt19937_64 rng(sub_seed(seed, static_cast<std::uint64_t>(i)));
    out.push_back(sample_one(trellis, table, rng));
  }
  return out;
}

template <class Symbol>
std::vector<ScoredSequence<Symbol>> sample(const Trellis<Symbol>& trellis, std::uint64_t seed, int count) {
  return sample(trellis, forward(trellis), seed, count);
}

/// Sum of log bias multipliers along a path (states must be known).
template <class Symbol>
double log_bias_product(const Trellis<Symbol>& trellis, const std::vector<int>& states) {
  double lb = 0.0;
  int onset = 0;
  int prev = -1;
  for (int s : states) {
    if (s < 0) return kNegInf;
    lb += std::log(trellis.bias(prev, s, onset));
    onset += trellis.ticks(s);
    prev = s;
  }
  return lb;
}

}  // namespace variata
