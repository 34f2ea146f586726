#pragma once

#include <algorithm>
#include <map>
#include <stdexcept>
#include <vector>

#include "variata/errors.hpp"

namespace variata {

/// First-order Markov chain over context states. A state is a tuple of up to
/// `order` symbol indices (shorter at sequence starts) and emits its last
/// symbol, so an order-k model over symbols is an order-1 chain over states.
/// `Symbol` must be totally ordered and expose `int ticks`.
template <class Symbol>
class MarkovChain {
 public:
  struct Edge {
    int to;
    double prob;
  };

  MarkovChain() = default;

  /// Maximum-likelihood estimate from whole sequences. No smoothing: unseen
  /// transitions have probability 0.
  static MarkovChain train(const std::vector<std::vector<Symbol>>& sequences, int order) {
    if (order < 1) throw ArgumentError("Markov order must be >= 1");
    MarkovChain chain;
    chain.order_ = order;

    std::map<Symbol, int> vocab;
    for (const auto& seq : sequences)
      for (const Symbol& s : seq) vocab.emplace(s, 0);
    int next = 0;
    for (auto& [sym, idx] : vocab) {
      idx = next++;
      chain.symbols_.push_back(sym);
    }

    auto context = [&](const std::vector<Symbol>& seq, std::size_t i) {
      std::vector<int> ctx;
      const std::size_t from = i + 1 >= static_cast<std::size_t>(order) ? i + 1 - order : 0;
      for (std::size_t k = from; k <= i; ++k) ctx.push_back(vocab.at(seq[k]));
      return ctx;
    };

    std::map<std::vector<int>, int> state_ids;
    for (const auto& seq : sequences)
      for (std::size_t i = 0; i < seq.size(); ++i) state_ids.emplace(context(seq, i), 0);
    next = 0;
    for (auto& [ctx, idx] : state_ids) {
      idx = next++;
      chain.states_.push_back(ctx);
    }

    const std::size_t n = chain.states_.size();
    std::vector<std::map<int, long>> counts(n);
    std::map<int, long> initial_counts;
    long sequences_seen = 0;
    for (const auto& seq : sequences) {
      if (seq.empty()) continue;
      ++sequences_seen;
      int prev = state_ids.at(context(seq, 0));
      ++initial_counts[prev];
      for (std::size_t i = 1; i < seq.size(); ++i) {
        const int cur = state_ids.at(context(seq, i));
        ++counts[prev][cur];
        prev = cur;
      }
    }

    chain.initial_.assign(n, 0.0);
    for (const auto& [s, c] : initial_counts)
      chain.initial_[s] = static_cast<double>(c) / static_cast<double>(sequences_seen);
    chain.transitions_.resize(n);
    for (std::size_t s = 0; s < n; ++s) {
      long total = 0;
      for (const auto& [to, c] : counts[s]) total += c;
      for (const auto& [to, c] : counts[s])
        chain.transitions_[s].push_back({to, static_cast<double>(c) / static_cast<double>(total)});
    }
    chain.reindex();
    return chain;
  }

  /// Builds a chain from explicit tables (deserialization, hand-made toy models).
  static MarkovChain from_tables(int order, std::vector<Symbol> symbols, std::vector<std::vector<int>> states,
                                 std::vector<double> initial, std::vector<std::vector<Edge>> transitions) {
    MarkovChain chain;
    chain.order_ = order;
    chain.symbols_ = std::move(symbols);
    chain.states_ = std::move(states);
    chain.initial_ = std::move(initial);
    chain.transitions_ = std::move(transitions);
    if (chain.initial_.size() != chain.states_.size() || chain.transitions_.size() != chain.states_.size()) {
      throw ValidationError("chain tables disagree on the number of states");
    }
    for (const auto& ctx : chain.states_) {
      if (ctx.empty() || static_cast<int>(ctx.size()) > order) throw ValidationError("bad context length");
      for (int s : ctx)
        if (s < 0 || s >= static_cast<int>(chain.symbols_.size())) throw ValidationError("bad symbol index");
    }
    for (auto& row : chain.transitions_) {
      std::sort(row.begin(), row.end(), [](const Edge& a, const Edge& b) { return a.to < b.to; });
      for (const Edge& e : row)
        if (e.to < 0 || e.to >= static_cast<int>(chain.states_.size()) || !(e.prob >= 0.0))
          throw ValidationError("bad transition entry");
    }
    for (const Symbol& s : chain.symbols_)
      if (s.ticks < 1) throw ValidationError("symbol duration < 1 tick");
    chain.reindex();
    return chain;
  }

  int order() const { return order_; }
  const std::vector<Symbol>& symbols() const { return symbols_; }
  const std::vector<std::vector<int>>& states() const { return states_; }
  const std::vector<double>& initial() const { return initial_; }
  const std::vector<Edge>& successors(int state) const { return transitions_[state]; }
  std::size_t num_states() const { return states_.size(); }

  int emitted(int state) const { return states_[state].back(); }
  const Symbol& symbol_of(int state) const { return symbols_[emitted(state)]; }
  int ticks(int state) const { return symbol_of(state).ticks; }

  /// A state with no observed successor may only end a sequence.
  bool absorbing(int state) const { return transitions_[state].empty(); }

  double transition(int from, int to) const {
    const auto& row = transitions_[from];
    auto it = std::lower_bound(row.begin(), row.end(), to, [](const Edge& e, int v) { return e.to < v; });
    return (it != row.end() && it->to == to) ? it->prob : 0.0;
  }

  int symbol_index(const Symbol& s) const {
    auto it = symbol_ids_.find(s);
    return it == symbol_ids_.end() ? -1 : it->second;
  }

  int state_index(const std::vector<int>& ctx) const {
    auto it = state_ids_.find(ctx);
    return it == state_ids_.end() ? -1 : it->second;
  }

  /// Chain states visited by a symbol sequence; -1 where a symbol or
  /// context was never observed.
  std::vector<int> states_for(const std::vector<Symbol>& seq) const {
    std::vector<int> idx;
    idx.reserve(seq.size());
    for (const Symbol& s : seq) idx.push_back(symbol_index(s));
    std::vector<int> out;
    out.reserve(seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i) {
      const std::size_t from = i + 1 >= static_cast<std::size_t>(order_) ? i + 1 - order_ : 0;
      std::vector<int> ctx(idx.begin() + from, idx.begin() + i + 1);
      const bool known = std::find(ctx.begin(), ctx.end(), -1) == ctx.end();
      out.push_back(known ? state_index(ctx) : -1);
    }
    return out;
  }

  /// Pairs of symbol indices (prev, next) emitted by some transition.
  std::vector<std::vector<bool>> symbol_bigram_support() const {
    const std::size_t v = symbols_.size();
    std::vector<std::vector<bool>> support(v, std::vector<bool>(v, false));
    for (std::size_t s = 0; s < states_.size(); ++s)
      for (const Edge& e : transitions_[s])
        if (e.prob > 0.0) support[emitted(static_cast<int>(s))][emitted(e.to)] = true;
    return support;
  }

  /// Symbols that can start a sequence.
  std::vector<bool> initial_symbol_support() const {
    std::vector<bool> support(symbols_.size(), false);
    for (std::size_t s = 0; s < states_.size(); ++s)
      if (initial_[s] > 0.0) support[emitted(static_cast<int>(s))] = true;
    return support;
  }

  bool operator==(const MarkovChain& o) const {
    if (order_ != o.order_ || symbols_ != o.symbols_ || states_ != o.states_ || initial_ != o.initial_) return false;
    if (transitions_.size() != o.transitions_.size()) return false;
    for (std::size_t s = 0; s < transitions_.size(); ++s) {
      if (transitions_[s].size() != o.transitions_[s].size()) return false;
      for (std::size_t k = 0; k < transitions_[s].size(); ++k)
        if (transitions_[s][k].to != o.transitions_[s][k].to || transitions_[s][k].prob != o.transitions_[s][k].prob)
          return false;
    }
    return true;
  }

 private:
  void reindex() {
    symbol_ids_.clear();
    state_ids_.clear();
    for (std::size_t i = 0; i < symbols_.size(); ++i) symbol_ids_.emplace(symbols_[i], static_cast<int>(i));
    for (std::size_t i = 0; i < states_.size(); ++i) state_ids_.emplace(states_[i], static_cast<int>(i));
  }

  int order_ = 1;
  std::vector<Symbol> symbols_;
  std::vector<std::vector<int>> states_;
  std::vector<double> initial_;
  std::vector<std::vector<Edge>> transitions_;
  std::map<Symbol, int> symbol_ids_;
  std::map<std::vector<int>, int> state_ids_;
};

}  // namespace variata
