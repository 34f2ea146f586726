#include <map>
#include <random>

#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include "oracles.hpp"
#include "variata/sequencegraph.hpp"
#include "variata/stylemodel.hpp"

using namespace variata;

namespace {

using Chain = MarkovChain<NoteState>;
using Edge = Chain::Edge;

const NoteState A{60, 12}, B{62, 24}, C{64, 12};

// Three symbols, two durations, every transition allowed with uneven weights.
Chain toy_chain() {
  return Chain::from_tables(1, {A, B, C}, {{0}, {1}, {2}}, {0.5, 0.3, 0.2},
                            {{{0, 0.1}, {1, 0.6}, {2, 0.3}},
                             {{0, 0.4}, {1, 0.2}, {2, 0.4}},
                             {{0, 0.7}, {1, 0.25}, {2, 0.05}}});
}

double toy_temporal(int, int sym, int onset) { return 1.0 + 0.5 * ((onset / 12 + sym) % 3); }

double toy_bias(int prev, int sym, int onset) { return prev == sym ? 0.4 : 1.0 + 0.1 * (onset % 24 == 0); }

double toy_unary(int onset, int sym) { return onset == 24 && sym == 2 ? 2.5 : 1.0; }

void decorate(Trellis<NoteState>& t, bool with_bias) {
  t.set_temporal(toy_temporal).add_unary(toy_unary);
  if (with_bias) t.set_bias(toy_bias);
}

// Exact distribution over sequences of the decorated toy model, from the
// path enumerator with factors recomputed from the raw tables.
std::map<std::vector<int>, double> enumerate_exact(const Chain& chain, int total, bool with_bias) {
  std::map<std::vector<int>, double> weights;
  double z = 0.0;
  oracle::enumerate_paths(
      3, [&](int s) { return chain.symbols()[s].ticks; }, total,
      [&](int prev, int s, int onset) {
        double m = prev < 0 ? chain.initial()[s] : chain.transition(prev, s);
        m *= toy_temporal(prev, s, onset) * toy_unary(onset, s);
        if (with_bias) m *= toy_bias(prev, s, onset);
        return m;
      },
      [&](const std::vector<int>& path, double w) {
        weights[path] = w;
        z += w;
      });
  for (auto& [path, w] : weights) w /= z;
  return weights;
}

std::vector<NoteState> symbols_of(const Chain& chain, const std::vector<int>& path) {
  std::vector<NoteState> out;
  for (int s : path) out.push_back(chain.symbols()[s]);
  return out;
}

}  // namespace

TEST(Forward, SinglePathModel) {
  const NoteState a{60, 24};
  Chain chain = Chain::from_tables(1, {a}, {{0}}, {1.0}, {{{0, 1.0}}});
  Trellis<NoteState> t(chain, 48);
  ForwardTable f = forward(t);
  EXPECT_NEAR(f.log_z, 0.0, 1e-15);
  for (const auto& s : sample(t, f, 99, 20)) {
    EXPECT_EQ(s.elements, (std::vector<NoteState>{a, a}));
    EXPECT_NEAR(s.log_prob, 0.0, 1e-15);
  }
  EXPECT_NEAR(evaluate(t, f, {a, a}).log_prob, 0.0, 1e-15);
}

TEST(Forward, PinOutsideVocabularyIsInfeasible) {
  const NoteState a{60, 24}, b{62, 24};
  Chain chain = Chain::from_tables(1, {a}, {{0}}, {1.0}, {{{0, 1.0}}});
  Trellis<NoteState> t(chain, 48);
  t.pin(0, b);
  EXPECT_THROW(forward(t), InfeasibleError);
}

TEST(Forward, UnsupportedPinNamesFrontier) {
  // B exists but can never start the sequence.
  const NoteState a{60, 24}, b{62, 24};
  Chain chain = Chain::from_tables(1, {a, b}, {{0}, {1}}, {1.0, 0.0}, {{{0, 0.5}, {1, 0.5}}, {{1, 1.0}}});
  Trellis<NoteState> t(chain, 96);
  t.pin(0, b);
  try {
    forward(t);
    FAIL() << "expected infeasible";
  } catch (const InfeasibleError& e) {
    EXPECT_NE(std::string(e.what()).find("after tick 0"), std::string::npos) << e.what();
  }
}

TEST(Forward, DurationThatCannotBeFilled) {
  const NoteState a{60, 24};
  Chain chain = Chain::from_tables(1, {a}, {{0}}, {1.0}, {{{0, 1.0}}});
  EXPECT_THROW(forward(Trellis<NoteState>(chain, 36)), InfeasibleError);
}

TEST(Forward, PartitionMatchesEnumeration) {
  Chain chain = toy_chain();
  for (int total : {12, 24, 48, 60}) {
    for (bool biased : {false, true}) {
      double z = 0.0;
      oracle::enumerate_paths(
          3, [&](int s) { return chain.symbols()[s].ticks; }, total,
          [&](int prev, int s, int onset) {
            double m = prev < 0 ? chain.initial()[s] : chain.transition(prev, s);
            m *= toy_temporal(prev, s, onset) * toy_unary(onset, s);
            return biased ? m * toy_bias(prev, s, onset) : m;
          },
          [&](const std::vector<int>&, double w) { z += w; });
      Trellis<NoteState> t(chain, total);
      decorate(t, biased);
      EXPECT_NEAR(forward(t).log_z, std::log(z), 1e-12) << total;
    }
  }
}

TEST(Evaluate, NormalizesOverEnumerableSpace) {
  Chain chain = toy_chain();
  Trellis<NoteState> t(chain, 60);
  decorate(t, true);
  ForwardTable f = forward(t);
  const auto exact = enumerate_exact(chain, 60, true);
  EXPECT_EQ(exact.size(), 70u);
  double total = 0.0;
  for (const auto& [path, p] : exact) {
    const auto scored = evaluate(t, f, symbols_of(chain, path));
    EXPECT_NEAR(std::exp(scored.log_prob), p, 1e-12);
    total += std::exp(scored.log_prob);
  }
  EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST(Evaluate, UnseenTransitionIsImpossible) {
  const NoteState a{60, 24}, b{62, 24};
  Chain chain = Chain::from_tables(1, {a, b}, {{0}, {1}}, {0.5, 0.5}, {{{1, 1.0}}, {{0, 1.0}}});
  Trellis<NoteState> t(chain, 48);
  ForwardTable f = forward(t);
  EXPECT_EQ(evaluate(t, f, {a, a}).log_prob, kNegInf);
  EXPECT_NEAR(evaluate(t, f, {a, b}).log_prob, std::log(0.5), 1e-12);
  EXPECT_THROW(evaluate(t, f, {a}), ArgumentError);
}

TEST(Sample, MatchesExactDistribution) {
  Chain chain = toy_chain();
  Trellis<NoteState> t(chain, 60);
  decorate(t, true);
  ForwardTable f = forward(t);
  const auto exact = enumerate_exact(chain, 60, true);

  const int n = 100000;
  std::map<std::vector<int>, int> counts;
  for (const auto& s : sample(t, f, 2024, n)) {
    ASSERT_EQ(exact.count(s.states), 1u);
    counts[s.states]++;
    int ticks = 0;
    for (const auto& e : s.elements) ticks += e.ticks;
    ASSERT_EQ(ticks, 60);
  }

  double tv = 0.0, chi2 = 0.0;
  int dof = -1;
  double pooled_obs = 0.0, pooled_exp = 0.0;
  for (const auto& [path, p] : exact) {
    const double obs = counts.count(path) ? counts[path] : 0.0;
    tv += std::abs(obs / n - p);
    const double expected = p * n;
    if (expected < 5.0) {
      pooled_obs += obs;
      pooled_exp += expected;
      continue;
    }
    chi2 += (obs - expected) * (obs - expected) / expected;
    ++dof;
  }
  if (pooled_exp > 0.0) {
    chi2 += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
    ++dof;
  }
  tv /= 2.0;
  EXPECT_LE(tv, 0.02);
  boost::math::chi_squared dist(dof);
  EXPECT_GT(boost::math::cdf(boost::math::complement(dist, chi2)), 1e-3) << "chi2 " << chi2 << " dof " << dof;
}

TEST(Sample, LogProbMatchesEvaluate) {
  Chain chain = toy_chain();
  Trellis<NoteState> t(chain, 48);
  decorate(t, true);
  ForwardTable f = forward(t);
  for (const auto& s : sample(t, f, 5, 200)) {
    EXPECT_NEAR(s.log_prob, evaluate(t, f, s.elements).log_prob, 1e-12);
    EXPECT_LE(s.log_prob, 0.0);
  }
}

TEST(Sample, ReproducibleFromSeedAndIndex) {
  Chain chain = toy_chain();
  Trellis<NoteState> t(chain, 60);
  decorate(t, false);
  const auto first = sample(t, 77, 50), second = sample(t, 77, 50);
  ASSERT_EQ(first.size(), second.size());
  for (std::size_t i = 0; i < first.size(); ++i) EXPECT_EQ(first[i].states, second[i].states);
  // draw i depends only on (seed, i)
  ForwardTable f = forward(t);
  std::mt19937_64 rng(sub_seed(77, 17));
  EXPECT_EQ(sample_one(t, f, rng).states, first[17].states);
  bool differs = false;
  for (const auto& s : sample(t, 78, 50)) differs |= s.states != first[0].states;
  EXPECT_TRUE(differs);
}

TEST(Pins, SampledSequencesHonorPins) {
  Chain chain = toy_chain();
  std::mt19937 rng(8);
  for (int trial = 0; trial < 40; ++trial) {
    Trellis<NoteState> t(chain, 96);
    decorate(t, true);
    const int start = 12 * static_cast<int>(rng() % 7);
    const NoteState pinned = chain.symbols()[rng() % 3];
    t.pin(start, pinned);
    const bool split = trial % 2 && (start >= 48 || start + pinned.ticks <= 48);
    if (split) t.require_boundary(48);
    ForwardTable f = forward(t);
    for (const auto& s : sample(t, f, trial, 50)) {
      int onset = 0;
      bool found = false, boundary = false;
      for (const auto& e : s.elements) {
        if (onset == start) found = e == pinned;
        boundary |= onset == 48;
        onset += e.ticks;
      }
      EXPECT_TRUE(found);
      EXPECT_TRUE(boundary || !split);
    }
  }
}

TEST(Pins, FullyPinnedSequenceHasProbabilityOne) {
  Chain chain = toy_chain();
  Trellis<NoteState> t(chain, 60);
  decorate(t, true);
  const std::vector<NoteState> seq = {A, B, C, A};
  int onset = 0;
  for (const auto& e : seq) {
    t.pin(onset, e);
    onset += e.ticks;
  }
  ForwardTable f = forward(t);
  EXPECT_NEAR(evaluate(t, f, seq).log_prob, 0.0, 1e-12);
  EXPECT_EQ(evaluate(t, f, {A, A, B, C}).log_prob, kNegInf);
}

TEST(Pins, OverlapAndRangeRejected) {
  Chain chain = toy_chain();
  Trellis<NoteState> t(chain, 48);
  t.pin(0, B);
  EXPECT_THROW(t.pin(12, A), ArgumentError);
  EXPECT_THROW(t.pin(48, A), ArgumentError);
  EXPECT_THROW(t.require_boundary(49), ArgumentError);
}

TEST(Factorization, BiasRatioIdentityBothRenormModes) {
  Chain chain = toy_chain();
  for (BiasRenorm mode : {BiasRenorm::global, BiasRenorm::local}) {
    Trellis<NoteState> plain(chain, 60), biased(chain, 60);
    decorate(plain, false);
    decorate(biased, true);
    biased.set_bias_renorm(mode);
    ForwardTable fo = forward(plain), fb = forward(biased);
    for (const auto& s : sample(biased, fb, 3, 300)) {
      const double lpb = evaluate(biased, fb, s.elements).log_prob;
      const double lpo = evaluate(plain, fo, s.elements).log_prob;
      EXPECT_NEAR(lpb - lpo, log_bias_product(biased, s.states) - (fb.log_z - fo.log_z), 1e-9);
    }
  }
}

TEST(Factorization, LocalRenormPreservesRowMass) {
  Chain chain = toy_chain();
  Trellis<NoteState> t(chain, 60);
  decorate(t, true);
  t.set_bias_renorm(BiasRenorm::local);
  for (int prev = 0; prev < 3; ++prev) {
    for (int onset = 0; onset < 60; onset += 12) {
      double plain = 0.0, biased = 0.0;
      for (int s = 0; s < 3; ++s) {
        const double base = t.markov(prev, s) * t.temporal(prev, s, onset);
        plain += base;
        biased += base * t.bias(prev, s, onset);
      }
      EXPECT_NEAR(biased, plain, 1e-12);
    }
  }
}

TEST(HigherOrder, TrellisOverContextStates) {
  LeadSheet s;
  s.chords = {{0, ChordQuality::maj, 96}, {0, ChordQuality::maj, 96}};
  s.melody.notes = {{60, 24}, {62, 24}, {64, 24}, {62, 24}, {60, 24}, {62, 24}, {64, 48}};
  StyleModel model = train({s}, 2);
  Trellis<NoteState> t(model.notes, 192);
  ForwardTable f = forward(t);
  for (const auto& seq : sample(t, f, 1, 100)) {
    for (std::size_t i = 1; i < seq.states.size(); ++i)
      EXPECT_GT(model.notes.transition(seq.states[i - 1], seq.states[i]), 0.0);
    EXPECT_NEAR(evaluate(t, f, seq.elements).log_prob, seq.log_prob, 1e-12);
  }
}
