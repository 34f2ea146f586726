#pragma once

// Structured lead sheets: a bar-level plan of free bars, copies, transposed
// copies and variations, resolved into a generation order and executed
// against a style model with already-determined bars pinned.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "variata/corpus_io.hpp"
#include "variata/errors.hpp"
#include "variata/notation.hpp"
#include "variata/sequencegraph.hpp"
#include "variata/similarity.hpp"
#include "variata/stylemodel.hpp"
#include "variata/variation.hpp"

namespace variata {

/// Inclusive range of 1-based bar numbers.
struct BarRange {
  int first = 1;
  int last = 1;

  int size() const { return last - first + 1; }
  bool contains(int bar) const { return bar >= first && bar <= last; }
  auto operator<=>(const BarRange&) const = default;
};

enum class DirectiveKind { free, copy, transposed_copy, variation, harmony_transpose };

inline std::string_view to_string(DirectiveKind k) {
  switch (k) {
    case DirectiveKind::free: return "free";
    case DirectiveKind::copy: return "copy";
    case DirectiveKind::transposed_copy: return "transposed_copy";
    case DirectiveKind::variation: return "variation";
    case DirectiveKind::harmony_transpose: return "harmony_transpose";
  }
  return "?";
}

inline std::optional<DirectiveKind> parse_directive_kind(std::string_view s) {
  for (DirectiveKind k : {DirectiveKind::free, DirectiveKind::copy, DirectiveKind::transposed_copy,
                          DirectiveKind::variation, DirectiveKind::harmony_transpose}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

struct Directive {
  BarRange target;
  DirectiveKind kind = DirectiveKind::free;
  std::optional<BarRange> source;
  int semitones = 0;  // transposition applied to the source (variation: to the theme and its chords)
  double alpha = 0.0;

  bool operator==(const Directive&) const = default;
};

/// Bar 1 is the pickup when pickup_ticks > 0; bars_total counts it.
struct StructurePlan {
  int bars_total = 1;
  int beats_per_bar = 4;
  int pickup_ticks = 0;
  std::vector<Directive> directives;

  int bar_ticks() const { return beats_per_bar * kTicksPerQuarter; }
  int bar_start(int bar) const {
    if (pickup_ticks == 0) return (bar - 1) * bar_ticks();
    return bar == 1 ? 0 : pickup_ticks + (bar - 2) * bar_ticks();
  }
  int bar_end(int bar) const { return bar_start(bar + 1); }
  int range_start(const BarRange& r) const { return bar_start(r.first); }
  int range_end(const BarRange& r) const { return bar_end(r.last); }
  int total_ticks() const { return bar_end(bars_total); }

  bool operator==(const StructurePlan&) const = default;
};

inline void validate(const StructurePlan& plan) {
  auto fail = [](const std::string& what) { throw PlanError("plan: " + what); };
  if (plan.bars_total < 1) fail("bars_total must be positive");
  if (plan.beats_per_bar < 1) fail("beats_per_bar must be positive");
  if (plan.pickup_ticks < 0 || plan.pickup_ticks >= plan.bar_ticks()) fail("pickup_ticks must be shorter than a bar");

  std::vector<int> owner(plan.bars_total + 1, -1);
  for (std::size_t i = 0; i < plan.directives.size(); ++i) {
    const Directive& d = plan.directives[i];
    const std::string where = "directive " + std::to_string(i) + ": ";
    auto in_range = [&](const BarRange& r) { return r.first >= 1 && r.first <= r.last && r.last <= plan.bars_total; };
    if (!in_range(d.target)) fail(where + "target outside bars 1-" + std::to_string(plan.bars_total));
    for (int b = d.target.first; b <= d.target.last; ++b) {
      if (owner[b] >= 0) {
        fail("bar " + std::to_string(b) + " covered by directives " + std::to_string(owner[b]) + " and " +
             std::to_string(i));
      }
      owner[b] = static_cast<int>(i);
    }
    if (d.kind == DirectiveKind::free) {
      if (d.source) fail(where + "free bars take no source");
      continue;
    }
    if (!d.source) fail(where + std::string(to_string(d.kind)) + " needs a source");
    if (!in_range(*d.source)) fail(where + "source outside bars 1-" + std::to_string(plan.bars_total));
    if (d.source->size() != d.target.size()) fail(where + "source and target differ in bar count");
    for (int k = 0; k < d.target.size(); ++k) {
      const int s = d.source->first + k, t = d.target.first + k;
      if (plan.bar_end(s) - plan.bar_start(s) != plan.bar_end(t) - plan.bar_start(t)) {
        fail(where + "bar " + std::to_string(s) + " and bar " + std::to_string(t) + " differ in length");
      }
    }
    if (d.kind == DirectiveKind::copy && d.semitones != 0) fail(where + "copy takes no transposition");
    if (d.kind == DirectiveKind::variation && !(d.alpha >= 0.0 && d.alpha <= 1.0)) fail(where + "alpha outside [0, 1]");
  }
  for (int b = 1; b <= plan.bars_total; ++b)
    if (owner[b] < 0) fail("bar " + std::to_string(b) + " is not covered by any directive");
}

inline StructurePlan plan_from_json(const nlohmann::json& j, const std::string& source) {
  detail::FieldReader r(source, j);
  StructurePlan plan;
  plan.bars_total = r.integer(r.at(j, "bars_total", ""), "/bars_total");
  plan.beats_per_bar = r.integer(r.at(j, "beats_per_bar", ""), "/beats_per_bar");
  plan.pickup_ticks = r.integer(r.at(j, "pickup_ticks", ""), "/pickup_ticks");
  auto range = [&](const nlohmann::json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 2) r.fail(where, "expected [first, last]");
    return BarRange{r.integer(v[0], where + "/0"), r.integer(v[1], where + "/1")};
  };
  const auto& ds = r.array(r.at(j, "directives", ""), "/directives");
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::string where = "/directives/" + std::to_string(i);
    Directive d;
    d.target = range(r.at(ds[i], "target", where), where + "/target");
    const std::string kind = r.string(r.at(ds[i], "kind", where), where + "/kind");
    const auto k = parse_directive_kind(kind);
    if (!k) r.fail(where + "/kind", "unknown directive kind '" + kind + "'");
    d.kind = *k;
    if (ds[i].contains("source")) d.source = range(ds[i]["source"], where + "/source");
    const bool needs_semitones = d.kind == DirectiveKind::transposed_copy || d.kind == DirectiveKind::harmony_transpose;
    if (ds[i].contains("semitones")) {
      d.semitones = r.integer(ds[i]["semitones"], where + "/semitones");
    } else if (needs_semitones) {
      r.fail(where + "/semitones", "missing field");
    }
    if (ds[i].contains("alpha")) {
      d.alpha = r.real(ds[i]["alpha"], where + "/alpha");
    } else if (d.kind == DirectiveKind::variation) {
      r.fail(where + "/alpha", "missing field");
    }
    plan.directives.push_back(d);
  }
  try {
    validate(plan);
  } catch (const PlanError& e) {
    throw PlanError(source + ": " + e.what());
  }
  return plan;
}

inline StructurePlan parse_plan(const std::string& text, const std::string& source = "<memory>") {
  return plan_from_json(detail::parse_json_text(text, source), source);
}

inline StructurePlan load_plan(const std::filesystem::path& path) {
  return parse_plan(detail::read_file(path), path.string());
}

inline std::string serialize(const StructurePlan& plan) {
  nlohmann::ordered_json j;
  j["bars_total"] = plan.bars_total;
  j["beats_per_bar"] = plan.beats_per_bar;
  j["pickup_ticks"] = plan.pickup_ticks;
  j["directives"] = nlohmann::ordered_json::array();
  for (const Directive& d : plan.directives) {
    nlohmann::ordered_json e;
    e["target"] = {d.target.first, d.target.last};
    e["kind"] = std::string(to_string(d.kind));
    if (d.source) e["source"] = {d.source->first, d.source->last};
    if (d.kind != DirectiveKind::free && d.kind != DirectiveKind::copy) e["semitones"] = d.semitones;
    if (d.kind == DirectiveKind::variation) e["alpha"] = d.alpha;
    j["directives"].push_back(e);
  }
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Resolution
// ---------------------------------------------------------------------------

enum class Voice { chords, melody };

/// generate: sample with pins. copy / transpose: derive from the source.
/// vary: sample biased toward the (transposed) source.
enum class StepAction { generate, copy, transpose, vary };

inline std::string_view to_string(StepAction a) {
  switch (a) {
    case StepAction::generate: return "generate";
    case StepAction::copy: return "copy";
    case StepAction::transpose: return "transpose";
    case StepAction::vary: return "vary";
  }
  return "?";
}

struct ScheduleStep {
  BarRange bars;
  StepAction action = StepAction::generate;
  std::optional<BarRange> source;
  int semitones = 0;
  double alpha = 0.0;
  std::vector<int> pins;  // bars already determined when the step runs

  bool derived() const { return action == StepAction::copy || action == StepAction::transpose; }
  bool operator==(const ScheduleStep&) const = default;
};

struct GenerationSchedule {
  Voice voice = Voice::melody;
  std::vector<ScheduleStep> steps;
};

namespace detail {

struct Unit {
  BarRange bars;
  StepAction action;
  std::optional<BarRange> source;
  int semitones = 0;
  double alpha = 0.0;
  std::vector<int> deps;
};

inline std::vector<Unit> plan_units(const StructurePlan& plan, Voice voice) {
  std::vector<Unit> units;
  for (const Directive& d : plan.directives) {
    StepAction action = StepAction::generate;
    switch (d.kind) {
      case DirectiveKind::free: break;
      case DirectiveKind::copy: action = StepAction::copy; break;
      case DirectiveKind::transposed_copy: action = StepAction::transpose; break;
      case DirectiveKind::variation:
        if (voice == Voice::melody) {
          action = StepAction::vary;
        } else {
          action = d.semitones == 0 ? StepAction::copy : StepAction::transpose;
        }
        break;
      case DirectiveKind::harmony_transpose:
        if (voice == Voice::chords) action = StepAction::transpose;
        break;
    }
    if (action == StepAction::vary) {
      Unit u{d.target, action, d.source, d.semitones, d.alpha, {}};
      for (int b = d.source->first; b <= d.source->last; ++b) u.deps.push_back(b);
      units.push_back(u);
      continue;
    }
    for (int k = 0; k < d.target.size(); ++k) {
      Unit u{{d.target.first + k, d.target.first + k}, action, std::nullopt, 0, 0.0, {}};
      if (action != StepAction::generate) {
        const int s = d.source->first + k;
        u.source = BarRange{s, s};
        u.semitones = action == StepAction::transpose ? d.semitones : 0;
        u.deps.push_back(s);
      }
      units.push_back(u);
    }
  }
  std::sort(units.begin(), units.end(), [](const Unit& a, const Unit& b) { return a.bars.first < b.bars.first; });
  return units;
}

}  // namespace detail

/// Orders the plan's bars for generation. Copies are materialized as soon as
/// their source exists and become pins for everything generated later;
/// sampled bars go left to right whenever their dependencies allow.
inline GenerationSchedule resolve(const StructurePlan& plan, Voice voice = Voice::melody) {
  validate(plan);
  const std::vector<detail::Unit> units = detail::plan_units(plan, voice);
  std::vector<bool> done_bar(plan.bars_total + 1, false), done_unit(units.size(), false);
  auto ready = [&](const detail::Unit& u) {
    return std::all_of(u.deps.begin(), u.deps.end(), [&](int b) { return done_bar[b]; });
  };

  GenerationSchedule sched;
  sched.voice = voice;
  auto emit = [&](std::size_t i) {
    const detail::Unit& u = units[i];
    std::vector<int> pins;
    for (int b = 1; b <= plan.bars_total; ++b)
      if (done_bar[b]) pins.push_back(b);
    done_unit[i] = true;
    for (int b = u.bars.first; b <= u.bars.last; ++b) done_bar[b] = true;

    if (!sched.steps.empty()) {
      ScheduleStep& last = sched.steps.back();
      const bool adjacent = last.bars.last + 1 == u.bars.first && last.action == u.action;
      if (adjacent && u.action == StepAction::generate) {
        last.bars.last = u.bars.last;
        return;
      }
      if (adjacent && last.derived() && last.semitones == u.semitones && last.source->last + 1 == u.source->first) {
        last.bars.last = u.bars.last;
        last.source->last = u.source->last;
        return;
      }
    }
    sched.steps.push_back({u.bars, u.action, u.source, u.semitones, u.alpha, std::move(pins)});
  };

  std::size_t remaining = units.size();
  while (remaining > 0) {
    bool derived_any = true;
    while (derived_any) {
      derived_any = false;
      for (std::size_t i = 0; i < units.size(); ++i) {
        if (done_unit[i] || !(units[i].action == StepAction::copy || units[i].action == StepAction::transpose)) continue;
        if (!ready(units[i])) continue;
        emit(i);
        --remaining;
        derived_any = true;
      }
    }
    if (remaining == 0) break;
    std::size_t pick = units.size();
    for (std::size_t i = 0; i < units.size() && pick == units.size(); ++i) {
      const bool sampled = units[i].action == StepAction::generate || units[i].action == StepAction::vary;
      if (!done_unit[i] && sampled && ready(units[i])) pick = i;
    }
    if (pick == units.size()) {
      // Every remaining unit waits on an undetermined bar; follow the waits to a cycle.
      auto unit_of = [&](int bar) {
        for (std::size_t i = 0; i < units.size(); ++i)
          if (units[i].bars.contains(bar)) return i;
        return units.size();
      };
      std::size_t cur = 0;
      while (done_unit[cur]) ++cur;
      std::vector<std::size_t> path;
      while (std::find(path.begin(), path.end(), cur) == path.end()) {
        path.push_back(cur);
        for (int b : units[cur].deps) {
          if (!done_bar[b]) {
            cur = unit_of(b);
            break;
          }
        }
      }
      std::string cycle;
      for (auto it = std::find(path.begin(), path.end(), cur); it != path.end(); ++it)
        cycle += "bar " + std::to_string(units[*it].bars.first) + " <- ";
      cycle += "bar " + std::to_string(units[cur].bars.first);
      throw PlanError("plan: cyclic dependencies: " + cycle);
    }
    emit(pick);
    --remaining;
  }
  return sched;
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

struct ComposeOptions {
  WeightParams params;
  BiasRenorm renorm = BiasRenorm::global;
  int attempts_per_step = 16;  // failed draws of a step before backtracking
  int max_draws = 4000;        // over the whole voice
};

/// Two-voice sampling without structure: a chord track of `total_ticks`,
/// then a melody under it.
inline LeadSheet sample_lead_sheet(const StyleModel& model, int total_ticks, int beats_per_bar, int pickup_ticks,
                                   std::uint64_t seed) {
  LeadSheet sheet;
  sheet.beats_per_bar = beats_per_bar;
  sheet.pickup_ticks = pickup_ticks;
  Trellis<ChordState> chords(model.chords, total_ticks);
  std::mt19937_64 rng(sub_seed(seed, 0));
  sheet.chords = to_events(sample_one(chords, forward(chords), rng).elements);
  Trellis<NoteState> notes(model.notes, total_ticks);
  notes.set_temporal(harmonic_factor(model, sheet.chords));
  rng.seed(sub_seed(seed, 1));
  sheet.melody = to_melody(sample_one(notes, forward(notes), rng).elements);
  validate(sheet);
  return sheet;
}

namespace detail {

template <class Event>
struct BarTrack {
  std::vector<std::optional<std::vector<Event>>> bars;  // index 1..bars_total

  explicit BarTrack(int n) : bars(n + 1) {}

  std::vector<Event> range(const BarRange& r) const {
    std::vector<Event> out;
    for (int b = r.first; b <= r.last; ++b) out.insert(out.end(), bars[b]->begin(), bars[b]->end());
    return out;
  }
};

inline std::vector<ChordEvent> shifted(const std::vector<ChordEvent>& v, int k) { return transpose(v, k); }
inline std::vector<Note> shifted(const std::vector<Note>& v, int k) { return transpose(Melody(v), k).notes; }

inline ChordState as_symbol(const ChordEvent& c) { return ChordState::of(c); }
inline NoteState as_symbol(const Note& n) { return NoteState::of(n); }

template <class Symbol, class Event>
Trellis<Symbol> pinned_trellis(const MarkovChain<Symbol>& chain, const StructurePlan& plan,
                               const BarTrack<Event>& track) {
  Trellis<Symbol> trellis(chain, plan.total_ticks());
  for (int b = 1; b <= plan.bars_total; ++b) {
    trellis.require_boundary(plan.bar_start(b));
    if (!track.bars[b]) continue;
    int t = plan.bar_start(b);
    for (const Event& e : *track.bars[b]) {
      trellis.pin(t, as_symbol(e));
      t += e.ticks;
    }
  }
  return trellis;
}

template <class Event, class Symbol>
void assign_bars(const StructurePlan& plan, const BarRange& bars, const std::vector<Symbol>& elements,
                 BarTrack<Event>& track) {
  for (int b = bars.first; b <= bars.last; ++b) track.bars[b].emplace();
  int t = 0;
  for (const Symbol& s : elements) {
    for (int b = bars.first; b <= bars.last; ++b) {
      if (t >= plan.bar_start(b) && t < plan.bar_end(b)) {
        if constexpr (std::is_same_v<Event, Note>) {
          track.bars[b]->push_back(s.note());
        } else {
          track.bars[b]->push_back(ChordEvent{s.root, s.quality, s.ticks});
        }
      }
    }
    t += s.ticks;
  }
}

inline std::string step_name(Voice voice, std::size_t index, const ScheduleStep& step) {
  return std::string(voice == Voice::chords ? "chord" : "melody") + " step " + std::to_string(index) + " (" +
         std::string(to_string(step.action)) + " bars " + std::to_string(step.bars.first) + "-" +
         std::to_string(step.bars.last) + ")";
}

/// Runs one voice's schedule. `configure(trellis, step, track)` adds the
/// voice's factors to a pinned trellis; `step` is null for feasibility checks.
/// A sampled step keeps only its own bars of the full-length draw.
template <class Symbol, class Event, class Configure>
BarTrack<Event> run_voice(const StructurePlan& plan, const GenerationSchedule& sched, const MarkovChain<Symbol>& chain,
                          std::uint64_t seed, const ComposeOptions& opts, Configure configure) {
  BarTrack<Event> track(plan.bars_total);
  auto apply_derived = [&](const ScheduleStep& step) {
    for (int k = 0; k < step.bars.size(); ++k) {
      const std::vector<Event>& src = *track.bars[step.source->first + k];
      track.bars[step.bars.first + k] = step.semitones == 0 ? src : shifted(src, step.semitones);
    }
  };

  {
    auto t = pinned_trellis(chain, plan, track);
    configure(t, nullptr, track);
    try {
      forward(t);
    } catch (const InfeasibleError& e) {
      throw InfeasibleError(std::string("structural infeasibility before the first ") +
                            (sched.voice == Voice::chords ? "chord" : "melody") + " step: " + e.what());
    }
  }

  // Group each sampled step with the derived steps that follow it.
  struct Group {
    std::size_t begin, end;
  };
  std::vector<Group> groups;
  for (std::size_t i = 0; i < sched.steps.size();) {
    std::size_t end = i + 1;
    while (end < sched.steps.size() && sched.steps[end].derived()) ++end;
    groups.push_back({i, end});
    i = end;
  }

  // Generate-and-test with chronological backtracking: a group that fails
  // `attempts_per_step` draws in a row hands the failure to the group before it.
  std::vector<BarTrack<Event>> saved;
  std::vector<int> tries(groups.size(), 0), draws(groups.size(), 0);
  int budget = opts.max_draws, deepest = -1;
  std::string deepest_error;
  std::size_t g = 0;
  while (g < groups.size()) {
    const ScheduleStep& step = sched.steps[groups[g].begin];
    if (saved.size() <= g) saved.push_back(track);
    track = saved[g];
    if (step.derived()) {
      // only reachable for a schedule that opens with derived steps
      for (std::size_t j = groups[g].begin; j < groups[g].end; ++j) apply_derived(sched.steps[j]);
      ++g;
      continue;
    }
    if (tries[g] == opts.attempts_per_step || budget == 0) {
      if (g == 0 || budget == 0) {
        const ScheduleStep& failed = sched.steps[groups[deepest].begin];
        throw InfeasibleError("structural infeasibility at " + step_name(sched.voice, groups[deepest].begin, failed) +
                              " after " + std::to_string(opts.max_draws - budget) + " draws: " + deepest_error);
      }
      tries[g] = 0;
      saved.pop_back();
      --g;
      continue;
    }
    ++tries[g];
    --budget;
    auto trellis = pinned_trellis(chain, plan, track);
    configure(trellis, &step, track);
    std::mt19937_64 rng(sub_seed(sub_seed(seed, groups[g].begin), static_cast<std::uint64_t>(draws[g]++)));
    const auto drawn = sample_one(trellis, forward(trellis), rng);
    assign_bars(plan, step.bars, drawn.elements, track);
    try {
      for (std::size_t j = groups[g].begin + 1; j < groups[g].end; ++j) apply_derived(sched.steps[j]);
      auto check = pinned_trellis(chain, plan, track);
      configure(check, nullptr, track);
      forward(check);
    } catch (const std::exception& e) {
      if (static_cast<int>(g) >= deepest) {
        deepest = static_cast<int>(g);
        deepest_error = e.what();
      }
      continue;
    }
    tries[g] = 0;
    saved.erase(saved.begin() + static_cast<std::ptrdiff_t>(g) + 1, saved.end());
    ++g;
  }
  return track;
}

}  // namespace detail

/// Generates a lead sheet following `plan`: the chord track first, then the
/// melody under it, each voice in its resolved order.
inline LeadSheet execute(const StructurePlan& plan, const StyleModel& model, std::uint64_t seed,
                         const ComposeOptions& opts = {}) {
  const GenerationSchedule chord_sched = resolve(plan, Voice::chords);
  const GenerationSchedule melody_sched = resolve(plan, Voice::melody);

  const auto chords = detail::run_voice<ChordState, ChordEvent>(
      plan, chord_sched, model.chords, sub_seed(seed, 0), opts,
      [](Trellis<ChordState>&, const ScheduleStep*, const detail::BarTrack<ChordEvent>&) {});
  LeadSheet sheet;
  sheet.beats_per_bar = plan.beats_per_bar;
  sheet.pickup_ticks = plan.pickup_ticks;
  sheet.chords = chords.range({1, plan.bars_total});
  const auto temporal = harmonic_factor(model, sheet.chords);

  const ScheduleStep* bias_step = nullptr;
  std::shared_ptr<const BiasTable> bias;
  const auto melody = detail::run_voice<NoteState, Note>(
      plan, melody_sched, model.notes, sub_seed(seed, 1), opts,
      [&](Trellis<NoteState>& t, const ScheduleStep* step, const detail::BarTrack<Note>& track) {
        t.set_temporal(temporal);
        if (!step || step->action != StepAction::vary) return;
        if (bias_step != step) {
          const Melody theme = transpose(Melody(track.range(*step->source)), step->semitones);
          bias = std::make_shared<const BiasTable>(build_bias_at(theme, model.notes, plan.range_start(step->bars),
                                                                 plan.total_ticks(), opts.params, step->alpha));
          bias_step = step;
        }
        t.set_bias(bias_factor(bias)).set_bias_renorm(opts.renorm);
      });
  sheet.melody.notes = melody.range({1, plan.bars_total});
  validate(sheet);
  return sheet;
}

// ---------------------------------------------------------------------------
// Audit
// ---------------------------------------------------------------------------

/// Notes of bars `r`, taken from a generated lead sheet.
inline Melody bar_melody(const StructurePlan& plan, const LeadSheet& sheet, const BarRange& r) {
  return slice(sheet.melody, plan.range_start(r), plan.range_end(r));
}

inline std::vector<ChordEvent> bar_chords(const StructurePlan& plan, const LeadSheet& sheet, const BarRange& r) {
  return slice(sheet.chords, plan.range_start(r), plan.range_end(r));
}

struct AuditReport {
  bool total_ok = true;
  int copy_bars = 0, copy_failures = 0;
  int transposed_bars = 0, transposed_failures = 0;
  int harmony_bars = 0, harmony_failures = 0;
  std::vector<std::string> problems;

  bool ok() const { return total_ok && copy_failures == 0 && transposed_failures == 0 && harmony_failures == 0; }
};

/// Checks a generated lead sheet against the plan using the output alone:
/// total duration, copied bars note-identical, transposed copies equal in
/// rhythm with one constant pitch offset, transposed harmony under
/// harmony_transpose and variation bars.
inline AuditReport audit(const StructurePlan& plan, const LeadSheet& sheet) {
  AuditReport rep;
  if (sheet.total_ticks() != plan.total_ticks() || sheet.melody.total_ticks() != plan.total_ticks() ||
      total_ticks(sheet.chords) != plan.total_ticks()) {
    rep.total_ok = false;
    rep.problems.push_back("total duration differs from the plan");
  }
  for (const Directive& d : plan.directives) {
    for (int k = 0; k < d.target.size(); ++k) {
      const BarRange tb{d.target.first + k, d.target.first + k};
      const std::string label = "bar " + std::to_string(tb.first);
      if (d.kind == DirectiveKind::copy) {
        const BarRange sb{d.source->first + k, d.source->first + k};
        ++rep.copy_bars;
        if (bar_melody(plan, sheet, tb) != bar_melody(plan, sheet, sb) ||
            bar_chords(plan, sheet, tb) != bar_chords(plan, sheet, sb)) {
          ++rep.copy_failures;
          rep.problems.push_back(label + " is not a copy of bar " + std::to_string(sb.first));
        }
      } else if (d.kind == DirectiveKind::transposed_copy) {
        const BarRange sb{d.source->first + k, d.source->first + k};
        ++rep.transposed_bars;
        const Melody a = bar_melody(plan, sheet, sb), b = bar_melody(plan, sheet, tb);
        bool same = a.size() == b.size();
        std::optional<int> offset;
        for (std::size_t i = 0; same && i < a.size(); ++i) {
          same = a.notes[i].ticks == b.notes[i].ticks && a.notes[i].is_rest() == b.notes[i].is_rest();
          if (!same || a.notes[i].is_rest()) continue;
          const int o = b.notes[i].pitch - a.notes[i].pitch;
          if (!offset) offset = o;
          same = *offset == o;
        }
        if (same && offset && *offset != d.semitones) same = false;
        if (!same) {
          ++rep.transposed_failures;
          rep.problems.push_back(label + " is not bar " + std::to_string(sb.first) + " transposed by " +
                                 std::to_string(d.semitones));
        }
      } else if (d.kind == DirectiveKind::harmony_transpose || d.kind == DirectiveKind::variation) {
        const BarRange sb{d.source->first + k, d.source->first + k};
        ++rep.harmony_bars;
        if (bar_chords(plan, sheet, tb) != transpose(bar_chords(plan, sheet, sb), d.semitones)) {
          ++rep.harmony_failures;
          rep.problems.push_back(label + " harmony is not bar " + std::to_string(sb.first) + " transposed");
        }
      }
    }
  }
  return rep;
}

/// ms_distance between each variation target and its (transposed) source,
/// one entry per variation directive.
inline std::vector<double> variation_distances(const StructurePlan& plan, const LeadSheet& sheet,
                                               const WeightParams& params = {}) {
  std::vector<double> out;
  for (const Directive& d : plan.directives) {
    if (d.kind != DirectiveKind::variation) continue;
    const Melody theme = transpose(bar_melody(plan, sheet, *d.source), d.semitones);
    out.push_back(ms_distance(bar_melody(plan, sheet, d.target), theme, params).distance);
  }
  return out;
}

/// The plan with every variation directive set to `alpha`.
inline StructurePlan with_variation_alpha(StructurePlan plan, double alpha) {
  check_alpha(alpha);
  for (Directive& d : plan.directives)
    if (d.kind == DirectiveKind::variation) d.alpha = alpha;
  return plan;
}

}  // namespace variata
