#pragma once

// Corpus-trained ingredients of the two-voice lead sheet model: Markov chains
// over notes and chords, the harmonic note-given-chord model, and chord
// pitch histograms.

#include <array>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "variata/chain.hpp"
#include "variata/corpus_io.hpp"
#include "variata/errors.hpp"
#include "variata/notation.hpp"

namespace variata {

struct NoteState {
  int pitch = kRest;
  int ticks = kTicksPerQuarter;

  static NoteState of(const Note& n) { return {n.pitch, n.ticks}; }
  Note note() const { return {pitch, ticks}; }
  bool is_rest() const { return pitch == kRest; }
  auto operator<=>(const NoteState&) const = default;
};

struct ChordState {
  int root = 0;
  ChordQuality quality = ChordQuality::maj;
  int ticks = duration::kWhole;

  static ChordState of(const ChordEvent& c) { return {c.root, c.quality, c.ticks}; }
  ChordEvent event() const { return {root, quality, ticks}; }
  auto operator<=>(const ChordState&) const = default;
};

/// Chord identity without duration; keys the harmonic model and histograms.
struct ChordKey {
  int root = 0;
  ChordQuality quality = ChordQuality::maj;

  static ChordKey of(const ChordEvent& c) { return {c.root, c.quality}; }
  auto operator<=>(const ChordKey&) const = default;
};

/// Distribution of melody content sounding under one chord.
struct HarmonicRow {
  std::array<double, 12> pitch_class{};
  double rest = 0.0;

  double prob(const NoteState& e) const { return e.is_rest() ? rest : pitch_class[e.pitch % 12]; }
  bool operator==(const HarmonicRow&) const = default;
};

struct StyleModel {
  int order = 1;
  MarkovChain<NoteState> notes;
  MarkovChain<ChordState> chords;
  std::map<ChordKey, HarmonicRow> harmonic;
  std::map<ChordKey, std::array<int, 12>> histograms;

  /// Distinct (root, quality) pairs seen in the corpus.
  std::vector<ChordKey> chord_keys() const {
    std::vector<ChordKey> keys;
    for (const auto& [k, row] : harmonic) keys.push_back(k);
    return keys;
  }

  const HarmonicRow* harmonic_row(const ChordEvent& c) const {
    auto it = harmonic.find(ChordKey::of(c));
    return it == harmonic.end() ? nullptr : &it->second;
  }

  bool operator==(const StyleModel&) const = default;
};

inline StyleModel train(const std::vector<LeadSheet>& corpus, int order = 1) {
  if (corpus.empty()) throw ArgumentError("cannot train on an empty corpus");
  std::vector<std::vector<NoteState>> melodies;
  std::vector<std::vector<ChordState>> progressions;
  std::map<ChordKey, std::array<double, 13>> overlap;  // index 12 = rest

  for (const LeadSheet& sheet : corpus) {
    validate(sheet);
    std::vector<NoteState> m;
    for (const Note& n : sheet.melody.notes) m.push_back(NoteState::of(n));
    melodies.push_back(std::move(m));
    std::vector<ChordState> c;
    for (const ChordEvent& e : sheet.chords) c.push_back(ChordState::of(e));
    progressions.push_back(std::move(c));

    // Weight each note by the ticks it shares with each chord it overlaps.
    const std::vector<int> note_onsets = sheet.melody.onsets();
    int chord_onset = 0;
    std::size_t k = 0;
    for (const ChordEvent& chord : sheet.chords) {
      const int chord_end = chord_onset + chord.ticks;
      auto& row = overlap[ChordKey::of(chord)];
      while (k < note_onsets.size() && note_onsets[k] + sheet.melody[k].ticks <= chord_onset) ++k;
      for (std::size_t i = k; i < note_onsets.size() && note_onsets[i] < chord_end; ++i) {
        const int lo = std::max(note_onsets[i], chord_onset);
        const int hi = std::min(note_onsets[i] + sheet.melody[i].ticks, chord_end);
        if (hi <= lo) continue;
        const Note& n = sheet.melody[i];
        row[n.is_rest() ? 12 : n.pitch % 12] += hi - lo;
      }
      chord_onset = chord_end;
    }
  }

  StyleModel model;
  model.order = order;
  model.notes = MarkovChain<NoteState>::train(melodies, order);
  model.chords = MarkovChain<ChordState>::train(progressions, order);
  for (const auto& [key, row] : overlap) {
    double total = 0.0;
    for (double v : row) total += v;
    HarmonicRow h;
    if (total > 0.0) {
      for (int pc = 0; pc < 12; ++pc) h.pitch_class[pc] = row[pc] / total;
      h.rest = row[12] / total;
    }
    model.harmonic.emplace(key, h);
  }
  for (int root = 0; root < 12; ++root)
    for (ChordQuality q : kAllQualities) model.histograms.emplace(ChordKey{root, q}, chord_tones(root, q));
  return model;
}

/// Probability of placing `e` under the chord sounding at tick t. Chords the
/// corpus never saw give 0. The predecessor is accepted for interface
/// symmetry; the harmonic model does not condition on it.
inline double temporal_prob(const StyleModel& model, const std::vector<ChordEvent>& chords, const NoteState& e,
                            int t, const NoteState* /*prev*/ = nullptr) {
  const int idx = chord_index_at(chords, t);
  if (idx < 0) {
    throw RangeError("tick " + std::to_string(t) + " outside chord track of " +
                     std::to_string(total_ticks(chords)) + " ticks");
  }
  const HarmonicRow* row = model.harmonic_row(chords[idx]);
  return row ? row->prob(e) : 0.0;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::ordered_json symbol_json(const NoteState& s) {
  nlohmann::ordered_json j;
  j["pitch"] = s.is_rest() ? nlohmann::ordered_json("rest") : nlohmann::ordered_json(s.pitch);
  j["ticks"] = s.ticks;
  return j;
}

inline nlohmann::ordered_json symbol_json(const ChordState& s) {
  nlohmann::ordered_json j;
  j["root"] = s.root;
  j["quality"] = std::string(to_string(s.quality));
  j["ticks"] = s.ticks;
  return j;
}

inline ChordQuality read_quality(const FieldReader& r, const nlohmann::json& j, const std::string& where) {
  const std::string q = r.string(r.at(j, "quality", where), where + "/quality");
  auto quality = parse_quality(q);
  if (!quality) r.fail(where + "/quality", "unknown chord quality '" + q + "'");
  return *quality;
}

inline void read_symbol(const FieldReader& r, const nlohmann::json& j, const std::string& where, NoteState& s) {
  const auto& pitch = r.at(j, "pitch", where);
  if (pitch.is_string() && pitch.get<std::string>() == "rest") {
    s.pitch = kRest;
  } else {
    s.pitch = r.integer(pitch, where + "/pitch");
  }
  s.ticks = r.integer(r.at(j, "ticks", where), where + "/ticks");
}

inline void read_symbol(const FieldReader& r, const nlohmann::json& j, const std::string& where, ChordState& s) {
  s.root = r.integer(r.at(j, "root", where), where + "/root");
  s.quality = read_quality(r, j, where);
  s.ticks = r.integer(r.at(j, "ticks", where), where + "/ticks");
}

template <class Symbol>
void write_chain(std::ostream& os, const std::string& name, const MarkovChain<Symbol>& chain, bool last) {
  os << "  \"" << name << "\": {\n";
  os << "    \"symbols\": [";
  for (std::size_t i = 0; i < chain.symbols().size(); ++i)
    os << (i ? ",\n      " : "\n      ") << symbol_json(chain.symbols()[i]).dump();
  os << "\n    ],\n";
  os << "    \"states\": [";
  for (std::size_t s = 0; s < chain.num_states(); ++s)
    os << (s ? ",\n      " : "\n      ") << nlohmann::json(chain.states()[s]).dump();
  os << "\n    ],\n";
  nlohmann::json initial = nlohmann::json::array();
  for (std::size_t s = 0; s < chain.num_states(); ++s)
    if (chain.initial()[s] > 0.0) initial.push_back({s, chain.initial()[s]});
  os << "    \"initial\": " << initial.dump() << ",\n";
  os << "    \"transitions\": [";
  for (std::size_t s = 0; s < chain.num_states(); ++s) {
    nlohmann::json row = nlohmann::json::array();
    for (const auto& e : chain.successors(static_cast<int>(s))) row.push_back({e.to, e.prob});
    os << (s ? ",\n      " : "\n      ") << row.dump();
  }
  os << "\n    ]\n";
  os << "  }" << (last ? "\n" : ",\n");
}

template <class Symbol>
MarkovChain<Symbol> read_chain(const FieldReader& r, const nlohmann::json& j, const std::string& where, int order) {
  std::vector<Symbol> symbols;
  const auto& sym = r.array(r.at(j, "symbols", where), where + "/symbols");
  for (std::size_t i = 0; i < sym.size(); ++i) {
    Symbol s;
    read_symbol(r, sym[i], where + "/symbols/" + std::to_string(i), s);
    symbols.push_back(s);
  }
  std::vector<std::vector<int>> states;
  const auto& st = r.array(r.at(j, "states", where), where + "/states");
  for (std::size_t i = 0; i < st.size(); ++i) {
    const std::string w = where + "/states/" + std::to_string(i);
    std::vector<int> ctx;
    for (std::size_t k = 0; k < r.array(st[i], w).size(); ++k) ctx.push_back(r.integer(st[i][k], w));
    states.push_back(std::move(ctx));
  }
  std::vector<double> initial(states.size(), 0.0);
  const auto& init = r.array(r.at(j, "initial", where), where + "/initial");
  for (std::size_t i = 0; i < init.size(); ++i) {
    const std::string w = where + "/initial/" + std::to_string(i);
    if (!init[i].is_array() || init[i].size() != 2) r.fail(w, "expected [state, probability]");
    const int s = r.integer(init[i][0], w);
    if (s < 0 || s >= static_cast<int>(states.size())) r.fail(w, "state index out of range");
    initial[s] = r.real(init[i][1], w);
  }
  std::vector<std::vector<typename MarkovChain<Symbol>::Edge>> transitions;
  const auto& tr = r.array(r.at(j, "transitions", where), where + "/transitions");
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const std::string w = where + "/transitions/" + std::to_string(i);
    std::vector<typename MarkovChain<Symbol>::Edge> row;
    for (const auto& e : r.array(tr[i], w)) {
      if (!e.is_array() || e.size() != 2) r.fail(w, "expected [state, probability]");
      row.push_back({r.integer(e[0], w), r.real(e[1], w)});
    }
    transitions.push_back(std::move(row));
  }
  try {
    return MarkovChain<Symbol>::from_tables(order, std::move(symbols), std::move(states), std::move(initial),
                                            std::move(transitions));
  } catch (const ValidationError& e) {
    r.fail(where, e.what());
  }
}

}  // namespace detail

/// Canonical model text: explicit state indices and probability tables in a
/// fixed field order.
inline std::string serialize(const StyleModel& model) {
  std::ostringstream os;
  os << "{\n";
  os << "  \"order\": " << model.order << ",\n";
  detail::write_chain(os, "notes", model.notes, false);
  detail::write_chain(os, "chords", model.chords, false);
  os << "  \"harmonic\": [";
  bool first = true;
  for (const auto& [key, row] : model.harmonic) {
    nlohmann::ordered_json j;
    j["root"] = key.root;
    j["quality"] = std::string(to_string(key.quality));
    j["pitch_classes"] = row.pitch_class;
    j["rest"] = row.rest;
    os << (first ? "\n    " : ",\n    ") << j.dump();
    first = false;
  }
  os << "\n  ],\n";
  os << "  \"histograms\": [";
  first = true;
  for (const auto& [key, tones] : model.histograms) {
    nlohmann::ordered_json j;
    j["root"] = key.root;
    j["quality"] = std::string(to_string(key.quality));
    j["tones"] = tones;
    os << (first ? "\n    " : ",\n    ") << j.dump();
    first = false;
  }
  os << "\n  ]\n";
  os << "}\n";
  return os.str();
}

inline StyleModel parse_model(const std::string& text, const std::string& source = "<memory>") {
  const nlohmann::json j = detail::parse_json_text(text, source);
  detail::FieldReader r(source, j);
  StyleModel model;
  model.order = r.integer(r.at(j, "order", ""), "/order");
  if (model.order < 1) r.fail("/order", "order must be >= 1");
  model.notes = detail::read_chain<NoteState>(r, r.at(j, "notes", ""), "/notes", model.order);
  model.chords = detail::read_chain<ChordState>(r, r.at(j, "chords", ""), "/chords", model.order);
  const auto& harmonic = r.array(r.at(j, "harmonic", ""), "/harmonic");
  for (std::size_t i = 0; i < harmonic.size(); ++i) {
    const std::string w = "/harmonic/" + std::to_string(i);
    ChordKey key{r.integer(r.at(harmonic[i], "root", w), w + "/root"), detail::read_quality(r, harmonic[i], w)};
    HarmonicRow row;
    const auto& pcs = r.array(r.at(harmonic[i], "pitch_classes", w), w + "/pitch_classes");
    if (pcs.size() != 12) r.fail(w + "/pitch_classes", "expected 12 entries");
    for (int pc = 0; pc < 12; ++pc) row.pitch_class[pc] = r.real(pcs[pc], w + "/pitch_classes");
    row.rest = r.real(r.at(harmonic[i], "rest", w), w + "/rest");
    model.harmonic.emplace(key, row);
  }
  const auto& histograms = r.array(r.at(j, "histograms", ""), "/histograms");
  for (std::size_t i = 0; i < histograms.size(); ++i) {
    const std::string w = "/histograms/" + std::to_string(i);
    ChordKey key{r.integer(r.at(histograms[i], "root", w), w + "/root"), detail::read_quality(r, histograms[i], w)};
    const auto& tones = r.array(r.at(histograms[i], "tones", w), w + "/tones");
    if (tones.size() != 12) r.fail(w + "/tones", "expected 12 entries");
    std::array<int, 12> t{};
    for (int pc = 0; pc < 12; ++pc) t[pc] = r.integer(tones[pc], w + "/tones");
    model.histograms.emplace(key, t);
  }
  return model;
}

inline StyleModel load_model(const std::filesystem::path& path) {
  return parse_model(detail::read_file(path), path.string());
}

inline void save_model(const std::filesystem::path& path, const StyleModel& model) {
  detail::write_file(path, serialize(model));
}

}  // namespace variata
