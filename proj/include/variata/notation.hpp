#pragma once

// Symbolic music domain types: notes and rests on an integer tick grid,
// chord events, and two-voice lead sheets.

#include <algorithm>
#include <array>
#include <compare>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "variata/errors.hpp"

namespace variata {

/// Tick grid resolution. All durations are integer multiples of one tick.
inline constexpr int kTicksPerQuarter = 24;

namespace duration {
inline constexpr int kWhole = 96;
inline constexpr int kDottedHalf = 72;
inline constexpr int kHalf = 48;
inline constexpr int kDottedQuarter = 36;
inline constexpr int kQuarter = 24;
inline constexpr int kDottedEighth = 18;
inline constexpr int kEighth = 12;
inline constexpr int kTripletEighth = 8;
inline constexpr int kSixteenth = 6;
}  // namespace duration

inline constexpr int kRest = -1;
inline constexpr int kMaxPitch = 127;

/// A pitched note or a rest. Rests carry `pitch == kRest` and are ordinary
/// elements of a melody.
struct Note {
  int pitch = kRest;
  int ticks = kTicksPerQuarter;

  static constexpr Note rest(int ticks) { return Note{kRest, ticks}; }

  constexpr bool is_rest() const { return pitch == kRest; }
  constexpr int pitch_class() const { return is_rest() ? kRest : pitch % 12; }

  auto operator<=>(const Note&) const = default;
};

inline bool valid_pitch(int pitch) { return pitch == kRest || (pitch >= 0 && pitch <= kMaxPitch); }

inline void validate(const Note& note) {
  if (!valid_pitch(note.pitch)) {
    throw ValidationError("note pitch " + std::to_string(note.pitch) + " outside 0-127");
  }
  if (note.ticks < 1) {
    throw ValidationError("note duration " + std::to_string(note.ticks) + " < 1 tick");
  }
}

/// Contiguous sequence of notes; the onset of note k is the sum of the
/// durations before it.
struct Melody {
  std::vector<Note> notes;

  Melody() = default;
  explicit Melody(std::vector<Note> n) : notes(std::move(n)) {}

  int total_ticks() const {
    return std::accumulate(notes.begin(), notes.end(), 0,
                           [](int acc, const Note& n) { return acc + n.ticks; });
  }
  std::size_t size() const { return notes.size(); }
  bool empty() const { return notes.empty(); }
  const Note& operator[](std::size_t i) const { return notes[i]; }

  std::vector<int> onsets() const {
    std::vector<int> out;
    out.reserve(notes.size());
    int t = 0;
    for (const Note& n : notes) {
      out.push_back(t);
      t += n.ticks;
    }
    return out;
  }

  bool operator==(const Melody&) const = default;
};

enum class ChordQuality { maj, min, dom7, maj7, min7, m7b5, dim, aug };

inline constexpr std::array<ChordQuality, 8> kAllQualities = {
    ChordQuality::maj,  ChordQuality::min,  ChordQuality::dom7, ChordQuality::maj7,
    ChordQuality::min7, ChordQuality::m7b5, ChordQuality::dim,  ChordQuality::aug};

inline std::string_view to_string(ChordQuality q) {
  switch (q) {
    case ChordQuality::maj: return "maj";
    case ChordQuality::min: return "min";
    case ChordQuality::dom7: return "dom7";
    case ChordQuality::maj7: return "maj7";
    case ChordQuality::min7: return "min7";
    case ChordQuality::m7b5: return "m7b5";
    case ChordQuality::dim: return "dim";
    case ChordQuality::aug: return "aug";
  }
  throw ArgumentError("unknown chord quality");
}

inline std::optional<ChordQuality> parse_quality(std::string_view s) {
  for (ChordQuality q : kAllQualities) {
    if (to_string(q) == s) return q;
  }
  return std::nullopt;
}

/// Intervals above the root, in semitones.
inline std::vector<int> quality_intervals(ChordQuality q) {
  switch (q) {
    case ChordQuality::maj: return {0, 4, 7};
    case ChordQuality::min: return {0, 3, 7};
    case ChordQuality::dom7: return {0, 4, 7, 10};
    case ChordQuality::maj7: return {0, 4, 7, 11};
    case ChordQuality::min7: return {0, 3, 7, 10};
    case ChordQuality::m7b5: return {0, 3, 6, 10};
    case ChordQuality::dim: return {0, 3, 6};
    case ChordQuality::aug: return {0, 4, 8};
  }
  throw ArgumentError("unknown chord quality");
}

/// 12-dimensional binary chord-tone vector.
inline std::array<int, 12> chord_tones(int root, ChordQuality q) {
  std::array<int, 12> tones{};
  for (int iv : quality_intervals(q)) tones[(root + iv) % 12] = 1;
  return tones;
}

struct ChordEvent {
  int root = 0;
  ChordQuality quality = ChordQuality::maj;
  int ticks = duration::kWhole;

  auto operator<=>(const ChordEvent&) const = default;
};

inline void validate(const ChordEvent& c) {
  if (c.root < 0 || c.root > 11) {
    throw ValidationError("chord root " + std::to_string(c.root) + " outside 0-11");
  }
  if (c.ticks < 1) throw ValidationError("chord duration < 1 tick");
}

inline int total_ticks(const std::vector<ChordEvent>& chords) {
  return std::accumulate(chords.begin(), chords.end(), 0,
                         [](int acc, const ChordEvent& c) { return acc + c.ticks; });
}

struct LeadSheet {
  std::string title;
  int beats_per_bar = 4;
  int pickup_ticks = 0;  // length of a leading partial bar, 0 if none
  std::vector<ChordEvent> chords;
  Melody melody;

  int bar_ticks() const { return beats_per_bar * kTicksPerQuarter; }
  int total_ticks() const { return melody.total_ticks(); }

  bool operator==(const LeadSheet&) const = default;
};

inline void validate(const LeadSheet& sheet) {
  if (sheet.beats_per_bar < 1) throw ValidationError("beats_per_bar must be positive");
  if (sheet.pickup_ticks < 0 || sheet.pickup_ticks >= sheet.bar_ticks()) {
    throw ValidationError("pickup_ticks must lie in [0, bar length)");
  }
  for (const Note& n : sheet.melody.notes) validate(n);
  for (const ChordEvent& c : sheet.chords) validate(c);
  const int melody_ticks = sheet.melody.total_ticks();
  const int chord_ticks = total_ticks(sheet.chords);
  if (melody_ticks != chord_ticks) {
    throw ValidationError("chord track lasts " + std::to_string(chord_ticks) +
                          " ticks but melody lasts " + std::to_string(melody_ticks));
  }
  if ((melody_ticks - sheet.pickup_ticks) % sheet.bar_ticks() != 0) {
    throw ValidationError("total duration " + std::to_string(melody_ticks) +
                          " is not a whole number of bars after the pickup");
  }
}

/// Extracts [start, end) without range checks; notes overlapping a boundary
/// are truncated to the overlap, and an empty interval yields an empty melody.
inline Melody clipped_slice(const Melody& melody, int start, int end) {
  Melody out;
  int onset = 0;
  for (const Note& n : melody.notes) {
    const int lo = std::max(onset, start);
    const int hi = std::min(onset + n.ticks, end);
    if (lo < hi) out.notes.push_back(Note{n.pitch, hi - lo});
    onset += n.ticks;
    if (onset >= end) break;
  }
  return out;
}

inline Melody slice(const Melody& melody, int start, int end) {
  const int total = melody.total_ticks();
  if (start < 0 || start >= end || end > total) {
    throw RangeError("slice [" + std::to_string(start) + ", " + std::to_string(end) +
                     ") outside melody of " + std::to_string(total) + " ticks");
  }
  return clipped_slice(melody, start, end);
}

inline Melody transpose(const Melody& melody, int semitones) {
  Melody out = melody;
  for (Note& n : out.notes) {
    if (n.is_rest()) continue;
    const int p = n.pitch + semitones;
    if (p < 0 || p > kMaxPitch) {
      throw RangeError("transposing pitch " + std::to_string(n.pitch) + " by " +
                       std::to_string(semitones) + " leaves 0-127");
    }
    n.pitch = p;
  }
  return out;
}

inline ChordEvent transpose(const ChordEvent& c, int semitones) {
  ChordEvent out = c;
  out.root = ((c.root + semitones) % 12 + 12) % 12;
  return out;
}

inline std::vector<ChordEvent> transpose(const std::vector<ChordEvent>& chords, int semitones) {
  std::vector<ChordEvent> out;
  out.reserve(chords.size());
  for (const ChordEvent& c : chords) out.push_back(transpose(c, semitones));
  return out;
}

inline std::vector<ChordEvent> slice(const std::vector<ChordEvent>& chords, int start, int end) {
  const int total = total_ticks(chords);
  if (start < 0 || start >= end || end > total) {
    throw RangeError("chord slice outside chord track");
  }
  std::vector<ChordEvent> out;
  int onset = 0;
  for (const ChordEvent& c : chords) {
    const int lo = std::max(onset, start);
    const int hi = std::min(onset + c.ticks, end);
    if (lo < hi) out.push_back(ChordEvent{c.root, c.quality, hi - lo});
    onset += c.ticks;
  }
  return out;
}

/// Index of the chord sounding at tick t, or npos-like -1 when t is outside.
inline int chord_index_at(const std::vector<ChordEvent>& chords, int t) {
  int onset = 0;
  for (std::size_t i = 0; i < chords.size(); ++i) {
    if (t >= onset && t < onset + chords[i].ticks) return static_cast<int>(i);
    onset += chords[i].ticks;
  }
  return -1;
}

/// Sub-lead-sheet over [start, end). The result has no pickup.
inline LeadSheet slice(const LeadSheet& sheet, int start, int end) {
  LeadSheet out;
  out.title = sheet.title;
  out.beats_per_bar = sheet.beats_per_bar;
  out.pickup_ticks = 0;
  out.melody = slice(sheet.melody, start, end);
  out.chords = slice(sheet.chords, start, end);
  return out;
}

}  // namespace variata
