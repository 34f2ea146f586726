#pragma once

// Synthetic corpus generation and the theme-variation experiment pipeline.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "variata/corpus_io.hpp"
#include "variata/errors.hpp"
#include "variata/notation.hpp"
#include "variata/sequencegraph.hpp"
#include "variata/similarity.hpp"
#include "variata/stats.hpp"
#include "variata/stylemodel.hpp"
#include "variata/variation.hpp"

namespace variata {

struct CorpusSpec {
  int songs = 29;
  int bars = 12;
  int beats_per_bar = 4;
  int pickup_ticks = 0;
  double pickup_share = 1.0;  // fraction of songs that open with the pickup
  std::vector<int> pitches = {57, 58, 59, 60, 61, 62, 63, 64, 65, 66, 67, 68, 69, 70, 71, 72, 73, 74};
  std::vector<int> durations = {12, 24, 36, 48};
  std::vector<int> keys = {0};  // tonic pitch class of each song's first chord, drawn uniformly
  double rest_prob = 0.0;
  std::uint64_t seed = 1;
};

namespace detail {

// Chord grammar over absolute roots: ii-V-I motion, ii-V chains falling by
// fifths, and planing down a tone.
struct ChordMove {
  ChordQuality from;
  int interval;
  ChordQuality to;
  double weight;
};
inline constexpr ChordMove kChordMoves[] = {
    {ChordQuality::maj7, 2, ChordQuality::min7, 3},  {ChordQuality::maj7, 9, ChordQuality::min7, 2},
    {ChordQuality::maj7, 5, ChordQuality::maj7, 1},  {ChordQuality::maj7, 4, ChordQuality::min7, 1},
    {ChordQuality::maj7, 0, ChordQuality::maj7, 1},  {ChordQuality::maj7, 10, ChordQuality::maj7, 1},
    {ChordQuality::maj7, 7, ChordQuality::dom7, 1},  {ChordQuality::min7, 5, ChordQuality::dom7, 5},
    {ChordQuality::min7, 10, ChordQuality::min7, 1}, {ChordQuality::min7, 5, ChordQuality::min7, 1},
    {ChordQuality::dom7, 5, ChordQuality::maj7, 4},  {ChordQuality::dom7, 5, ChordQuality::min7, 2},
    {ChordQuality::dom7, 5, ChordQuality::dom7, 1},  {ChordQuality::dom7, 10, ChordQuality::dom7, 1},
};

// Major key whose scale the chord belongs to (I, ii or V).
inline int home_key(int root, ChordQuality q) {
  switch (q) {
    case ChordQuality::min7: return (root + 10) % 12;
    case ChordQuality::dom7: return (root + 5) % 12;
    default: return root;
  }
}

inline bool in_major_scale(int pc, int key) {
  static constexpr bool kScale[12] = {1, 0, 1, 0, 1, 1, 0, 1, 0, 1, 0, 1};
  return kScale[((pc - key) % 12 + 12) % 12];
}

inline int weighted_pick(std::mt19937_64& rng, const std::vector<double>& w) {
  double total = 0.0;
  for (double x : w) total += x;
  double r = uniform01(rng) * total;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] <= 0.0) continue;
    if (r < w[i]) return static_cast<int>(i);
    r -= w[i];
  }
  for (std::size_t i = w.size(); i-- > 0;)
    if (w[i] > 0.0) return static_cast<int>(i);
  return 0;
}

inline std::vector<bool> fillable_lengths(int max_ticks, const std::vector<int>& durations) {
  std::vector<bool> ok(max_ticks + 1, false);
  ok[0] = true;
  for (int r = 1; r <= max_ticks; ++r)
    for (int d : durations)
      if (d <= r && ok[r - d]) ok[r] = true;
  return ok;
}

}  // namespace detail

inline void validate(const CorpusSpec& spec) {
  if (spec.songs < 1 || spec.bars < 1 || spec.beats_per_bar < 1) {
    throw ValidationError("corpus spec: songs, bars and beats_per_bar must be positive");
  }
  if (spec.pitches.empty() || spec.durations.empty() || spec.keys.empty()) {
    throw ValidationError("corpus spec: pitch, duration and key sets must be nonempty");
  }
  for (int p : spec.pitches)
    if (!valid_pitch(p) || p == kRest) throw ValidationError("corpus spec: pitch out of range");
  for (int d : spec.durations)
    if (d < 1) throw ValidationError("corpus spec: durations must be positive");
  if (spec.pickup_ticks < 0 || spec.pickup_ticks >= spec.beats_per_bar * kTicksPerQuarter) {
    throw ValidationError("corpus spec: pickup must be shorter than a bar");
  }
  if (!(spec.pickup_share >= 0.0 && spec.pickup_share <= 1.0)) throw ValidationError("corpus spec: pickup_share in [0, 1]");
  if (!(spec.rest_prob >= 0.0 && spec.rest_prob < 1.0)) throw ValidationError("corpus spec: rest_prob in [0, 1)");
}

/// Pseudo-random lead sheets: one chord per bar from a small jazz chord
/// grammar, and a stepwise melody over the chord's scale that leans toward
/// chord tones. Every bar is filled exactly.
inline std::vector<LeadSheet> gen_corpus(const CorpusSpec& spec) {
  validate(spec);
  const int bar = spec.beats_per_bar * kTicksPerQuarter;
  const auto fillable = detail::fillable_lengths(bar, spec.durations);
  for (int len : {bar, spec.pickup_ticks}) {
    if (!fillable[len]) {
      throw ValidationError("corpus spec: " + std::to_string(len) +
                            " ticks cannot be filled from the duration set");
    }
  }

  std::vector<int> pitches = spec.pitches;
  std::sort(pitches.begin(), pitches.end());
  pitches.erase(std::unique(pitches.begin(), pitches.end()), pitches.end());
  const int np = static_cast<int>(pitches.size());

  std::vector<LeadSheet> corpus;
  for (int song = 0; song < spec.songs; ++song) {
    std::mt19937_64 rng(sub_seed(spec.seed, static_cast<std::uint64_t>(song)));
    LeadSheet sheet;
    sheet.title = "synthetic " + std::to_string(song + 1);
    sheet.beats_per_bar = spec.beats_per_bar;
    const bool pickup = spec.pickup_ticks > 0 && uniform01(rng) < spec.pickup_share;
    sheet.pickup_ticks = pickup ? spec.pickup_ticks : 0;

    const int key = ((spec.keys[rng() % spec.keys.size()] % 12) + 12) % 12;
    ChordEvent chord{key, ChordQuality::maj7, bar};
    int current = pitches[np / 2];

    auto fill = [&](const ChordEvent& c, int ticks) {
      const auto tones = chord_tones(c.root, c.quality);
      const int home = detail::home_key(c.root, c.quality);
      int left = ticks;
      while (left > 0) {
        std::vector<double> dw;
        for (int d : spec.durations) dw.push_back(d <= left && fillable[left - d] ? 1.0 : 0.0);
        const int d = spec.durations[detail::weighted_pick(rng, dw)];
        left -= d;
        if (spec.rest_prob > 0.0 && uniform01(rng) < spec.rest_prob) {
          sheet.melody.notes.push_back(Note::rest(d));
          continue;
        }
        std::vector<double> pw(np, 0.0);
        double total = 0.0;
        for (int i = 0; i < np; ++i) {
          const int pc = pitches[i] % 12, step = std::abs(pitches[i] - current);
          if (!tones[pc] && !detail::in_major_scale(pc, home)) continue;
          if (step > 4) continue;
          pw[i] = (step == 0 ? 1.0 : step <= 2 ? 4.0 : 2.0) * (tones[pc] ? 3.0 : 1.0);
          total += pw[i];
        }
        if (total <= 0.0) {
          // nothing in reach: jump to the nearest chord tone
          int best = -1;
          for (int i = 0; i < np; ++i)
            if (tones[pitches[i] % 12] && (best < 0 || std::abs(pitches[i] - current) < std::abs(pitches[best] - current)))
              best = i;
          if (best < 0) best = np / 2;
          pw.assign(np, 0.0);
          pw[best] = 1.0;
        }
        current = pitches[detail::weighted_pick(rng, pw)];
        sheet.melody.notes.push_back({current, d});
      }
    };

    if (pickup) {
      const ChordEvent pickup{(key + 7) % 12, ChordQuality::dom7, spec.pickup_ticks};
      sheet.chords.push_back(pickup);
      fill(pickup, spec.pickup_ticks);
    }
    for (int b = 0; b < spec.bars; ++b) {
      if (b > 0) {
        std::vector<double> w;
        for (const auto& m : detail::kChordMoves) w.push_back(m.from == chord.quality ? m.weight : 0.0);
        const auto& m = detail::kChordMoves[detail::weighted_pick(rng, w)];
        chord = {(chord.root + m.interval) % 12, m.to, bar};
      }
      sheet.chords.push_back(chord);
      fill(chord, bar);
    }
    validate(sheet);
    corpus.push_back(std::move(sheet));
  }
  return corpus;
}

inline std::string corpus_file_name(int index) {
  std::ostringstream os;
  os << "song_" << std::setw(3) << std::setfill('0') << index + 1 << ".json";
  return os.str();
}

inline void write_corpus(const std::filesystem::path& dir, const std::vector<LeadSheet>& corpus) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < corpus.size(); ++i)
    save_lead_sheet(dir / corpus_file_name(static_cast<int>(i)), corpus[i]);
}

/// Pickup plus the first `bars` full bars of a lead sheet, as a theme.
inline LeadSheet theme_excerpt(const LeadSheet& sheet, int bars) {
  const int end = sheet.pickup_ticks + bars * sheet.bar_ticks();
  if (end > sheet.total_ticks()) throw RangeError("theme excerpt longer than the lead sheet");
  LeadSheet out = slice(sheet, 0, end);
  out.pickup_ticks = sheet.pickup_ticks;
  return out;
}

// ---------------------------------------------------------------------------
// Experiment
// ---------------------------------------------------------------------------

struct ExperimentRecord {
  std::uint64_t seed = 0;
  double alpha = 0.0;
  double ms_distance = 0.0;
  double log_ratio = 0.0;
  double sum_localized = 0.0;
  double log_bias_product = 0.0;
};

struct AlphaSummary {
  double alpha = 0.0;
  int count = 0;
  double log_z_biased = 0.0;
  double log_z_unbiased = 0.0;
  double corr_ratio_distance = 0.0;     // corr(log_ratio, ms_distance)
  double corr_bias_localized = 0.0;     // corr(log_bias_product, sum_localized)
  double corr_localized_distance = 0.0; // corr(sum_localized, ms_distance)
  double median_abs_log_ratio = 0.0;
  double crossover_distance = 0.0;      // fitted distance where log_ratio = 0
  double max_identity_error = 0.0;      // |log_ratio - (log_bias_product - dlogZ)|
};

struct ExperimentResult {
  std::vector<ExperimentRecord> records;
  std::vector<AlphaSummary> summaries;
};

struct ExperimentConfig {
  std::vector<double> alphas = {0.0, 0.5, 0.95};
  int count = 1000;
  std::uint64_t seed = 1;
  WeightParams params;
  BiasRenorm renorm = BiasRenorm::global;
};

/// Seed for the alpha run at position `index` of the alpha list.
inline std::uint64_t alpha_seed(std::uint64_t seed, std::size_t index) { return sub_seed(seed ^ 0xa1fa, index); }

inline ExperimentResult run_experiment(const StyleModel& model, const LeadSheet& theme, const ExperimentConfig& cfg) {
  validate(theme);
  if (cfg.count < 1) throw ArgumentError("experiment needs at least one sample per alpha");
  ExperimentResult result;
  for (std::size_t ai = 0; ai < cfg.alphas.size(); ++ai) {
    const double alpha = cfg.alphas[ai];
    const std::uint64_t seed = alpha_seed(cfg.seed, ai);
    const auto run = variate_melody(model, theme.chords, theme.melody, alpha, seed, cfg.count, cfg.params, cfg.renorm);
    const double dz = run.log_z_biased - run.log_z_unbiased;

    AlphaSummary sum;
    sum.alpha = alpha;
    sum.count = cfg.count;
    sum.log_z_biased = run.log_z_biased;
    sum.log_z_unbiased = run.log_z_unbiased;
    std::vector<double> ratio, dist, local, bias, abs_ratio;
    for (std::size_t i = 0; i < run.samples.size(); ++i) {
      const auto& s = run.samples[i];
      ExperimentRecord r;
      r.seed = sub_seed(seed, i);
      r.alpha = alpha;
      r.ms_distance = ms_distance(to_melody(s.elements), theme.melody, cfg.params).distance;
      r.log_ratio = s.log_pb - s.log_po;
      r.sum_localized = s.sum_localized;
      r.log_bias_product = s.log_bias_product;
      sum.max_identity_error = std::max(sum.max_identity_error, std::abs(r.log_ratio - (r.log_bias_product - dz)));
      ratio.push_back(r.log_ratio);
      dist.push_back(r.ms_distance);
      local.push_back(r.sum_localized);
      bias.push_back(r.log_bias_product);
      abs_ratio.push_back(std::abs(r.log_ratio));
      result.records.push_back(r);
    }
    sum.corr_ratio_distance = stats::pearson(ratio, dist);
    sum.corr_bias_localized = stats::pearson(bias, local);
    sum.corr_localized_distance = stats::pearson(local, dist);
    sum.median_abs_log_ratio = stats::median(abs_ratio);
    // least-squares line log_ratio = a + b * distance, crossing zero at -a / b
    const double mx = stats::mean(dist), my = stats::mean(ratio);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
      sxy += (dist[i] - mx) * (ratio[i] - my);
      sxx += (dist[i] - mx) * (dist[i] - mx);
    }
    sum.crossover_distance = sxx > 0.0 && sxy != 0.0 ? mx - my * sxx / sxy : std::nan("");
    result.summaries.push_back(sum);
  }
  return result;
}

namespace detail {

inline std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return nlohmann::json(x).dump();
}

}  // namespace detail

inline std::string records_csv(const std::vector<ExperimentRecord>& records) {
  std::ostringstream os;
  os << "seed,alpha,ms_distance,log_ratio,sum_localized,log_bias_product\n";
  for (const auto& r : records) {
    os << r.seed << ',' << detail::num(r.alpha) << ',' << detail::num(r.ms_distance) << ','
       << detail::num(r.log_ratio) << ',' << detail::num(r.sum_localized) << ',' << detail::num(r.log_bias_product)
       << '\n';
  }
  return os.str();
}

inline std::string summary_csv(const std::vector<AlphaSummary>& summaries) {
  std::ostringstream os;
  os << "alpha,count,log_z_biased,log_z_unbiased,corr_log_ratio_ms_distance,corr_log_bias_product_sum_localized,"
        "corr_sum_localized_ms_distance,median_abs_log_ratio,crossover_distance,max_identity_error\n";
  for (const auto& s : summaries) {
    os << detail::num(s.alpha) << ',' << s.count << ',' << detail::num(s.log_z_biased) << ','
       << detail::num(s.log_z_unbiased) << ',' << detail::num(s.corr_ratio_distance) << ','
       << detail::num(s.corr_bias_localized) << ',' << detail::num(s.corr_localized_distance) << ','
       << detail::num(s.median_abs_log_ratio) << ',' << detail::num(s.crossover_distance) << ','
       << detail::num(s.max_identity_error) << '\n';
  }
  return os.str();
}

/// Gnuplot script drawing the three scatter plots from records.csv.
inline std::string gnuplot_script(const std::vector<double>& alphas) {
  std::ostringstream os;
  os << "set datafile separator ','\n"
     << "set terminal pngcairo size 900,600\n"
     << "set key outside\n";
  struct Plot {
    const char* file;
    const char* x;
    int xcol;
    const char* y;
    int ycol;
  };
  const Plot plots[] = {{"ratio_vs_distance.png", "ms_distance", 3, "log(p_b / p_o)", 4},
                        {"bias_vs_localized.png", "sum of localized distances", 5, "log bias product", 6},
                        {"localized_vs_distance.png", "ms_distance", 3, "sum of localized distances", 5}};
  for (const Plot& p : plots) {
    os << "set output '" << p.file << "'\n"
       << "set xlabel '" << p.x << "'\nset ylabel '" << p.y << "'\n"
       << "plot ";
    for (std::size_t i = 0; i < alphas.size(); ++i) {
      const std::string a = detail::num(alphas[i]);
      os << (i ? ", \\\n     " : "") << "'records.csv' using ($2 == " << a << " ? $" << p.xcol << " : 1/0):"
         << p.ycol << " every ::1 with points pt 7 ps 0.3 title 'alpha = " << a << "'";
    }
    os << '\n';
  }
  return os.str();
}

inline void write_experiment(const std::filesystem::path& dir, const ExperimentResult& result,
                             const std::vector<double>& alphas) {
  detail::write_file(dir / "records.csv", records_csv(result.records));
  detail::write_file(dir / "summary.csv", summary_csv(result.summaries));
  detail::write_file(dir / "plots.gp", gnuplot_script(alphas));
}

}  // namespace variata
