// Command line front end for the variata library.

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "variata/variata.hpp"

namespace fs = std::filesystem;
using namespace variata;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitInfeasible = 3;

struct Globals {
  std::uint64_t seed = 1;
  WeightParams params;
  std::string pitch_table;
  int order = 1;
  BiasRenorm renorm = BiasRenorm::global;
};

WeightParams weight_params(const Globals& g) {
  WeightParams p = g.params;
  if (!g.pitch_table.empty()) {
    const nlohmann::json j = detail::parse_json_text(detail::read_file(g.pitch_table), g.pitch_table);
    if (!j.is_array() || j.size() != 12) throw ParseError(g.pitch_table + ": expected an array of 12 numbers");
    for (std::size_t i = 0; i < 12; ++i) {
      if (!j[i].is_number()) throw ParseError(g.pitch_table + ": /" + std::to_string(i) + ": expected a number");
      p.pitch_table[i] = j[i].template get<double>();
    }
  }
  validate(p);
  return p;
}

std::string numbered(const std::string& stem, int i) {
  std::ostringstream os;
  os << stem << '_' << std::setw(3) << std::setfill('0') << i + 1 << ".json";
  return os.str();
}

void write_melody_variations(const fs::path& dir, const LeadSheet& theme, const VariationRun<NoteState>& run,
                             double alpha, std::uint64_t seed, const WeightParams& params) {
  fs::create_directories(dir);
  std::vector<ExperimentRecord> records;
  for (std::size_t i = 0; i < run.samples.size(); ++i) {
    const auto& s = run.samples[i];
    LeadSheet out = theme;
    out.title = theme.title + " (variation " + std::to_string(i + 1) + ")";
    out.melody = to_melody(s.elements);
    save_lead_sheet(dir / numbered("variation", static_cast<int>(i)), out);
    ExperimentRecord r;
    r.seed = sub_seed(seed, i);
    r.alpha = alpha;
    r.ms_distance = ms_distance(out.melody, theme.melody, params).distance;
    r.log_ratio = s.log_pb - s.log_po;
    r.sum_localized = s.sum_localized;
    r.log_bias_product = s.log_bias_product;
    records.push_back(r);
  }
  detail::write_file(dir / "records.csv", records_csv(records));
}

void write_chord_variations(const fs::path& dir, const LeadSheet& theme, const StyleModel& model,
                            const VariationRun<ChordState>& run, double alpha, std::uint64_t seed) {
  fs::create_directories(dir);
  const double max_sim = max_chord_similarity(model, theme.chords);
  std::ostringstream csv;
  csv << "seed,alpha,chord_distance,log_ratio,sum_localized,log_bias_product\n";
  for (std::size_t i = 0; i < run.samples.size(); ++i) {
    const auto& s = run.samples[i];
    LeadSheet out = theme;
    out.title = theme.title + " (reharmonization " + std::to_string(i + 1) + ")";
    out.chords = to_events(s.elements);
    save_lead_sheet(dir / numbered("chords", static_cast<int>(i)), out);
    csv << sub_seed(seed, i) << ',' << detail::num(alpha) << ','
        << detail::num(chord_track_distance(out.chords, theme.chords, model, max_sim)) << ','
        << detail::num(s.log_pb - s.log_po) << ',' << detail::num(s.sum_localized) << ','
        << detail::num(s.log_bias_product) << '\n';
  }
  detail::write_file(dir / "records.csv", csv.str());
}

std::vector<int> parse_int_list(const std::string& text, const std::string& flag) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ArgumentError(flag + ": not an integer list: " + text);
    }
  }
  if (out.empty()) throw ArgumentError(flag + ": empty list");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Style-constrained melody and lead sheet generation"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--k1", g.params.k1, "Weight per tick of length difference");
  app.add_option("--penalty-p", g.params.penalty_p, "Penalty on fragmentation and consolidation");
  app.add_option("--pitch-table", g.pitch_table, "JSON array of 12 interval-class weights")->check(CLI::ExistingFile);
  app.add_option("--max-group", g.params.max_group, "Largest fragmentation or consolidation group");
  app.add_option("--order", g.order, "Markov order")->check(CLI::PositiveNumber);
  app.add_option("--bias-renorm", g.renorm, "Bias renormalization")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, BiasRenorm>{{"global", BiasRenorm::global}, {"local", BiasRenorm::local}}));

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a style model from a corpus directory");
  std::string corpus_dir, out_path;
  train_cmd->add_option("--corpus", corpus_dir)->required();
  train_cmd->add_option("--out", out_path)->required();

  // sample
  auto* sample_cmd = app.add_subcommand("sample", "Sample unconstrained lead sheets");
  std::string model_path, out_dir;
  int bars = 4, beats_per_bar = 4, pickup = 0, count = 1;
  sample_cmd->add_option("--model", model_path)->required();
  sample_cmd->add_option("--bars", bars)->check(CLI::PositiveNumber);
  sample_cmd->add_option("--beats-per-bar", beats_per_bar)->check(CLI::PositiveNumber);
  sample_cmd->add_option("--pickup", pickup, "Pickup length in ticks")->check(CLI::NonNegativeNumber);
  sample_cmd->add_option("--count", count)->check(CLI::PositiveNumber);
  sample_cmd->add_option("--out-dir", out_dir)->required();

  // variate
  auto* variate_cmd = app.add_subcommand("variate", "Sample melodic variations of a theme");
  std::string theme_path;
  double alpha = 0.0;
  variate_cmd->add_option("--model", model_path)->required();
  variate_cmd->add_option("--theme", theme_path)->required();
  variate_cmd->add_option("--alpha", alpha);
  variate_cmd->add_option("--count", count)->check(CLI::PositiveNumber);
  variate_cmd->add_option("--out-dir", out_dir)->required();

  // variate-chords
  auto* chords_cmd = app.add_subcommand("variate-chords", "Sample chord sequence variations of a theme");
  chords_cmd->add_option("--model", model_path)->required();
  chords_cmd->add_option("--theme", theme_path)->required();
  chords_cmd->add_option("--alpha", alpha);
  chords_cmd->add_option("--count", count)->check(CLI::PositiveNumber);
  chords_cmd->add_option("--out-dir", out_dir)->required();

  // compose
  auto* compose_cmd = app.add_subcommand("compose", "Generate a lead sheet from a structure plan");
  std::string plan_path;
  std::optional<double> alpha_override;
  compose_cmd->add_option("--plan", plan_path)->required();
  compose_cmd->add_option("--model", model_path)->required();
  compose_cmd->add_option("--alpha", alpha_override, "Override the alpha of every variation directive");
  compose_cmd->add_option("--out", out_path)->required();

  // experiment
  auto* exp_cmd = app.add_subcommand("experiment", "Theme-variation experiment: CSV records, summary, plot script");
  std::vector<double> alphas = {0.0, 0.5, 0.95};
  int theme_bars = 0, exp_count = 1000;
  exp_cmd->add_option("--model", model_path)->required();
  exp_cmd->add_option("--theme", theme_path)->required();
  exp_cmd->add_option("--theme-bars", theme_bars, "Use only the first N bars of the theme")
      ->check(CLI::NonNegativeNumber);
  exp_cmd->add_option("--alphas", alphas)->delimiter(',');
  exp_cmd->add_option("--count", exp_count)->check(CLI::PositiveNumber);
  exp_cmd->add_option("--out-dir", out_dir)->required();

  // gen-corpus
  auto* gen_cmd = app.add_subcommand("gen-corpus", "Write a synthetic corpus");
  CorpusSpec spec;
  std::string pitches, durations, keys;
  gen_cmd->add_option("--out", out_dir)->required();
  gen_cmd->add_option("--songs", spec.songs);
  gen_cmd->add_option("--bars", spec.bars);
  gen_cmd->add_option("--beats-per-bar", spec.beats_per_bar);
  gen_cmd->add_option("--pitches", pitches, "Comma-separated MIDI pitches");
  gen_cmd->add_option("--durations", durations, "Comma-separated durations in ticks");
  gen_cmd->add_option("--keys", keys, "Comma-separated tonic pitch classes");
  gen_cmd->add_option("--pickup", spec.pickup_ticks, "Pickup length in ticks");
  gen_cmd->add_option("--pickup-share", spec.pickup_share);
  gen_cmd->add_option("--rest-prob", spec.rest_prob);

  // distance
  auto* dist_cmd = app.add_subcommand("distance", "Similarity distance between the melodies of two lead sheets");
  std::string a_path, b_path;
  bool show_script = false;
  dist_cmd->add_option("a", a_path)->required();
  dist_cmd->add_option("b", b_path)->required();
  dist_cmd->add_flag("--script", show_script, "Print the optimal edit script");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    const WeightParams params = weight_params(g);

    if (*train_cmd) {
      save_model(out_path, train(load_corpus(corpus_dir), g.order));
    } else if (*sample_cmd) {
      const StyleModel model = load_model(model_path);
      const int total = pickup + bars * beats_per_bar * kTicksPerQuarter;
      fs::create_directories(out_dir);
      for (int i = 0; i < count; ++i) {
        LeadSheet sheet = sample_lead_sheet(model, total, beats_per_bar, pickup, sub_seed(g.seed, i));
        sheet.title = "sample " + std::to_string(i + 1);
        save_lead_sheet(fs::path(out_dir) / numbered("sample", i), sheet);
      }
    } else if (*variate_cmd) {
      const StyleModel model = load_model(model_path);
      const LeadSheet theme = load_lead_sheet(theme_path);
      const auto run = variate_melody(model, theme.chords, theme.melody, alpha, g.seed, count, params, g.renorm);
      write_melody_variations(out_dir, theme, run, alpha, g.seed, params);
    } else if (*chords_cmd) {
      const StyleModel model = load_model(model_path);
      const LeadSheet theme = load_lead_sheet(theme_path);
      const auto run = variate_chords(model, theme.chords, alpha, g.seed, count, g.renorm);
      write_chord_variations(out_dir, theme, model, run, alpha, g.seed);
    } else if (*compose_cmd) {
      StructurePlan plan = load_plan(plan_path);
      if (alpha_override) plan = with_variation_alpha(plan, *alpha_override);
      const StyleModel model = load_model(model_path);
      ComposeOptions opts;
      opts.params = params;
      opts.renorm = g.renorm;
      LeadSheet sheet = execute(plan, model, g.seed, opts);
      sheet.title = fs::path(plan_path).stem().string();
      save_lead_sheet(out_path, sheet);
      const AuditReport rep = audit(plan, sheet);
      std::cout << "copy bars " << rep.copy_bars << " failures " << rep.copy_failures << '\n'
                << "transposed bars " << rep.transposed_bars << " failures " << rep.transposed_failures << '\n'
                << "harmony bars " << rep.harmony_bars << " failures " << rep.harmony_failures << '\n';
      const auto dists = variation_distances(plan, sheet, params);
      for (std::size_t i = 0; i < dists.size(); ++i)
        std::cout << "variation " << i + 1 << " distance " << detail::num(dists[i]) << '\n';
      for (const auto& p : rep.problems) std::cerr << "audit: " << p << '\n';
      if (!rep.ok()) return 1;
    } else if (*exp_cmd) {
      const StyleModel model = load_model(model_path);
      LeadSheet theme = load_lead_sheet(theme_path);
      if (theme_bars > 0) theme = theme_excerpt(theme, theme_bars);
      ExperimentConfig cfg;
      cfg.alphas = alphas;
      cfg.count = exp_count;
      cfg.seed = g.seed;
      cfg.params = params;
      cfg.renorm = g.renorm;
      for (double a : alphas) check_alpha(a);
      const ExperimentResult result = run_experiment(model, theme, cfg);
      fs::create_directories(out_dir);
      write_experiment(out_dir, result, alphas);
      std::cout << summary_csv(result.summaries);
    } else if (*gen_cmd) {
      spec.seed = g.seed;
      if (!pitches.empty()) spec.pitches = parse_int_list(pitches, "--pitches");
      if (!durations.empty()) spec.durations = parse_int_list(durations, "--durations");
      if (!keys.empty()) spec.keys = parse_int_list(keys, "--keys");
      write_corpus(out_dir, gen_corpus(spec));
    } else if (*dist_cmd) {
      const LeadSheet a = load_lead_sheet(a_path);
      const LeadSheet b = load_lead_sheet(b_path);
      const DistanceResult r = ms_distance(a.melody, b.melody, params);
      std::cout << detail::num(r.distance) << '\n';
      if (show_script) {
        for (const EditOp& op : r.edit_script) {
          std::cout << to_string(op.kind) << " a[" << op.a_begin << ',' << op.a_end << ") b[" << op.b_begin << ','
                    << op.b_end << ") " << detail::num(op.weight) << '\n';
        }
      }
    }
  } catch (const InfeasibleError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const PlanError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const RangeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
