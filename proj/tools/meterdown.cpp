// meterdown command-line tool: synth | validate | label | train | eval | experiment

#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "meterdown/error.hpp"
#include "meterdown/evaluate.hpp"
#include "meterdown/features.hpp"
#include "meterdown/ingest.hpp"
#include "meterdown/label.hpp"
#include "meterdown/models.hpp"
#include "meterdown/synth.hpp"
#include "meterdown/validate.hpp"

#ifndef METERDOWN_VERSION
#define METERDOWN_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace meterdown;

namespace {

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io.open", "cannot open " + path.string(), {{"path", path.string()}});
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", digest[i]);
    hex += byte;
  }
  return hex;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io.open", "cannot write " + path.string(), {{"path", path.string()}});
  out << text;
  if (!out) throw Error("io.write", "failed writing " + path.string(), {{"path", path.string()}});
}

std::string pretty(const json& j) { return j.dump(2) + "\n"; }

// Collected while a subcommand runs, written next to its outputs.
struct Manifest {
  std::string subcommand;
  std::vector<std::string> arguments;
  json config = json::object();
  json seeds = json::object();
  json inputs = json::array();
  std::vector<std::string> outputs;

  void add_input(const fs::path& p) { inputs.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}}); }

  void add_output(const fs::path& p, const std::string& text) {
    write_text(p, text);
    outputs.push_back(p.string());
  }

  void save(const fs::path& p) const {
    json j{{"tool", "meterdown"},
           {"version", METERDOWN_VERSION},
           {"subcommand", subcommand},
           {"arguments", arguments},
           {"config", config},
           {"seeds", seeds},
           {"inputs", inputs},
           {"outputs", outputs}};
    write_text(p, pretty(j));
  }
};

struct Globals {
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct DataFlags {
  std::string dir;
  std::string readings;
  std::string meters;
  int gap_limit = kDefaultGapLimitDays;

  void attach(CLI::App* cmd, bool need_meters) {
    cmd->add_option("--data", dir, "Directory holding readings.csv and meters.csv");
    cmd->add_option("--readings-csv", readings, "Readings CSV (overrides --data)");
    if (need_meters) cmd->add_option("--meters-csv", meters, "Meters CSV (overrides --data)");
    cmd->add_option("--gap-limit", gap_limit, "Longest allowed gap between valid readings, in days")
        ->check(CLI::PositiveNumber);
  }

  fs::path readings_path() const {
    if (!readings.empty()) return readings;
    if (dir.empty()) throw Error("cli.input", "give --data or --readings-csv");
    return fs::path(dir) / "readings.csv";
  }
  fs::path meters_path() const {
    if (!meters.empty()) return meters;
    if (dir.empty()) throw Error("cli.input", "give --data or --meters-csv");
    return fs::path(dir) / "meters.csv";
  }
};

struct LoadedData {
  ValidatedFleet validated;
  MeterTable meters;
};

LoadedData load_data(const DataFlags& flags, Manifest& manifest) {
  const auto rp = flags.readings_path();
  const auto mp = flags.meters_path();
  manifest.add_input(rp);
  manifest.add_input(mp);
  const auto readings = read_readings_file(rp);
  return {validate_fleet(readings, flags.gap_limit), read_meters_file(mp)};
}

// ---------------------------------------------------------------------------

struct SynthFlags {
  std::string config_file;
  std::string out = ".";
  FleetConfig fleet;
  std::string mode;
  double process_fail = 0.0;
  double incongruent = 0.0;
  double gap = 0.0;
};

// Registers fleet flags; values given on the command line override the JSON file.
void attach_fleet_flags(CLI::App* cmd, SynthFlags& f) {
  cmd->add_option("--meters", f.fleet.meters, "Number of meters")->check(CLI::PositiveNumber);
  cmd->add_option("--defective-fraction", f.fleet.defective_fraction, "Share of defective meters");
  cmd->add_option("--min-readings", f.fleet.min_readings);
  cmd->add_option("--max-readings", f.fleet.max_readings);
  cmd->add_option("--precursor-floor", f.fleet.precursor_floor,
                  "Lowest registration ratio before a defective meter freezes");
  cmd->add_option("--mode", f.mode, "Categorical mode: informative or noise");
  cmd->add_option("--flip-probability", f.fleet.flip_probability);
}

FleetConfig resolve_fleet(CLI::App* cmd, const SynthFlags& f, std::uint64_t seed) {
  FleetConfig c;
  if (!f.config_file.empty()) {
    std::ifstream in(f.config_file);
    if (!in) throw Error("io.open", "cannot open " + f.config_file, {{"path", f.config_file}});
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw Error("cli.config", std::string("bad fleet config JSON: ") + e.what(), {{"path", f.config_file}});
    }
    c = fleet_config_from_json(j);
  }
  const auto given = [&](const char* name) { return cmd->count(name) > 0; };
  if (given("--meters")) c.meters = f.fleet.meters;
  if (given("--defective-fraction")) c.defective_fraction = f.fleet.defective_fraction;
  if (given("--min-readings")) c.min_readings = f.fleet.min_readings;
  if (given("--max-readings")) c.max_readings = f.fleet.max_readings;
  if (given("--precursor-floor")) c.precursor_floor = f.fleet.precursor_floor;
  if (given("--flip-probability")) c.flip_probability = f.fleet.flip_probability;
  if (given("--mode")) c.mode = parse_mode(f.mode);
  c.seed = seed;
  c.validate();
  return c;
}

int run_synth(CLI::App* cmd, const SynthFlags& f, const Globals& g, Manifest& m) {
  const auto config = resolve_fleet(cmd, f, g.seed);
  auto fleet = generate(config);
  QualityNoise noise{f.process_fail, f.incongruent, f.gap, config.gap_limit_days, derive_seed(g.seed, 1)};
  const auto noisy = inject_quality_noise(fleet.readings, noise);

  m.config = {{"fleet", to_json(config)},
              {"noise",
               {{"process_fail_rate", noise.process_fail_rate},
                {"incongruent_rate", noise.incongruent_rate},
                {"gap_rate", noise.gap_rate}}}};
  m.seeds = {{"seed", g.seed}, {"fleet", config.seed}, {"noise", noise.seed}};
  m.config["injected"] = {{"process_flags_flipped", noisy.counts.process_flags_flipped},
                          {"congruent_flags_flipped", noisy.counts.congruent_flags_flipped},
                          {"gaps_inserted", noisy.counts.gaps_inserted}};

  const fs::path out(f.out);
  std::ostringstream readings, meters;
  write_readings(readings, noisy.readings);
  write_meters(meters, fleet.meters);
  m.add_output(out / "readings.csv", readings.str());
  m.add_output(out / "meters.csv", meters.str());
  m.save(out / "manifest.json");
  return 0;
}

// ---------------------------------------------------------------------------

int run_validate(const DataFlags& d, const std::string& out, Manifest& m) {
  const auto rp = d.readings_path();
  m.add_input(rp);
  const auto validated = validate_fleet(read_readings_file(rp), d.gap_limit);
  m.config = {{"gap_limit_days", d.gap_limit}};
  const auto text = pretty(to_json(validated.summary));
  std::cout << text;
  m.add_output(fs::path(out) / "validation.json", text);
  m.save(fs::path(out) / "manifest.json");
  return 0;
}

int run_label(const DataFlags& d, const std::string& scheme_text, bool exclude, const std::string& out,
              Manifest& m) {
  const auto scheme = Scheme::parse(scheme_text);
  const auto data = load_data(d, m);
  const auto ds = label_fleet(data.validated.series, data.meters, scheme, {exclude});
  m.config = {{"gap_limit_days", d.gap_limit}, {"scheme", scheme.name()}, {"exclude_plateau_negatives", exclude}};
  std::ostringstream windows;
  write_dataset(windows, ds);
  const auto counts = pretty(to_json(ds.counts));
  std::cout << counts;
  m.add_output(fs::path(out) / "windows.csv", windows.str());
  m.add_output(fs::path(out) / "counts.json", counts);
  m.save(fs::path(out) / "manifest.json");
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainFlags {
  std::string arch = "dnn1";
  std::string scheme = "1p+2";
  std::string attributes = "producer,meter_type,year,contract";
  std::size_t epochs = 80;
  std::size_t batch_size = 32;
  std::size_t hidden = 32;
  double learning_rate = 0.001;

  void attach(CLI::App* cmd) {
    cmd->add_option("--arch", arch, "dnn1 or dnn2");
    cmd->add_option("--epochs", epochs)->check(CLI::PositiveNumber);
    cmd->add_option("--batch-size", batch_size)->check(CLI::PositiveNumber);
    cmd->add_option("--hidden", hidden, "GRU hidden size")->check(CLI::PositiveNumber);
    cmd->add_option("--learning-rate", learning_rate);
    cmd->add_option("--attributes", attributes, "Categorical attributes used by dnn2");
  }

  TrainConfig config(std::uint64_t seed) const {
    TrainConfig c;
    c.epochs = epochs;
    c.batch_size = batch_size;
    c.hidden = hidden;
    c.adam.learning_rate = learning_rate;
    c.seed = seed;
    c.validate();
    return c;
  }
};

int run_train(const DataFlags& d, const TrainFlags& t, bool exclude, const std::string& out, const Globals& g,
              Manifest& m) {
  const auto arch = parse_arch(t.arch);
  const auto scheme = Scheme::parse(t.scheme);
  const auto attributes = parse_attributes(t.attributes);
  const auto data = load_data(d, m);
  const auto ds = build_dataset(data.validated.series, data.meters, scheme, {exclude});

  const auto cfg = t.config(derive_seed(g.seed, 1));
  const auto init_seed = derive_seed(g.seed, 0);
  const auto encoders =
      fit_encoders(ds.examples, arch == Arch::dnn2 ? std::span<const Attribute>(attributes) : std::span<const Attribute>());
  const auto encoded = encode_examples(ds.examples, encoders);
  auto model = Model::init(arch, {kContinuousFeatures, cfg.hidden, encoders.vocab.dimension()}, init_seed);
  const auto history = train(model, encoded, cfg);

  json attrs = json::array();
  for (auto a : attributes) attrs.push_back(attribute_name(a));
  m.config = {{"arch", arch_name(arch)},
              {"scheme", scheme.name()},
              {"gap_limit_days", d.gap_limit},
              {"exclude_plateau_negatives", exclude},
              {"categorical_attributes", arch == Arch::dnn2 ? attrs : json::array()},
              {"train", to_json(cfg)},
              {"examples", {{"positives", ds.positives()}, {"negatives", ds.negatives()}}},
              {"final_loss", history.back()}};
  m.seeds = {{"seed", g.seed}, {"init", init_seed}, {"shuffle", cfg.seed}};

  const fs::path bundle_path(out);
  m.add_output(bundle_path, pretty(bundle_to_json({model, encoders, scheme, cfg})));
  auto manifest_path = bundle_path;
  manifest_path.replace_extension(".manifest.json");
  m.save(manifest_path);
  std::cout << pretty({{"bundle", bundle_path.string()}, {"loss_history", history}});
  return 0;
}

int run_eval(const DataFlags& d, const std::string& model_path, const std::string& out, Manifest& m) {
  m.add_input(model_path);
  const auto bundle = load_bundle(model_path);
  const auto data = load_data(d, m);
  const auto ds = build_dataset(data.validated.series, data.meters, bundle.scheme);
  const auto encoded = encode_examples(ds.examples, bundle.encoders);
  const auto scores = predict(bundle.model, encoded);
  std::vector<int> labels;
  for (const auto& e : ds.examples) labels.push_back(e.label);

  json roc = json::array();
  for (const auto& p : roc_points(scores, labels)) roc.push_back({p.false_positive_rate, p.true_positive_rate});
  const json result{{"scheme", bundle.scheme.name()},
                    {"arch", arch_name(bundle.model.arch())},
                    {"counts", to_json(ds.counts)},
                    {"auc", auc(scores, labels)},
                    {"roc", roc}};
  std::ostringstream preds;
  preds << "meter_id,label,score\n";
  for (std::size_t i = 0; i < scores.size(); ++i) {
    preds << ds.examples[i].meter_id << ',' << ds.examples[i].label << ',' << format_value(scores[i]) << '\n';
  }
  m.config = {{"gap_limit_days", d.gap_limit}, {"model", model_path}};
  const auto text = pretty(result);
  std::cout << text;
  m.add_output(fs::path(out) / "eval.json", text);
  m.add_output(fs::path(out) / "predictions.csv", preds.str());
  m.save(fs::path(out) / "manifest.json");
  return 0;
}

// ---------------------------------------------------------------------------

struct ExperimentFlags {
  std::string schemes = "1p+1,1p+2,1p+3";
  std::size_t folds = 10;
  double train_fraction = 0.8;
  bool exclude = false;
  std::string out = ".";
};

int run_experiment_cmd(CLI::App* cmd, const DataFlags& d, const SynthFlags& s, const TrainFlags& t,
                       const ExperimentFlags& e, const Globals& g, Manifest& m) {
  ExperimentConfig cfg;
  cfg.arch = parse_arch(t.arch);
  cfg.schemes = parse_schemes(e.schemes);
  cfg.attributes = parse_attributes(t.attributes);
  cfg.train = t.config(0);
  cfg.train_fraction = e.train_fraction;
  cfg.folds = e.folds;
  cfg.seed = g.seed;
  cfg.threads = g.threads;
  cfg.label.exclude_plateau_negatives = e.exclude;

  m.seeds = {{"seed", g.seed}};
  json data_config;
  LoadedData data;
  if (d.dir.empty() && d.readings.empty()) {
    const auto fleet_cfg = resolve_fleet(cmd, s, derive_seed(g.seed, 1000));
    const auto fleet = generate(fleet_cfg);
    data.validated = validate_fleet(fleet.readings, d.gap_limit);
    for (const auto& rec : fleet.meters) data.meters.emplace(rec.meter_id, rec);
    data_config = {{"source", "synthetic"}, {"fleet", to_json(fleet_cfg)}};
    m.seeds["fleet"] = fleet_cfg.seed;
  } else {
    data = load_data(d, m);
    data_config = {{"source", "files"}};
  }
  data_config["gap_limit_days"] = d.gap_limit;

  const auto report = run_experiment(cfg, data.validated.series, data.meters);
  auto report_json = to_json(report);
  report_json["data"] = data_config;
  json run_seeds = json::array();
  for (const auto& r : report.results) {
    run_seeds.push_back({{"scheme", r.scheme.name()},
                         {"split", r.split_seed},
                         {"folds", r.fold_seed},
                         {"fold_training", r.fold_train_seeds},
                         {"final_training", r.final_train_seed}});
  }
  m.seeds["schemes"] = run_seeds;
  m.config = {{"experiment", to_json(cfg)}, {"data", data_config}, {"threads", g.threads}};

  const auto text = pretty(report_json);
  std::cout << text;
  m.add_output(fs::path(e.out) / "report.json", text);
  m.add_output(fs::path(e.out) / "report.txt", format_table(report));
  m.save(fs::path(e.out) / "manifest.json");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Water-meter failure prediction pipeline", "meterdown"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", METERDOWN_VERSION);

  Globals g;
  app.add_option("--seed", g.seed, "Base seed for all randomness")->envname("METERDOWN_SEED");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);

  Manifest manifest;
  for (int i = 1; i < argc; ++i) manifest.arguments.emplace_back(argv[i]);

  // synth
  SynthFlags synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic fleet");
  synth_cmd->add_option("--config", synth.config_file, "Fleet config JSON; flags override its keys");
  synth_cmd->add_option("--out", synth.out, "Output directory");
  attach_fleet_flags(synth_cmd, synth);
  synth_cmd->add_option("--noise-process", synth.process_fail, "Rate of flipped process flags")
      ->check(CLI::Range(0.0, 1.0));
  synth_cmd->add_option("--noise-incongruent", synth.incongruent, "Rate of flipped congruence flags")
      ->check(CLI::Range(0.0, 1.0));
  synth_cmd->add_option("--noise-gap", synth.gap, "Rate of over-limit gaps")->check(CLI::Range(0.0, 1.0));

  // validate
  DataFlags validate_data;
  std::string validate_out = ".";
  auto* validate_cmd = app.add_subcommand("validate", "Filter and segment readings, print a summary");
  validate_data.attach(validate_cmd, false);
  validate_cmd->add_option("--out", validate_out, "Output directory");

  // label
  DataFlags label_data;
  std::string label_scheme = "1p+2", label_out = ".";
  bool label_exclude = false;
  auto* label_cmd = app.add_subcommand("label", "Build training windows for one scheme");
  label_data.attach(label_cmd, true);
  label_cmd->add_option("--scheme", label_scheme, "Window scheme, e.g. 1p+2");
  label_cmd->add_flag("--exclude-plateau-negatives", label_exclude);
  label_cmd->add_option("--out", label_out, "Output directory");

  // train
  DataFlags train_data;
  TrainFlags train_flags;
  std::string train_out = "bundle.json";
  bool train_exclude = false;
  auto* train_cmd = app.add_subcommand("train", "Train a model on all windows and save a bundle");
  train_data.attach(train_cmd, true);
  train_flags.attach(train_cmd);
  train_cmd->add_option("--scheme", train_flags.scheme, "Window scheme, e.g. 1p+2");
  train_cmd->add_flag("--exclude-plateau-negatives", train_exclude);
  train_cmd->add_option("--out", train_out, "Bundle path");

  // eval
  DataFlags eval_data;
  std::string eval_model, eval_out = ".";
  auto* eval_cmd = app.add_subcommand("eval", "Score a saved bundle on a fleet");
  eval_data.attach(eval_cmd, true);
  eval_cmd->add_option("--model", eval_model, "Bundle written by train")->required();
  eval_cmd->add_option("--out", eval_out, "Output directory");

  // experiment
  DataFlags exp_data;
  SynthFlags exp_synth;
  TrainFlags exp_train;
  ExperimentFlags exp;
  auto* exp_cmd = app.add_subcommand("experiment", "Holdout + cross-validation AUC per scheme");
  exp_data.attach(exp_cmd, true);
  exp_train.attach(exp_cmd);
  exp_cmd->add_option("--schemes", exp.schemes, "Comma-separated schemes");
  exp_cmd->add_option("--folds", exp.folds)->check(CLI::Range(2, 1000));
  exp_cmd->add_option("--train-fraction", exp.train_fraction);
  exp_cmd->add_flag("--exclude-plateau-negatives", exp.exclude);
  exp_cmd->add_option("--out", exp.out, "Output directory");
  exp_cmd->add_option("--fleet-config", exp_synth.config_file, "Fleet config JSON when no data is given");
  attach_fleet_flags(exp_cmd, exp_synth);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*synth_cmd) {
      manifest.subcommand = "synth";
      return run_synth(synth_cmd, synth, g, manifest);
    }
    if (*validate_cmd) {
      manifest.subcommand = "validate";
      return run_validate(validate_data, validate_out, manifest);
    }
    if (*label_cmd) {
      manifest.subcommand = "label";
      return run_label(label_data, label_scheme, label_exclude, label_out, manifest);
    }
    if (*train_cmd) {
      manifest.subcommand = "train";
      return run_train(train_data, train_flags, train_exclude, train_out, g, manifest);
    }
    if (*eval_cmd) {
      manifest.subcommand = "eval";
      return run_eval(eval_data, eval_model, eval_out, manifest);
    }
    if (*exp_cmd) {
      manifest.subcommand = "experiment";
      return run_experiment_cmd(exp_cmd, exp_data, exp_synth, exp_train, exp, g, manifest);
    }
  } catch (const Error& e) {
    std::cerr << e.to_json().dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << Error("internal", e.what()).to_json().dump() << "\n";
    return 1;
  }
  return 0;
}
