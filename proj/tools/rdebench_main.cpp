// rdebench: configure, run and persist path-space Monte Carlo experiments.
//
// Verbs:
//   simulate    write an ensemble (JSON-lines) from a named spec
//   distance    distance report between two ensemble files
//   experiment  run one named experiment (donsker | bm-char | spatial | rates)
//   report      regenerate the full report bundle from one config
//
// Exit codes: 0 success, 2 config/validation error, 3 runtime error.
// Errors are also emitted as a JSON object on stderr.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rde/donsker.hpp"
#include "rde/ensemble.hpp"
#include "rde/experiments.hpp"
#include "rde/metrics.hpp"
#include "rde/recursion.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "0.1.0";

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string iso_timestamp() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&now));
  return buf;
}

// Output directory: flag wins, then the environment override, then cwd.
fs::path resolve_out_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return fs::path(flag_value);
  if (const char* env = std::getenv("RDEBENCH_OUT_DIR")) return fs::path(env);
  return fs::path(".");
}

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error in '" + path + "': " + e.what());
  }
}

template <class T>
T require_field(const json& j, const std::string& key) {
  if (!j.contains(key)) throw ConfigError("config: missing required field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config: field '" + key + "' has the wrong type: " + e.what());
  }
}

rde::Seed require_seed(const json& j) {
  // Seeds are mandatory: runs must be reproducible, so no wall-clock default.
  return rde::Seed{require_field<std::uint64_t>(j, "seed")};
}

rde::IncrementLaw increment_from_config(const json& j) {
  if (!j.contains("increment")) return rde::IncrementLaw::rademacher();
  const json& inc = j.at("increment");
  if (inc.is_string()) {
    const std::string name = inc.get<std::string>();
    if (name == "rademacher") return rde::IncrementLaw::rademacher();
    if (name == "standard_normal" || name == "normal") return rde::IncrementLaw::standard_normal();
    if (name == "uniform") return rde::IncrementLaw::uniform_pm_sqrt3();
    throw ConfigError("config: unknown increment law '" + name + "'");
  }
  if (inc.is_object()) {
    try {
      return rde::IncrementLaw::user_table(inc.at("values").get<std::vector<double>>(),
                                           inc.at("probs").get<std::vector<double>>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config: increment table invalid: ") + e.what());
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config: increment table malformed: ") + e.what());
    }
  }
  throw ConfigError("config: field 'increment' must be a name or a {values, probs} table");
}

rde::PathKind interpolation_from_config(const json& j) {
  const std::string name = j.value("interpolation", "linear");
  if (name == "linear") return rde::PathKind::kPiecewiseLinear;
  if (name == "constant") return rde::PathKind::kPiecewiseConstant;
  throw ConfigError("config: interpolation must be 'linear' or 'constant'");
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
}

void write_manifest(const fs::path& path, const json& config, rde::Seed seed,
                    const std::string& started, const std::vector<std::string>& outputs) {
  const json manifest{{"config_digest", rde::digest_hex(rde::digest_of(config))},
                      {"seed", seed.value},
                      {"tool_version", kToolVersion},
                      {"started_at", started},
                      {"finished_at", iso_timestamp()},
                      {"outputs", outputs}};
  write_text_file(path, manifest.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

int cmd_simulate(const std::string& config_path, const std::string& out_dir_flag,
                 unsigned threads) {
  const std::string started = iso_timestamp();
  const json cfg = load_config(config_path);
  const rde::Seed seed = require_seed(cfg);
  const std::string kind = require_field<std::string>(cfg, "kind");
  const auto n = require_field<std::int64_t>(cfg, "n");
  const auto size = require_field<std::size_t>(cfg, "size");
  if (n < 0) throw ConfigError("config: 'n' must be >= 0");
  if (size < 1) throw ConfigError("config: 'size' must be >= 1");
  const rde::IncrementLaw law = increment_from_config(cfg);
  const rde::PathKind interp = interpolation_from_config(cfg);
  const std::string out_name = cfg.value("out", kind + "_n" + std::to_string(n) + ".jsonl");

  rde::Ensemble ensemble = [&] {
    if (kind == "donsker") {
      const auto n0 = cfg.value("n0", std::int64_t{2});
      if (n0 < 1) throw ConfigError("config: 'n0' must be a positive integer");
      if (n0 != 2) throw ConfigError("config: the donsker spec has n0 = 2");
      rde::RecursionSpec spec = rde::donsker_spec(law, interp, 65536, seed.child(1));
      return rde::process_ensemble(spec, n, size, seed.child(0), threads);
    }
    if (kind == "walk") {
      if (n < 1) throw ConfigError("config: walk needs 'n' >= 1");
      return rde::walk_ensemble(static_cast<std::size_t>(n), law, interp, size, seed.child(0),
                                threads);
    }
    if (kind == "bm") {
      if (n < 1) throw ConfigError("config: bm needs 'n' >= 1");
      std::vector<std::optional<rde::Path>> slots(size);
      rde::parallel_for(size, threads, [&](std::size_t i) {
        slots[i] = rde::linearized_bm(static_cast<std::size_t>(n), seed.child(0).child(i));
      });
      std::vector<rde::Path> paths;
      paths.reserve(size);
      for (auto& s : slots) paths.push_back(std::move(*s));
      return rde::Ensemble::make(std::move(paths),
                                 rde::EnsembleMeta{"bm:n=" + std::to_string(n), seed.value, 0});
    }
    throw ConfigError("config: unknown simulate kind '" + kind +
                      "' (expected donsker | walk | bm)");
  }();
  ensemble.meta.spec_digest = rde::digest_of(cfg);

  const fs::path out_dir = resolve_out_dir(out_dir_flag);
  fs::create_directories(out_dir);
  const fs::path out_path = out_dir / out_name;
  std::ostringstream os;
  rde::write_jsonl(os, ensemble);
  write_text_file(out_path, os.str());
  write_manifest(out_dir / (out_name + ".manifest.json"), cfg, seed, started,
                 {out_path.string()});
  std::cout << out_path.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// distance
// ---------------------------------------------------------------------------

rde::Ensemble load_ensemble(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open ensemble file '" + path + "'");
  try {
    return rde::read_jsonl(in);
  } catch (const std::exception& e) {
    throw ConfigError("ensemble file '" + path + "': " + e.what());
  }
}

rde::Ensemble resample(const rde::Ensemble& e, std::size_t size, rde::Seed seed) {
  rde::Rng rng(seed);
  std::vector<rde::Path> samples;
  samples.reserve(size);
  for (std::size_t i = 0; i < size; ++i)
    samples.push_back(e.samples[rng.uniform_index(e.size())]);
  return rde::Ensemble::make(std::move(samples), e.meta);
}

int cmd_distance(const std::string& file_a, const std::string& file_b,
                 const std::string& estimator, double p, const std::string& grid_arg,
                 std::size_t bootstrap, std::size_t chunk, std::size_t resample_to,
                 std::uint64_t resample_seed, const std::string& out_file,
                 const std::string& csv_file, unsigned threads) {
  rde::Ensemble a = load_ensemble(file_a);
  rde::Ensemble b = load_ensemble(file_b);
  if (resample_to > 0) {
    a = resample(a, resample_to, rde::Seed{resample_seed}.child(0));
    b = resample(b, resample_to, rde::Seed{resample_seed}.child(1));
  }
  if (a.size() != b.size())
    throw ConfigError("ensemble sizes differ (" + std::to_string(a.size()) + " vs " +
                      std::to_string(b.size()) + "); rerun with --resample <size>");

  std::vector<double> grid;
  if (!grid_arg.empty()) {
    std::stringstream ss(grid_arg);
    std::string item;
    while (std::getline(ss, item, ',')) grid.push_back(std::stod(item));
  }

  rde::DistanceOptions opt;
  opt.chunk_size = chunk;
  opt.bootstrap_replicates = bootstrap;
  opt.threads = threads;

  rde::DistanceReport report;
  if (estimator == "exact_1d") {
    if (grid.size() != 1)
      throw ConfigError("estimator exact_1d needs a one-point --grid (paths are not 1-D)");
    report = rde::fdd_distance(a, b, grid, p, opt);
  } else if (estimator == "per_marginal") {
    if (grid.empty()) throw ConfigError("estimator per_marginal needs --grid");
    report = rde::per_marginal_bound(rde::grid_eval(a, grid), rde::grid_eval(b, grid), p);
    report.grid = grid;
  } else if (estimator == "assignment") {
    report = grid.empty() ? rde::path_lp_distance(a, b, p, opt)
                          : rde::fdd_distance(a, b, grid, p, opt);
  } else {
    throw ConfigError("unknown estimator '" + estimator +
                      "' (expected assignment | exact_1d | per_marginal)");
  }

  const std::string payload = report.to_json().dump(2) + "\n";
  if (out_file.empty()) {
    std::cout << payload;
  } else {
    write_text_file(out_file, payload);
    std::cout << out_file << "\n";
  }
  if (!csv_file.empty()) {
    const bool fresh = !fs::exists(csv_file);
    std::ofstream csv(csv_file, std::ios::app);
    if (fresh) csv << "pair,estimator,value,stderr,seed\n";
    csv << fs::path(file_a).filename().string() << "|" << fs::path(file_b).filename().string()
        << "," << rde::to_string(report.estimator) << "," << json(report.value).dump() << ","
        << json(report.stderr_value).dump() << "," << a.meta.seed << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// experiment / report
// ---------------------------------------------------------------------------

rde::ExperimentConfig donsker_config_from(const json& cfg, unsigned threads) {
  rde::ExperimentConfig out;
  out.seed = require_seed(cfg);
  if (cfg.contains("n_values")) out.n_values = cfg.at("n_values").get<std::vector<std::int64_t>>();
  out.ensemble_size = cfg.value("size", out.ensemble_size);
  if (cfg.contains("grid")) out.grid = cfg.at("grid").get<std::vector<double>>();
  out.s = cfg.value("s", out.s);
  out.increment = increment_from_config(cfg);
  out.interpolation = interpolation_from_config(cfg);
  out.chunk_size = cfg.value("chunk", out.chunk_size);
  out.zeta_size = cfg.value("zeta_size", out.zeta_size);
  out.threads = threads;
  try {
    out.validate();
    rde::MetricOrder check(out.s);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return out;
}

rde::BmCharConfig bm_char_config_from(const json& cfg, unsigned threads) {
  rde::BmCharConfig out;
  out.seed = require_seed(cfg);
  out.iterations = cfg.value("iterations", out.iterations);
  out.ensemble_size = cfg.value("size", out.ensemble_size);
  out.walk_length = cfg.value("walk_length", out.walk_length);
  out.fine_grid = cfg.value("fine_grid", out.fine_grid);
  if (cfg.contains("grid")) out.grid = cfg.at("grid").get<std::vector<double>>();
  out.null_pairs = cfg.value("null_pairs", out.null_pairs);
  out.chunk_size = cfg.value("chunk", out.chunk_size);
  out.threads = threads;
  if (out.iterations < 1 || out.ensemble_size < 100 || out.walk_length < 1 ||
      out.fine_grid < 2 || out.grid.empty())
    throw ConfigError("config: bm-char parameters out of range");
  return out;
}

rde::SpatialConfig spatial_config_from(const json& cfg, unsigned threads) {
  rde::SpatialConfig out;
  out.seed = require_seed(cfg);
  out.iterations = cfg.value("iterations", out.iterations);
  out.ensemble_size = cfg.value("size", out.ensemble_size);
  if (cfg.contains("grid")) out.grid = cfg.at("grid").get<std::vector<double>>();
  out.null_pairs = cfg.value("null_pairs", out.null_pairs);
  out.chunk_size = cfg.value("chunk", out.chunk_size);
  out.threads = threads;
  if (out.iterations < 1 || out.ensemble_size < 100 || out.grid.empty())
    throw ConfigError("config: spatial parameters out of range");
  return out;
}

rde::RatesConfig rates_config_from(const json& cfg) {
  rde::RatesConfig out;
  out.seed = require_seed(cfg);
  if (cfg.contains("n_values")) out.n_values = cfg.at("n_values").get<std::vector<std::int64_t>>();
  out.s = cfg.value("s", out.s);
  out.mc_samples = cfg.value("mc_samples", out.mc_samples);
  out.increment = increment_from_config(cfg);
  out.interpolation = interpolation_from_config(cfg);
  if (cfg.contains("rate")) {
    const json& r = cfg.at("rate");
    const std::string kind = r.value("kind", "power");
    if (kind == "power")
      out.rate = rde::RateFunction::power(r.value("delta", 0.25));
    else if (kind == "log_power")
      out.rate = rde::RateFunction::log_power(r.value("k", 1));
    else
      throw ConfigError("config: rate kind must be 'power' or 'log_power'");
  }
  if (out.n_values.empty() || out.mc_samples < 1)
    throw ConfigError("config: rates parameters out of range");
  return out;
}

int run_named_experiment(const std::string& name, const json& cfg,
                         const std::string& out_dir_flag, unsigned threads,
                         std::vector<std::string>* outputs_seen = nullptr) {
  const std::string started = iso_timestamp();
  const fs::path out_dir = resolve_out_dir(out_dir_flag);
  fs::create_directories(out_dir);

  json report_json;
  std::string csv;
  rde::Seed seed{0};
  if (name == "donsker") {
    const rde::ExperimentConfig c = donsker_config_from(cfg, threads);
    seed = c.seed;
    const rde::DonskerReport report = rde::run_donsker_experiment(c);
    report_json = report.to_json();
    csv = report.to_csv();
  } else if (name == "bm-char") {
    const rde::BmCharConfig c = bm_char_config_from(cfg, threads);
    seed = c.seed;
    const rde::BmCharReport report = rde::run_bm_char_experiment(c);
    report_json = report.to_json();
    csv = report.to_csv();
  } else if (name == "spatial") {
    const rde::SpatialConfig c = spatial_config_from(cfg, threads);
    seed = c.seed;
    const rde::SpatialReport report = rde::run_spatial_experiment(c);
    report_json = report.to_json();
    csv = report.to_csv();
  } else if (name == "rates") {
    const rde::RatesConfig c = rates_config_from(cfg);
    seed = c.seed;
    const rde::RatesReport report = rde::run_rates_experiment(c);
    report_json = report.to_json();
    csv = report.to_csv();
  } else {
    throw ConfigError("unknown experiment '" + name +
                      "'; available: donsker, bm-char, spatial, rates");
  }

  const std::string stem = name == "bm-char" ? "bm_char" : name;
  const fs::path json_path = out_dir / (stem + ".report.json");
  const fs::path csv_path = out_dir / (stem + ".sweep.csv");
  write_text_file(json_path, report_json.dump(2) + "\n");
  write_text_file(csv_path, csv);
  write_manifest(out_dir / (stem + ".manifest.json"), cfg, seed, started,
                 {json_path.string(), csv_path.string()});
  std::cout << json_path.string() << "\n" << csv_path.string() << "\n";
  if (outputs_seen) {
    outputs_seen->push_back(json_path.string());
    outputs_seen->push_back(csv_path.string());
  }
  return 0;
}

int cmd_report(const std::string& config_path, const std::string& out_dir_flag,
               unsigned threads) {
  const json cfg = load_config(config_path);
  const rde::Seed root = require_seed(cfg);
  std::vector<std::string> outputs;
  const std::string started = iso_timestamp();
  for (const std::string name : {"donsker", "bm-char", "spatial", "rates"}) {
    const std::string key = name == "bm-char" ? "bm_char" : name;
    json sub = cfg.contains(key) ? cfg.at(key) : json::object();
    if (!sub.contains("seed")) sub["seed"] = root.child(rde::fnv1a64(key)).value;
    run_named_experiment(name, sub, out_dir_flag, threads, &outputs);
  }
  const fs::path out_dir = resolve_out_dir(out_dir_flag);
  write_manifest(out_dir / "report.manifest.json", cfg, root, started, outputs);
  return 0;
}

json error_json(int code, const std::string& message) {
  return json{{"error", {{"code", code}, {"message", message}}}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rdebench: Monte Carlo workbench for recursive distributional equations on paths"};
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = hardware concurrency)");

  std::string config_path, out_dir;

  auto* simulate = app.add_subcommand("simulate", "sample an ensemble and write JSON-lines");
  simulate->add_option("--config", config_path, "JSON config file")->required();
  simulate->add_option("--out-dir", out_dir, "output directory (default: $RDEBENCH_OUT_DIR or .)");

  std::string file_a, file_b, estimator = "assignment", grid_arg, dist_out, dist_csv;
  double p = 2.0;
  std::size_t bootstrap = 0, chunk = 256, resample_to = 0;
  std::uint64_t resample_seed = 1;
  auto* distance = app.add_subcommand("distance", "distance report between two ensembles");
  distance->add_option("file_a", file_a, "first ensemble (JSON-lines)")->required();
  distance->add_option("file_b", file_b, "second ensemble (JSON-lines)")->required();
  distance->add_option("--estimator", estimator, "assignment | exact_1d | per_marginal");
  distance->add_option("--p", p, "cost exponent (>= 1)");
  distance->add_option("--grid", grid_arg, "comma-separated times; empty = path-level distance");
  distance->add_option("--bootstrap", bootstrap, "bootstrap replicates for the stderr");
  distance->add_option("--chunk", chunk, "block size for chunked averaging above the cap");
  distance->add_option("--resample", resample_to, "resample both ensembles to this size first");
  distance->add_option("--resample-seed", resample_seed, "seed for --resample");
  distance->add_option("--out", dist_out, "write the report JSON here (default: stdout)");
  distance->add_option("--csv", dist_csv, "append a CSV row here");

  std::string experiment_name;
  auto* experiment = app.add_subcommand("experiment", "run one named experiment");
  experiment->add_option("name", experiment_name, "donsker | bm-char | spatial | rates")
      ->required();
  experiment->add_option("--config", config_path, "JSON config file")->required();
  experiment
      ->add_option("--out-dir", out_dir, "output directory (default: $RDEBENCH_OUT_DIR or .)");

  auto* report = app.add_subcommand("report", "regenerate the full report bundle");
  report->add_option("--config", config_path, "JSON config file")->required();
  report->add_option("--out-dir", out_dir, "output directory (default: $RDEBENCH_OUT_DIR or .)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << error_json(2, e.what()).dump() << "\n";
    return 2;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(config_path, out_dir, threads);
    if (distance->parsed())
      return cmd_distance(file_a, file_b, estimator, p, grid_arg, bootstrap, chunk, resample_to,
                          resample_seed, dist_out, dist_csv, threads);
    if (experiment->parsed())
      return run_named_experiment(experiment_name, load_config(config_path), out_dir, threads);
    if (report->parsed()) return cmd_report(config_path, out_dir, threads);
  } catch (const ConfigError& e) {
    std::cerr << error_json(2, e.what()).dump() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << error_json(2, e.what()).dump() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << error_json(2, e.what()).dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << error_json(3, e.what()).dump() << "\n";
    return 3;
  }
  return 0;
}
