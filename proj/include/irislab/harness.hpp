#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "irislab/codec.hpp"
#include "irislab/errors.hpp"
#include "irislab/metrics.hpp"
#include "irislab/search.hpp"
#include "irislab/synth.hpp"
#include "irislab/validation.hpp"

namespace irislab {

namespace fs = std::filesystem;
using nlohmann::json;

// --- manifests ---------------------------------------------------------------

// Gallery/probe manifest: JSON array of {"path", "identity"} records. Relative
// paths resolve against the manifest's directory. Order is preserved.
inline std::vector<IrisTemplate> load_manifest(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open manifest " + manifest.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("manifest " + manifest.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw ParseError("manifest must be a JSON array of {path, identity}");
  std::vector<IrisTemplate> out;
  for (const auto& rec : doc) {
    if (!rec.is_object() || !rec.contains("path") || !rec.contains("identity"))
      throw ParseError("manifest record needs path and identity");
    fs::path p = rec.at("path").get<std::string>();
    if (p.is_relative()) p = manifest.parent_path() / p;
    IrisTemplate t = load_template(p);
    const auto identity = rec.at("identity").get<std::string>();
    if (t.identity != identity)
      throw ParseError("manifest identity '" + identity + "' does not match template " + p.string());
    out.push_back(std::move(t));
  }
  return out;
}

// Writes each template as <dir>/<sample_id or identity>.irt and a manifest
// listing them relative to the manifest's directory.
inline void write_manifest(const fs::path& manifest, const fs::path& template_dir,
                           std::span<const IrisTemplate> templates) {
  fs::create_directories(template_dir);
  json doc = json::array();
  for (const auto& t : templates) {
    const std::string stem = t.sample_id.empty() ? t.identity : t.sample_id;
    const fs::path file = template_dir / (stem + ".irt");
    save_template(file, t);
    doc.push_back({{"path", fs::relative(file, manifest.parent_path()).generic_string()}, {"identity", t.identity}});
  }
  std::ofstream out(manifest);
  if (!out) throw IoError("cannot write " + manifest.string());
  out << doc.dump(2) << '\n';
}

// --- configuration -------------------------------------------------------------

inline std::string method_flag(Method m) { return m == Method::OneToN ? "1n" : "1first"; }

inline std::vector<Method> parse_methods(const std::string& s) {
  if (s == "1n") return {Method::OneToN};
  if (s == "1first") return {Method::OneToFirst};
  if (s == "both") return {Method::OneToN, Method::OneToFirst};
  throw ParseError("method must be 1n, 1first or both (got '" + s + "')");
}

struct ManifestPopulation {
  std::string gallery;
  std::string probes;
};

struct ExperimentConfig {
  SynthParams population;
  std::optional<ManifestPopulation> manifest;
  std::vector<std::size_t> gallery_sizes{100, 200, 400, 600, 800, 1000, 1200, 1400};
  std::vector<double> thresholds = default_thresholds();
  std::vector<int> shift_ranges = default_shift_ranges();
  std::vector<Method> methods{Method::OneToN, Method::OneToFirst};
  std::optional<TwoStageRanges> two_stage;
  std::uint64_t master_seed = 1;
  std::string output_dir = "results";

  void validate() const {
    require(!gallery_sizes.empty(), "gallery_sizes must be non-empty");
    require(std::is_sorted(gallery_sizes.begin(), gallery_sizes.end()), "gallery_sizes must be non-decreasing");
    require(gallery_sizes.front() > 0, "gallery sizes must be positive");
    require(!thresholds.empty() && !shift_ranges.empty() && !methods.empty(),
            "thresholds, shift_ranges and methods must be non-empty");
    for (double t : thresholds) require(t > 0.0 && t < 1.0, "thresholds must lie strictly between 0 and 1");
    int widest = *std::max_element(shift_ranges.begin(), shift_ranges.end());
    for (int s : shift_ranges) require(s >= 0, "shift ranges must be non-negative");
    if (two_stage) {
      require(two_stage->first >= 0 && two_stage->first < two_stage->widened, "two_stage needs 0 <= s1 < s2");
      widest = std::max(widest, two_stage->widened);
    }
    require(!output_dir.empty(), "output_dir must be set");
    if (!manifest) {
      population.validate();
      require(gallery_sizes.back() <= population.n_identities, "largest gallery exceeds n_identities");
      require(2 * static_cast<std::size_t>(widest) < population.cols, "shift range must be below cols/2");
    }
  }
};

inline json to_json(const SynthParams& p) {
  json schedule = json::array();
  for (const auto& b : p.probe_schedule) schedule.push_back({{"gallery_size", b.gallery_size}, {"probe_total", b.probe_total}});
  return {{"n_identities", p.n_identities},
          {"probes_per_identity", p.probes_per_identity},
          {"probe_schedule", schedule},
          {"rows", p.rows},
          {"cols", p.cols},
          {"block_rows", p.block_rows},
          {"block_cols", p.block_cols},
          {"flip_prob", p.flip_prob},
          {"occlusion_frac_max", p.occlusion_frac_max},
          {"rotation_offset_max", p.rotation_offset_max},
          {"seed", p.seed}};
}

inline SynthParams synth_params_from_json(const json& j, SynthParams p = {}) {
  p.n_identities = j.value("n_identities", p.n_identities);
  p.probes_per_identity = j.value("probes_per_identity", p.probes_per_identity);
  if (j.contains("probe_schedule")) {
    p.probe_schedule.clear();
    for (const auto& b : j.at("probe_schedule"))
      p.probe_schedule.push_back({b.at("gallery_size").get<std::size_t>(), b.at("probe_total").get<std::size_t>()});
  }
  p.rows = j.value("rows", p.rows);
  p.cols = j.value("cols", p.cols);
  p.block_rows = j.value("block_rows", p.block_rows);
  p.block_cols = j.value("block_cols", p.block_cols);
  p.flip_prob = j.value("flip_prob", p.flip_prob);
  p.occlusion_frac_max = j.value("occlusion_frac_max", p.occlusion_frac_max);
  p.rotation_offset_max = j.value("rotation_offset_max", p.rotation_offset_max);
  p.seed = j.value("seed", p.seed);
  return p;
}

inline json to_json(const ExperimentConfig& c) {
  json j;
  if (c.manifest) {
    j["manifest"] = {{"gallery", c.manifest->gallery}, {"probes", c.manifest->probes}};
  } else {
    json pop = to_json(c.population);
    pop.erase("seed");  // always master_seed
    j["population"] = pop;
  }
  j["gallery_sizes"] = c.gallery_sizes;
  j["thresholds"] = c.thresholds;
  j["shift_ranges"] = c.shift_ranges;
  json methods = json::array();
  for (Method m : c.methods) methods.push_back(method_flag(m));
  j["methods"] = methods;
  j["two_stage"] = c.two_stage ? json{{"s1", c.two_stage->first}, {"s2", c.two_stage->widened}} : json(nullptr);
  j["master_seed"] = c.master_seed;
  j["output_dir"] = c.output_dir;
  return j;
}

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  try {
    if (j.contains("population")) c.population = synth_params_from_json(j.at("population"));
    if (j.contains("manifest") && !j.at("manifest").is_null())
      c.manifest = ManifestPopulation{j.at("manifest").at("gallery").get<std::string>(),
                                      j.at("manifest").at("probes").get<std::string>()};
    if (j.contains("gallery_sizes")) c.gallery_sizes = j.at("gallery_sizes").get<std::vector<std::size_t>>();
    if (j.contains("thresholds")) c.thresholds = j.at("thresholds").get<std::vector<double>>();
    if (j.contains("shift_ranges")) c.shift_ranges = j.at("shift_ranges").get<std::vector<int>>();
    if (j.contains("methods")) {
      c.methods.clear();
      for (const auto& m : j.at("methods")) {
        const auto parsed = parse_methods(m.get<std::string>());
        c.methods.insert(c.methods.end(), parsed.begin(), parsed.end());
      }
    }
    if (j.contains("two_stage") && !j.at("two_stage").is_null())
      c.two_stage = TwoStageRanges{j.at("two_stage").at("s1").get<int>(), j.at("two_stage").at("s2").get<int>()};
    c.master_seed = j.value("master_seed", c.master_seed);
    c.output_dir = j.value("output_dir", c.output_dir);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  c.population.seed = c.master_seed;
  return c;
}

inline ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  try {
    return config_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ParseError("config " + path.string() + ": " + e.what());
  }
}

// IRIS_LAB_THREADS caps worker threads; unset or 0 lets the sweep decide.
inline unsigned threads_from_env() {
  const char* v = std::getenv("IRIS_LAB_THREADS");
  if (!v || !*v) return 0;
  try {
    return static_cast<unsigned>(std::stoul(v));
  } catch (const std::exception&) {
    throw ParseError("IRIS_LAB_THREADS must be a non-negative integer");
  }
}

// --- experiment --------------------------------------------------------------

inline Population build_population(const ExperimentConfig& cfg, std::ostream& log) {
  if (cfg.manifest) {
    Population pop;
    pop.gallery = Gallery(load_manifest(cfg.manifest->gallery), cfg.master_seed);
    auto probes = load_manifest(cfg.manifest->probes);
    const std::size_t before = probes.size();
    std::erase_if(probes, [&](const IrisTemplate& p) { return !pop.gallery.index_of(p.identity).has_value(); });
    if (probes.size() != before) log << "dropped " << (before - probes.size()) << " probes of unenrolled identities\n";
    pop.probes = std::move(probes);
    return pop;
  }
  SynthParams params = cfg.population;
  params.seed = cfg.master_seed;
  return generate_population(params, cfg.gallery_sizes);
}

struct ResultsBundle {
  std::string rows_csv;
  std::string summary_csv;
  std::string roc_json;
  std::string validation_json;
  std::string config_json;
  std::string log;
  SweepResult sweep;
};

// Checks that hold on any sweep: decision equivalence, FNMR equality of row
// pairs, and per-probe 1:N monotonicity in threshold.
inline json sweep_validation(const SweepResult& s) {
  std::uint64_t fnmr_pairs = 0;
  std::uint64_t fnmr_mismatches = 0;
  std::map<std::tuple<bool, std::size_t, int, double>, std::vector<std::size_t>> twins;
  for (std::size_t c = 0; c < s.cells.size(); ++c) {
    const auto& cell = s.cells[c];
    const bool staged = cell.method == RowMethod::OneToNTwoStage || cell.method == RowMethod::OneToFirstTwoStage;
    twins[{staged, cell.gallery_size, cell.shift_range, cell.threshold}].push_back(c);
  }
  for (const auto& [key, cells] : twins) {
    if (cells.size() != 2) continue;
    ++fnmr_pairs;
    if (s.counts[cells[0]].fnm != s.counts[cells[1]].fnm) ++fnmr_mismatches;
  }

  // Per probe: along thresholds for a fixed (1:N, size, range), a Match never
  // turns back into a NonMatch.
  std::uint64_t monotone_checks = 0;
  std::uint64_t monotone_violations = 0;
  if (!s.probe_outcomes.empty()) {
    std::map<std::tuple<std::size_t, int>, std::vector<std::size_t>> series;  // cells sorted by threshold
    for (std::size_t c = 0; c < s.cells.size(); ++c)
      if (s.cells[c].method == RowMethod::OneToN) series[{s.cells[c].gallery_size, s.cells[c].shift_range}].push_back(c);
    for (std::size_t p = 0; p < s.probe_count; ++p) {
      for (const auto& [key, cells] : series) {
        bool matched = false;
        for (std::size_t c : cells) {
          const std::uint8_t o = s.probe_outcomes[p * s.cells.size() + c];
          if (o == kNotEvaluated) break;
          ++monotone_checks;
          const bool now = o != static_cast<std::uint8_t>(Outcome::FalseNonMatch);
          if (matched && !now) ++monotone_violations;
          matched = matched || now;
        }
      }
    }
  }
  return {{"decision_checks", s.decision_checks},
          {"decision_mismatches", s.decision_mismatches},
          {"fnmr_row_pairs", fnmr_pairs},
          {"fnmr_row_pair_mismatches", fnmr_mismatches},
          {"one_to_n_monotone_checks", monotone_checks},
          {"one_to_n_monotone_violations", monotone_violations}};
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

// Runs the full grid over nested prefix galleries and writes the bundle to
// cfg.output_dir (rows.csv, summary.csv, roc.json, validation.json,
// config.json, run.log). Config and output directory are checked before any
// matching starts.
inline ResultsBundle run_experiment(const ExperimentConfig& cfg, bool write_files = true) {
  cfg.validate();
  const fs::path out_dir = cfg.output_dir;
  if (write_files) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    const fs::path probe_file = out_dir / ".write_test";
    std::ofstream probe(probe_file);
    if (ec || !probe) throw IoError("output directory is not writable: " + out_dir.string());
    probe.close();
    fs::remove(probe_file, ec);
  }

  ResultsBundle bundle;
  std::ostringstream log;
  bundle.config_json = to_json(cfg).dump(2) + "\n";

  const Population pop = build_population(cfg, log);
  require(cfg.gallery_sizes.back() <= pop.gallery.size(), "largest gallery exceeds the enrolled population");
  log << "population: " << pop.gallery.size() << " enrolled, " << pop.probes.size() << " probes\n";

  SweepGrid grid;
  grid.gallery_sizes = cfg.gallery_sizes;
  grid.thresholds = cfg.thresholds;
  grid.shift_ranges = cfg.shift_ranges;
  grid.methods = cfg.methods;
  grid.two_stage = cfg.two_stage;
  SweepOptions opts;
  opts.threads = threads_from_env();
  opts.keep_probe_outcomes = true;
  bundle.sweep = run_sweep(pop.gallery, pop.probes, grid, opts);
  log << "sweep: " << bundle.sweep.rows.size() << " rows\n";

  std::ostringstream rows;
  write_rows_csv(rows, bundle.sweep.rows);
  bundle.rows_csv = rows.str();
  const Report report = render_report(bundle.rows_csv);
  bundle.summary_csv = report.summary_csv;
  bundle.roc_json = report.roc_json;
  bundle.validation_json = sweep_validation(bundle.sweep).dump(2) + "\n";
  bundle.log = log.str();

  if (write_files) {
    write_text(out_dir / "rows.csv", bundle.rows_csv);
    write_text(out_dir / "summary.csv", bundle.summary_csv);
    write_text(out_dir / "roc.json", bundle.roc_json);
    write_text(out_dir / "validation.json", bundle.validation_json);
    write_text(out_dir / "config.json", bundle.config_json);
    write_text(out_dir / "run.log", bundle.log);
  }
  return bundle;
}

}  // namespace irislab
