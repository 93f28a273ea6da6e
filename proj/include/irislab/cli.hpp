#pragma once

// iris_lab command line. Exit status: 0 success, 1 usage error, 2 runtime
// error, 3 validation violations found.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <filesystem>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "irislab/codec.hpp"
#include "irislab/harness.hpp"
#include "irislab/metrics.hpp"
#include "irislab/search.hpp"
#include "irislab/synth.hpp"
#include "irislab/validation.hpp"

namespace irislab::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kRuntime = 2, kViolations = 3 };

namespace detail {

struct GlobalFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string output;
  std::string method;
  std::vector<int> shifts;
  std::vector<double> thresholds;
};

inline ExperimentConfig resolve_config(const GlobalFlags& f) {
  ExperimentConfig cfg = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
  if (f.seed) {
    cfg.master_seed = *f.seed;
    cfg.population.seed = *f.seed;
  }
  if (!f.output.empty()) cfg.output_dir = f.output;
  if (!f.method.empty()) cfg.methods = parse_methods(f.method);
  if (!f.shifts.empty()) cfg.shift_ranges = f.shifts;
  if (!f.thresholds.empty()) cfg.thresholds = f.thresholds;
  return cfg;
}

inline nlohmann::json result_json(const SearchResult& r, Method m) {
  nlohmann::json j{{"method", method_flag(m)},
                   {"decision", r.matched() ? "match" : "non_match"},
                   {"comparisons", r.comparisons}};
  if (r.matched()) {
    j["identity"] = *r.matched_identity;
    j["matched_index"] = *r.matched_index;
    j["score"] = *r.score->value();
    j["best_shift"] = r.score->best_shift;
    j["bits_compared"] = r.score->bits_compared;
  } else {
    j["identity"] = nullptr;
    j["score"] = nullptr;
  }
  return j;
}

inline std::vector<int> parse_pair(const std::string& s) {
  std::vector<int> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(std::stoi(item));
  if (out.size() != 2) throw ParseError("expected two comma-separated shift ranges, got '" + s + "'");
  return out;
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Iris-code 1:N / 1:First identification lab", "iris_lab"};
  app.fallthrough();
  app.require_subcommand(1);

  detail::GlobalFlags g;
  app.add_option("--config", g.config, "Experiment config JSON");
  app.add_option("--seed", g.seed, "Master seed (overrides config)");
  app.add_option("--output", g.output, "Output directory");
  app.add_option("--method", g.method, "Search method")->check(CLI::IsMember({"1n", "1first", "both"}));
  app.add_option("--shifts", g.shifts, "Shift ranges, comma separated")->delimiter(',')->allow_extra_args(false);
  app.add_option("--thresholds", g.thresholds, "HD thresholds, comma separated")->delimiter(',')->allow_extra_args(false);

  auto* generate = app.add_subcommand("generate", "Generate a synthetic population as template files + manifests");
  std::optional<std::size_t> identities;
  std::optional<std::size_t> probes_per_identity;
  generate->add_option("--identities", identities, "Number of identities");
  generate->add_option("--probes-per-identity", probes_per_identity, "Probes per identity");

  auto* identify = app.add_subcommand("identify", "Search one probe against a gallery manifest");
  std::string probe_path;
  std::string gallery_path;
  double threshold = 0.32;
  std::string two_stage;
  identify->add_option("--threshold", threshold, "HD threshold")->check(CLI::Range(0.0, 1.0));
  identify->add_option("--two-stage", two_stage, "Widening search 'S1,S2' (overrides --shifts)");
  identify->add_option("probe", probe_path, "Probe template (.irt)")->required();
  identify->add_option("gallery", gallery_path, "Gallery manifest (.json)")->required();

  auto* sweep_cmd = app.add_subcommand("sweep", "Run the experiment grid and write a results bundle");

  auto* validate = app.add_subcommand("validate", "Run oracle and decision-equivalence suites");
  std::uint64_t trials = 10000;
  std::size_t oracle_pairs = 1000;
  std::size_t max_probes = 200;
  validate->add_option("--trials", trials, "Randomized equivalence trials");
  validate->add_option("--oracle-pairs", oracle_pairs, "Random 20x240 oracle pairs at +-14");
  validate->add_option("--max-probes", max_probes, "Population probes per equivalence check");
  validate->add_option("--identities", identities, "Population identities");

  auto* report = app.add_subcommand("report", "Summary CSV and ROC JSON from an existing rows CSV");
  std::string rows_path;
  report->add_option("rows", rows_path, "rows.csv from a sweep")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  try {
    if (*generate) {
      ExperimentConfig cfg = detail::resolve_config(g);
      if (identities) cfg.population.n_identities = *identities;
      if (probes_per_identity) cfg.population.probes_per_identity = *probes_per_identity;
      cfg.population.seed = cfg.master_seed;
      cfg.population.validate();
      const Population pop = generate_population(cfg.population);
      const fs::path dir = cfg.output_dir;
      fs::create_directories(dir);
      write_manifest(dir / "gallery.json", dir / "gallery", pop.gallery.entries());
      write_manifest(dir / "probes.json", dir / "probes", pop.probes);
      write_text(dir / "population.json", to_json(cfg.population).dump(2) + "\n");
      out << nlohmann::json{{"gallery", (dir / "gallery.json").string()},
                            {"probes", (dir / "probes.json").string()},
                            {"enrolled", pop.gallery.size()},
                            {"probe_count", pop.probes.size()}}
                 .dump()
          << '\n';
      return kOk;
    }

    if (*identify) {
      const IrisTemplate probe = load_template(probe_path);
      const Gallery gallery(load_manifest(gallery_path));
      const auto methods = parse_methods(g.method.empty() ? "both" : g.method);
      const int shift = g.shifts.empty() ? 0 : g.shifts.front();
      if (g.shifts.size() > 1) throw ParseError("identify takes a single --shifts value");
      nlohmann::json results = nlohmann::json::object();
      for (Method m : methods) {
        SearchResult r;
        if (!two_stage.empty()) {
          const auto pair = detail::parse_pair(two_stage);
          r = identify_two_stage(gallery, probe, threshold, ShiftRange{pair[0]}, ShiftRange{pair[1]}, m);
        } else {
          r = irislab::identify(m, gallery, probe, SearchParams{threshold, ShiftRange{shift}});
        }
        results[method_flag(m)] = detail::result_json(r, m);
      }
      out << (methods.size() == 1 ? results.begin().value() : results).dump(2) << '\n';
      return kOk;
    }

    if (*sweep_cmd) {
      const ExperimentConfig cfg = detail::resolve_config(g);
      const ResultsBundle bundle = run_experiment(cfg);
      out << bundle.log;
      out << "wrote " << (fs::path(cfg.output_dir) / "rows.csv").string() << '\n';
      const auto v = nlohmann::json::parse(bundle.validation_json);
      if (v.at("decision_mismatches").get<std::uint64_t>() != 0 ||
          v.at("fnmr_row_pair_mismatches").get<std::uint64_t>() != 0 ||
          v.at("one_to_n_monotone_violations").get<std::uint64_t>() != 0)
        return kViolations;
      return kOk;
    }

    if (*validate) {
      ExperimentConfig cfg = detail::resolve_config(g);
      if (identities) cfg.population.n_identities = *identities;
      nlohmann::json rep;
      bool ok = true;

      const int exhaustive_ranges[] = {0, 1, 2};
      const OracleReport exhaustive = oracle_exhaustive_1x8(exhaustive_ranges);
      const OracleReport random = oracle_random_pairs(oracle_pairs, 20, 240, ShiftRange{14}, cfg.master_seed);
      rep["oracle"] = {to_json(exhaustive), to_json(random)};
      ok = ok && exhaustive.ok() && random.ok();

      const TrialReport t = randomized_equivalence_trials(trials, cfg.master_seed);
      rep["randomized_trials"] = to_json(t);
      ok = ok && t.ok();

      cfg.population.seed = cfg.master_seed;
      const Population pop = generate_population(cfg.population);
      std::vector<IrisTemplate> probes(pop.probes.begin(),
                                       pop.probes.begin() + static_cast<std::ptrdiff_t>(std::min(max_probes, pop.probes.size())));
      nlohmann::json checks = nlohmann::json::array();
      for (int s : cfg.shift_ranges) {
        for (double th : cfg.thresholds) {
          const EquivalenceReport e = decision_equivalence_check(pop.gallery, probes, SearchParams{th, ShiftRange{s}},
                                                                 cfg.master_seed);
          checks.push_back(to_json(e));
          ok = ok && e.ok();
        }
      }
      rep["population_equivalence"] = checks;
      rep["ok"] = ok;

      if (!g.output.empty()) {
        fs::create_directories(g.output);
        write_text(fs::path(g.output) / "validation.json", rep.dump(2) + "\n");
      }
      out << nlohmann::json{{"ok", ok},
                            {"oracle_mismatches", exhaustive.mismatches + random.mismatches},
                            {"trial_violations", t.decision_violations + t.contract_violations},
                            {"trials", t.trials}}
                 .dump()
          << '\n';
      return ok ? kOk : kViolations;
    }

    if (*report) {
      std::ifstream in(rows_path, std::ios::binary);
      if (!in) throw IoError("cannot open " + rows_path);
      std::stringstream buf;
      buf << in.rdbuf();
      const Report rep = render_report(buf.str());
      const fs::path dir = g.output.empty() ? fs::path(rows_path).parent_path() : fs::path(g.output);
      if (!dir.empty()) fs::create_directories(dir);
      write_text(dir / "summary.csv", rep.summary_csv);
      write_text(dir / "roc.json", rep.roc_json);
      out << "wrote " << (dir / "summary.csv").string() << " and " << (dir / "roc.json").string() << '\n';
      return kOk;
    }
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"iris_lab"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace irislab::cli
