// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
// failure. Uses the default experiment configuration throughout.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

#include "irislab/harness.hpp"
#include "irislab/validation.hpp"

using namespace irislab;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void report(const char* id, const char* name, bool pass, const std::string& detail) {
  std::printf("%s %-28s %s  %s\n", id, name, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
    i = j + 1;
  }
  return ranks;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / rx.size();
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / ry.size();
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

// Threshold-averaged FMR keyed by (method, size, range).
std::map<std::tuple<RowMethod, std::size_t, int>, double> mean_fmr(const std::vector<MetricsRow>& rows) {
  std::map<std::tuple<RowMethod, std::size_t, int>, double> out;
  for (const auto& s : average_over_thresholds(rows)) out[{s.method, s.gallery_size, s.shift_range}] = s.mean.fmr;
  return out;
}

// FMR_first >= factor * FMR_1n, with at least one 1:First false match so the
// comparison is not 0 >= 0.
bool amplified(double first, double one_n, double factor) { return first > 0.0 && first >= factor * one_n; }

std::string ratio_text(double first, double one_n) {
  if (one_n == 0.0) return first > 0.0 ? "inf (1:N FMR is 0)" : "undefined (both 0)";
  return fmt("%.2f", first / one_n);
}

}  // namespace

int main() {
  const ExperimentConfig cfg;  // defaults: 1400 identities, sizes 100..1400, full grid
  std::printf("acceptance: master_seed %llu, %zu identities, %zu probes/identity, threads %u\n",
              static_cast<unsigned long long>(cfg.master_seed), cfg.population.n_identities,
              cfg.population.probes_per_identity, threads_from_env());

  // AC2 first: it is independent of the sweep and cheap.
  {
    const auto start = Clock::now();
    const int ranges[] = {0, 1, 2};
    const OracleReport exhaustive = oracle_exhaustive_1x8(ranges);
    const OracleReport random = oracle_random_pairs(1000, 20, 240, ShiftRange{14}, cfg.master_seed);
    const double t = seconds_since(start);
    report("AC2", "oracle equality", exhaustive.ok() && random.ok() && t <= 60.0,
           fmt("exhaustive 1x8: %llu cases, %llu mismatches; random 20x240 +-14: %llu pairs, %llu mismatches; %.1fs",
               static_cast<unsigned long long>(exhaustive.cases), static_cast<unsigned long long>(exhaustive.mismatches),
               static_cast<unsigned long long>(random.cases), static_cast<unsigned long long>(random.mismatches), t));
  }

  TrialReport trials;
  double trial_seconds = 0.0;
  {
    const auto start = Clock::now();
    trials = randomized_equivalence_trials(100000, cfg.master_seed);
    trial_seconds = seconds_since(start);
  }

  auto start = Clock::now();
  const ResultsBundle run = run_experiment(cfg, false);
  const double sweep_seconds = seconds_since(start);
  const SweepResult& sw = run.sweep;
  const auto& rows = sw.rows;
  std::printf("default sweep: %zu rows, %zu probes, %.1fs\n", rows.size(), sw.probe_count, sweep_seconds);

  // AC1: decisions and FNMR columns.
  {
    std::map<std::tuple<std::size_t, int, double>, std::pair<const MetricsRow*, const MetricsRow*>> pairs;
    for (const auto& r : rows) {
      auto& slot = pairs[{r.gallery_size, r.shift_range, r.threshold}];
      (r.method == RowMethod::OneToN ? slot.first : slot.second) = &r;
    }
    std::size_t compared = 0, unequal = 0;
    for (const auto& [key, pr] : pairs) {
      if (!pr.first || !pr.second) continue;
      ++compared;
      if (pr.first->fnmr != pr.second->fnmr) ++unequal;
    }
    report("AC1", "decision equivalence",
           trials.ok() && trials.trials >= 100000 && trial_seconds <= 300.0 && sw.decision_mismatches == 0 && unequal == 0,
           fmt("%llu trials (%llu match / %llu non-match), %llu violations, %.1fs; sweep: %llu/%llu decision "
               "mismatches, %zu/%zu FNMR row pairs unequal",
               static_cast<unsigned long long>(trials.trials), static_cast<unsigned long long>(trials.matches),
               static_cast<unsigned long long>(trials.non_matches),
               static_cast<unsigned long long>(trials.decision_violations + trials.contract_violations), trial_seconds,
               static_cast<unsigned long long>(sw.decision_mismatches),
               static_cast<unsigned long long>(sw.decision_checks), unequal, compared));
  }

  const auto fmr = mean_fmr(rows);
  auto fmr_at = [&](RowMethod m, std::size_t n, int s) { return fmr.at({m, n, s}); };

  // AC3: gallery-size scaling at 0 shifts.
  {
    bool ordered = true;
    std::string series;
    for (std::size_t n : cfg.gallery_sizes) {
      const double f = fmr_at(RowMethod::OneToFirst, n, 0);
      const double a = fmr_at(RowMethod::OneToN, n, 0);
      ordered = ordered && f >= a;
      series += fmt(" %zu:%.3f/%.3f", n, f, a);
    }
    const double f = fmr_at(RowMethod::OneToFirst, 1400, 0);
    const double a = fmr_at(RowMethod::OneToN, 1400, 0);
    report("AC3", "FMR gallery-size scaling", ordered && amplified(f, a, 2.0) && sweep_seconds <= 900.0,
           "FMR% 1first/1n by size:" + series + "; ratio at 1400 " + ratio_text(f, a) + fmt("; sweep %.1fs", sweep_seconds));
  }

  // AC4: shift-range amplification at N=1400.
  {
    std::vector<double> range_values, first_fmr;
    std::string series;
    for (int s : cfg.shift_ranges) {
      range_values.push_back(s);
      first_fmr.push_back(fmr_at(RowMethod::OneToFirst, 1400, s));
      series += fmt(" %d:%.3f", s, first_fmr.back());
    }
    const double rho = spearman(range_values, first_fmr);
    const double f = fmr_at(RowMethod::OneToFirst, 1400, 14);
    const double a = fmr_at(RowMethod::OneToN, 1400, 14);
    report("AC4", "shift-range amplification", rho >= 0.9 && amplified(f, a, 5.0) && sweep_seconds <= 1800.0,
           "1first FMR% by range:" + series + fmt("; spearman %.3f; 1n FMR at +-14 %.3f; ratio ", rho, a) +
               ratio_text(f, a));
  }

  // AC5: 1:N monotonicity in threshold, per probe and in aggregate.
  {
    std::map<std::tuple<std::size_t, int>, std::vector<std::size_t>> curves;  // cells by threshold
    for (std::size_t c = 0; c < sw.cells.size(); ++c)
      if (sw.cells[c].method == RowMethod::OneToN) curves[{sw.cells[c].gallery_size, sw.cells[c].shift_range}].push_back(c);
    std::uint64_t checks = 0, reversions = 0, aggregate_breaks = 0;
    for (auto& [key, cells] : curves) {
      std::sort(cells.begin(), cells.end(),
                [&](std::size_t a, std::size_t b) { return sw.cells[a].threshold < sw.cells[b].threshold; });
      for (std::size_t i = 1; i < cells.size(); ++i) {
        const auto& lo = rows[cells[i - 1]];
        const auto& hi = rows[cells[i]];
        if (hi.tmr < lo.tmr || hi.fmr < lo.fmr || hi.fnmr > lo.fnmr) ++aggregate_breaks;
        for (std::size_t p = 0; p < sw.probe_count; ++p) {
          const auto before = sw.probe_outcomes[p * sw.cells.size() + cells[i - 1]];
          if (before == kNotEvaluated) continue;
          ++checks;
          const bool matched_before = before != static_cast<std::uint8_t>(Outcome::FalseNonMatch);
          const bool matched_after = sw.outcome(p, cells[i]) != Outcome::FalseNonMatch;
          if (matched_before && !matched_after) ++reversions;
        }
      }
    }
    report("AC5", "1:N threshold monotonicity", checks > 0 && reversions == 0 && aggregate_breaks == 0,
           fmt("%llu per-probe steps, %llu reversions, %llu aggregate breaks", static_cast<unsigned long long>(checks),
               static_cast<unsigned long long>(reversions), static_cast<unsigned long long>(aggregate_breaks)));
  }

  // Population again for the direct-search criteria (same seed, same draws).
  SynthParams params = cfg.population;
  params.seed = cfg.master_seed;
  const Population pop = generate_population(params);
  auto enrolled_probes = [&](const Gallery& g) {
    std::vector<IrisTemplate> out;
    for (const auto& p : pop.probes)
      if (g.index_of(p.identity)) out.push_back(p);
    return out;
  };

  // AC6: comparison economy of 1:First.
  {
    bool pass = true;
    std::string series;
    for (const MetricsRow& r : rows)
      if (r.method == RowMethod::OneToN && r.mean_comparisons != static_cast<double>(r.gallery_size)) pass = false;
    for (std::size_t n : {std::size_t{100}, std::size_t{400}, std::size_t{1400}}) {
      const Gallery g = pop.gallery.prefix(n);
      const auto probes = enrolled_probes(g);
      const EquivalenceReport e = decision_equivalence_check(g, probes, SearchParams{0.32, ShiftRange{0}}, cfg.master_seed);
      const double frac = e.mean_comparisons_1first_matched / static_cast<double>(n);
      pass = pass && e.ok() && e.matched > 0 && frac >= 0.3 && frac <= 0.7;
      series += fmt(" N=%zu: %.3f (%zu matched)", n, frac, e.matched);
    }
    report("AC6", "comparison-count economy", pass, "matched 1first comparisons / N at t=0.32 s=0:" + series);
  }

  // AC7: analytic 1:First model vs Monte Carlo.
  {
    bool pass = true;
    std::string series;
    for (std::size_t n : {std::size_t{100}, std::size_t{400}, std::size_t{1400}}) {
      const Gallery g = pop.gallery.prefix(n);
      const auto probes = enrolled_probes(g);
      const ScanModel model = estimate_scan_model(g, probes, 0.32, ShiftRange{0});
      const double predicted = 100.0 * first_false_match_prob(model);
      double observed = -1.0;
      for (std::size_t c = 0; c < sw.cells.size(); ++c) {
        const SweepCell& cell = sw.cells[c];
        if (cell.method == RowMethod::OneToFirst && cell.gallery_size == n && cell.shift_range == 0 &&
            std::abs(cell.threshold - 0.32) < 1e-9)
          observed = rates(sw.counts[c]).fmr;
      }
      const double gap = std::abs(predicted - observed);
      pass = pass && observed >= 0.0 && gap <= 2.0;
      series += fmt(" N=%zu: model %.3f%% vs MC %.3f%% (q=%.2e g=%.4f)", n, predicted, observed, model.q, model.g);
    }
    report("AC7", "analytic model agreement", pass, "t=0.32 s=0;" + series);
  }

  // AC8: determinism of the default sweep.
  {
    const ResultsBundle again = run_experiment(cfg, false);
    report("AC8", "determinism", again.rows_csv == run.rows_csv,
           fmt("rows CSV %zu bytes, rerun %s", run.rows_csv.size(),
               again.rows_csv == run.rows_csv ? "byte-identical" : "differs"));
  }

  std::printf("acceptance: %s (%d failed)\n", failures == 0 ? "PASS" : "FAIL", failures);
  return failures == 0 ? 0 : 1;
}
