#include <gtest/gtest.h>

#include <sstream>
#include <vector>

#include "irislab/metrics.hpp"
#include "irislab/synth.hpp"

using namespace irislab;

namespace {

Population small_population(std::size_t identities, std::size_t probes, std::uint64_t seed) {
  SynthParams p;
  p.n_identities = identities;
  p.probes_per_identity = probes;
  p.seed = seed;
  // Heavier impostor tail so the small fixture exercises false matches.
  p.block_rows = 10;
  p.block_cols = 24;
  return generate_population(p);
}

const std::vector<Method> kBoth{Method::OneToN, Method::OneToFirst};

}  // namespace

TEST(Metrics, Tally) {
  EXPECT_EQ(tally({}), (OutcomeCounts{0, 0, 0}));
  const Outcome o[] = {Outcome::TrueMatch, Outcome::TrueMatch, Outcome::FalseMatch, Outcome::FalseNonMatch};
  EXPECT_EQ(tally(o), (OutcomeCounts{2, 1, 1}));
}

TEST(Metrics, Rates) {
  const Rates r = rates({90, 5, 5});
  EXPECT_DOUBLE_EQ(r.tmr, 90.0);
  EXPECT_DOUBLE_EQ(r.fmr, 5.0);
  EXPECT_DOUBLE_EQ(r.fnmr, 5.0);
  const Rates f = rates({0, 0, 10});
  EXPECT_DOUBLE_EQ(f.fnmr, 100.0);
  EXPECT_DOUBLE_EQ(f.tmr + f.fmr, 0.0);
  EXPECT_THROW(rates({}), ContractViolation);
}

TEST(Metrics, PublishedRowSumsToHundredWithinRounding) {
  // 1:N at gallery 1400: each published rate is rounded to 0.01, so the sum may
  // be off by at most 3 * 0.005.
  EXPECT_NEAR(87.28 + 0.12 + 12.61, 100.0, 0.015);
}

TEST(Metrics, RowCounts) {
  const Population pop = small_population(30, 2, 1);
  const double one_t[] = {0.32};
  const int one_r[] = {0};
  EXPECT_EQ(sweep(pop.gallery, pop.probes, one_t, one_r, kBoth).size(), 2u);
  const auto t = default_thresholds();
  const auto r = default_shift_ranges();
  const auto rows = sweep(pop.gallery, pop.probes, t, r, kBoth);
  EXPECT_EQ(rows.size(), 100u);
  EXPECT_TRUE(std::is_sorted(rows.begin(), rows.end(), emission_order));
}

TEST(Metrics, SweepMatchesDirectSearch) {
  const Population pop = small_population(40, 3, 2);
  SweepGrid grid;
  grid.gallery_sizes = {10, 25, 40};
  grid.thresholds = {0.3, 0.36, 0.42};
  grid.shift_ranges = {0, 4};
  grid.methods = kBoth;
  grid.two_stage = TwoStageRanges{2, 6};
  const SweepResult res = run_sweep(pop.gallery, pop.probes, grid, {2, true});
  ASSERT_EQ(res.rows.size(), 2u * 3 * 2 * 3 + 2u * 3 * 3);
  EXPECT_EQ(res.decision_mismatches, 0u);

  for (std::size_t c = 0; c < res.cells.size(); ++c) {
    const SweepCell& cell = res.cells[c];
    const Gallery prefix = pop.gallery.prefix(cell.gallery_size);
    const Method m = base_method(cell.method);
    const bool staged = cell.method == RowMethod::OneToNTwoStage || cell.method == RowMethod::OneToFirstTwoStage;
    OutcomeCounts counts;
    std::uint64_t comparisons = 0;
    for (std::size_t p = 0; p < pop.probes.size(); ++p) {
      const IrisTemplate& probe = pop.probes[p];
      if (!prefix.index_of(probe.identity)) {
        EXPECT_EQ(res.probe_outcomes[p * res.cells.size() + c], kNotEvaluated);
        continue;
      }
      const SearchResult r = staged ? identify_two_stage(prefix, probe, cell.threshold, ShiftRange{2},
                                                         ShiftRange{cell.shift_range}, m)
                                    : identify(m, prefix, probe, SearchParams{cell.threshold, ShiftRange{cell.shift_range}});
      const Outcome o = classify_outcome(r, probe.identity);
      counts.add(o);
      comparisons += r.comparisons;
      EXPECT_EQ(res.outcome(p, c), o);
    }
    EXPECT_EQ(res.counts[c], counts) << to_string(cell.method) << " " << cell.gallery_size;
    EXPECT_DOUBLE_EQ(res.rows[c].mean_comparisons, static_cast<double>(comparisons) / counts.total());
  }
}

TEST(Metrics, ThreadCountDoesNotChangeRows) {
  const Population pop = small_population(30, 3, 3);
  const auto t = default_thresholds();
  const auto r = default_shift_ranges();
  const auto one = sweep(pop.gallery, pop.probes, t, r, kBoth, {1, false});
  const auto four = sweep(pop.gallery, pop.probes, t, r, kBoth, {4, false});
  std::ostringstream a, b;
  write_rows_csv(a, one);
  write_rows_csv(b, four);
  EXPECT_EQ(a.str(), b.str());
}

TEST(Metrics, UnenrolledProbeRejected) {
  Population pop = small_population(10, 1, 4);
  pop.probes[0].identity = "nobody";
  const double t[] = {0.32};
  const int r[] = {0};
  EXPECT_THROW(sweep(pop.gallery, pop.probes, t, r, kBoth), ContractViolation);
}

TEST(MetricsProperty, FnmrEqualAndOneToNMonotone) {
  const Population pop = small_population(50, 3, 5);
  const auto t = default_thresholds();
  const auto r = default_shift_ranges();
  const auto rows = sweep(pop.gallery, pop.probes, t, r, kBoth);
  const std::size_t half = rows.size() / 2;
  for (std::size_t i = 0; i < half; ++i) {
    ASSERT_EQ(rows[i].method, RowMethod::OneToN);
    ASSERT_EQ(rows[i + half].method, RowMethod::OneToFirst);
    EXPECT_EQ(rows[i].fnmr, rows[i + half].fnmr);
    EXPECT_EQ(rows[i].mean_comparisons, 50.0);
    EXPECT_LE(rows[i + half].mean_comparisons, 50.0);
  }
  for (std::size_t i = 1; i < half; ++i) {
    if (rows[i].shift_range != rows[i - 1].shift_range) continue;
    EXPECT_GE(rows[i].tmr, rows[i - 1].tmr);
    EXPECT_GE(rows[i].fmr, rows[i - 1].fmr);
    EXPECT_LE(rows[i].fnmr, rows[i - 1].fnmr);
  }
}

TEST(Metrics, AverageOverThresholds) {
  std::vector<MetricsRow> rows(2);
  rows[0].tmr = 80;
  rows[1].tmr = 90;
  rows[0].threshold = 0.26;
  rows[1].threshold = 0.27;
  const auto s = average_over_thresholds(rows);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_DOUBLE_EQ(s[0].mean.tmr, 85.0);
  EXPECT_NEAR(s[0].stddev.tmr, 7.0710678, 1e-6);
  EXPECT_EQ(detail::fixed(s[0].stddev.tmr, 2), "7.07");
  EXPECT_EQ(s[0].stddev.fmr, 0.0);

  std::vector<MetricsRow> same(2, rows[0]);
  EXPECT_EQ(average_over_thresholds(same)[0].stddev.tmr, 0.0);
  EXPECT_THROW(average_over_thresholds(std::span(rows).first(1)), ContractViolation);
}

TEST(Metrics, RocPoints) {
  MetricsRow row;
  row.tmr = 92;
  row.fmr = 0.6;
  const auto pts = roc_points(std::span(&row, 1));
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_EQ(pts[0].fmr, 0.6);
  EXPECT_EQ(pts[0].tmr, 92.0);
  EXPECT_TRUE(roc_points({}).empty());
  EXPECT_EQ(roc_json({}), "[]\n");
}

TEST(Metrics, CsvRoundTrip) {
  const Population pop = small_population(20, 2, 6);
  const auto t = default_thresholds();
  const auto r = default_shift_ranges();
  const auto rows = sweep(pop.gallery, pop.probes, t, r, kBoth);
  std::ostringstream out;
  write_rows_csv(out, rows);
  std::istringstream in(out.str());
  const auto back = read_rows_csv(in);
  std::ostringstream again;
  write_rows_csv(again, back);
  EXPECT_EQ(out.str(), again.str());
  EXPECT_EQ(out.str().substr(0, kRowsHeader.size()), kRowsHeader);

  std::istringstream bad("method,size\n");
  EXPECT_THROW(read_rows_csv(bad), ParseError);
}

TEST(Metrics, ReportFromCsv) {
  const std::string csv = std::string(kRowsHeader) +
                          "\n1n,100,0.26,0,80.0000,1.0000,19.0000,100.0000"
                          "\n1n,100,0.27,0,90.0000,1.0000,9.0000,100.0000\n";
  const Report rep = render_report(csv);
  EXPECT_EQ(rep.summary_csv, std::string(kSummaryHeader) + "\n1n,100,0,85.00,1.00,14.00,100.00,7.07,0.00,7.07,0.00\n");
  const auto roc = nlohmann::json::parse(rep.roc_json);
  ASSERT_EQ(roc.size(), 2u);
  EXPECT_EQ(roc[1]["tmr"], 90.0);
  EXPECT_EQ(roc[1]["method"], "1n");
}
