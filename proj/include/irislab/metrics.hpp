#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <tuple>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "irislab/errors.hpp"
#include "irislab/matcher.hpp"
#include "irislab/search.hpp"
#include "irislab/template.hpp"

namespace irislab {

struct OutcomeCounts {
  std::uint64_t tm = 0;
  std::uint64_t fm = 0;
  std::uint64_t fnm = 0;

  std::uint64_t total() const noexcept { return tm + fm + fnm; }

  void add(Outcome o) noexcept {
    switch (o) {
      case Outcome::TrueMatch: ++tm; break;
      case Outcome::FalseMatch: ++fm; break;
      case Outcome::FalseNonMatch: ++fnm; break;
    }
  }

  OutcomeCounts& operator+=(const OutcomeCounts& o) noexcept {
    tm += o.tm;
    fm += o.fm;
    fnm += o.fnm;
    return *this;
  }

  friend bool operator==(const OutcomeCounts&, const OutcomeCounts&) = default;
};

inline OutcomeCounts tally(std::span<const Outcome> outcomes) {
  OutcomeCounts c;
  for (Outcome o : outcomes) c.add(o);
  return c;
}

// Percentages.
struct Rates {
  double tmr = 0.0;
  double fmr = 0.0;
  double fnmr = 0.0;
};

inline Rates rates(const OutcomeCounts& c) {
  if (c.total() == 0) throw ContractViolation("rates: no outcomes to rate");
  const double n = static_cast<double>(c.total());
  return {100.0 * static_cast<double>(c.tm) / n, 100.0 * static_cast<double>(c.fm) / n,
          100.0 * static_cast<double>(c.fnm) / n};
}

// Row label. Two-stage variants widen from stage-1 to the row's shift range.
enum class RowMethod : std::uint8_t { OneToN, OneToFirst, OneToNTwoStage, OneToFirstTwoStage };

inline std::string_view to_string(RowMethod m) {
  switch (m) {
    case RowMethod::OneToN: return "1n";
    case RowMethod::OneToFirst: return "1first";
    case RowMethod::OneToNTwoStage: return "1n_2stage";
    case RowMethod::OneToFirstTwoStage: return "1first_2stage";
  }
  return "?";
}

inline RowMethod parse_row_method(std::string_view s) {
  for (RowMethod m : {RowMethod::OneToN, RowMethod::OneToFirst, RowMethod::OneToNTwoStage,
                      RowMethod::OneToFirstTwoStage})
    if (to_string(m) == s) return m;
  throw ParseError("unknown method '" + std::string(s) + "'");
}

inline Method base_method(RowMethod m) {
  return (m == RowMethod::OneToN || m == RowMethod::OneToNTwoStage) ? Method::OneToN : Method::OneToFirst;
}

inline RowMethod row_method(Method m, bool two_stage = false) {
  if (m == Method::OneToN) return two_stage ? RowMethod::OneToNTwoStage : RowMethod::OneToN;
  return two_stage ? RowMethod::OneToFirstTwoStage : RowMethod::OneToFirst;
}

struct MetricsRow {
  RowMethod method = RowMethod::OneToN;
  std::size_t gallery_size = 0;
  double threshold = 0.0;
  int shift_range = 0;
  double tmr = 0.0;
  double fmr = 0.0;
  double fnmr = 0.0;
  double mean_comparisons = 0.0;

  auto key() const { return std::tuple(method, gallery_size, shift_range, threshold); }
};

inline bool emission_order(const MetricsRow& a, const MetricsRow& b) { return a.key() < b.key(); }

struct TwoStageRanges {
  int first = 7;
  int widened = 21;
};

struct SweepGrid {
  std::vector<std::size_t> gallery_sizes;
  std::vector<double> thresholds;
  std::vector<int> shift_ranges;
  std::vector<Method> methods;
  std::optional<TwoStageRanges> two_stage;

  void validate(std::size_t gallery_size) const {
    require(!gallery_sizes.empty() && !thresholds.empty() && !shift_ranges.empty() && !methods.empty(),
            "sweep grid lists must be non-empty");
    for (std::size_t s : gallery_sizes) require(s > 0 && s <= gallery_size, "gallery size out of range");
    for (double t : thresholds) require(t > 0.0 && t < 1.0, "thresholds must lie strictly between 0 and 1");
    for (int s : shift_ranges) require(s >= 0, "shift ranges must be non-negative");
    if (two_stage) require(two_stage->first >= 0 && two_stage->first < two_stage->widened, "two-stage ranges must satisfy 0 <= s1 < s2");
  }
};

// One (method, gallery size, shift range, threshold) combination.
struct SweepCell {
  RowMethod method;
  std::size_t gallery_size;
  int shift_range;
  double threshold;
};

inline constexpr std::uint8_t kNotEvaluated = 0xFF;

struct SweepResult {
  // rows[i] summarizes cells[i]; both in emission order.
  std::vector<MetricsRow> rows;
  std::vector<SweepCell> cells;
  std::vector<OutcomeCounts> counts;
  // Probes x cells, row-major, Outcome values or kNotEvaluated when the
  // probe's identity is not enrolled at that cell's gallery size. Filled only
  // when SweepOptions::keep_probe_outcomes is set.
  std::vector<std::uint8_t> probe_outcomes;
  std::size_t probe_count = 0;
  // (probe, size, range, threshold) combinations where 1:N and 1:First
  // disagreed on Match vs NonMatch. Must be zero.
  std::uint64_t decision_mismatches = 0;
  std::uint64_t decision_checks = 0;

  Outcome outcome(std::size_t probe, std::size_t cell) const {
    return static_cast<Outcome>(probe_outcomes[probe * cells.size() + cell]);
  }
};

struct SweepOptions {
  unsigned threads = 0;  // 0 = hardware concurrency
  bool keep_probe_outcomes = false;
};

namespace detail {

inline unsigned resolve_threads(unsigned requested, std::size_t work) {
  unsigned n = requested != 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(n, work)));
}

struct CellTotals {
  OutcomeCounts counts;
  std::uint64_t comparisons = 0;
};

}  // namespace detail

// Evaluates every probe against nested prefixes of `g` over the whole grid.
// Each probe is scored once per entry for all shift ranges (one pass over the
// shifts, see RotationBank::best_nested); thresholds and prefixes are then
// resolved through ScanRecords. Probes whose identity is enrolled beyond a
// prefix are left out of that prefix's rows.
inline SweepResult run_sweep(const Gallery& g, std::span<const IrisTemplate> probes, const SweepGrid& grid,
                             const SweepOptions& options = {}) {
  require(!g.empty(), "cannot sweep an empty gallery");
  grid.validate(g.size());

  std::vector<std::size_t> sizes = grid.gallery_sizes;
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  std::vector<double> thresholds = grid.thresholds;
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  std::vector<int> shown_ranges = grid.shift_ranges;
  std::sort(shown_ranges.begin(), shown_ranges.end());
  shown_ranges.erase(std::unique(shown_ranges.begin(), shown_ranges.end()), shown_ranges.end());

  std::vector<int> ranges = shown_ranges;
  if (grid.two_stage) {
    ranges.push_back(grid.two_stage->first);
    ranges.push_back(grid.two_stage->widened);
  }
  std::sort(ranges.begin(), ranges.end());
  ranges.erase(std::unique(ranges.begin(), ranges.end()), ranges.end());
  auto range_slot = [&](int r) {
    return static_cast<std::size_t>(std::lower_bound(ranges.begin(), ranges.end(), r) - ranges.begin());
  };

  std::vector<Method> methods = grid.methods;
  std::sort(methods.begin(), methods.end());
  methods.erase(std::unique(methods.begin(), methods.end()), methods.end());

  SweepResult result;
  for (Method m : methods)
    for (std::size_t n : sizes)
      for (int r : shown_ranges)
        for (double t : thresholds) result.cells.push_back({row_method(m), n, r, t});
  if (grid.two_stage)
    for (Method m : methods)
      for (std::size_t n : sizes)
        for (double t : thresholds) result.cells.push_back({row_method(m, true), n, grid.two_stage->widened, t});
  std::sort(result.cells.begin(), result.cells.end(), [](const SweepCell& a, const SweepCell& b) {
    return std::tuple(a.method, a.gallery_size, a.shift_range, a.threshold) <
           std::tuple(b.method, b.gallery_size, b.shift_range, b.threshold);
  });

  std::unordered_map<std::string_view, std::size_t> mate_of;
  for (std::size_t i = 0; i < g.size(); ++i) mate_of.emplace(g[i].identity, i);
  std::vector<std::size_t> mates(probes.size());
  for (std::size_t p = 0; p < probes.size(); ++p) {
    const auto it = mate_of.find(probes[p].identity);
    if (it == mate_of.end()) throw ContractViolation("probe identity not enrolled: " + probes[p].identity);
    if (!probes[p].same_geometry(g[0])) throw ContractViolation("probe geometry differs from gallery");
    mates[p] = it->second;
  }

  const std::size_t n_cells = result.cells.size();

  // (1:N cell, 1:First cell) pairs sharing size, range and threshold.
  std::vector<std::pair<std::size_t, std::size_t>> twins;
  {
    std::map<std::tuple<bool, std::size_t, int, double>, std::size_t> first_cells;
    for (std::size_t c = 0; c < result.cells.size(); ++c) {
      const auto& cell = result.cells[c];
      if (base_method(cell.method) != Method::OneToFirst) continue;
      const bool staged = cell.method == RowMethod::OneToFirstTwoStage;
      first_cells[{staged, cell.gallery_size, cell.shift_range, cell.threshold}] = c;
    }
    for (std::size_t c = 0; c < result.cells.size(); ++c) {
      const auto& cell = result.cells[c];
      if (base_method(cell.method) != Method::OneToN) continue;
      const bool staged = cell.method == RowMethod::OneToNTwoStage;
      const auto it = first_cells.find({staged, cell.gallery_size, cell.shift_range, cell.threshold});
      if (it != first_cells.end()) twins.emplace_back(c, it->second);
    }
  }
  const std::size_t scan_len = sizes.back();
  const ShiftRange bank_range{ranges.back()};
  result.probe_count = probes.size();
  if (options.keep_probe_outcomes) result.probe_outcomes.assign(probes.size() * n_cells, kNotEvaluated);

  const unsigned n_threads = detail::resolve_threads(options.threads, probes.size());
  std::vector<std::vector<detail::CellTotals>> partial(n_threads, std::vector<detail::CellTotals>(n_cells));
  std::vector<std::uint64_t> mismatches(n_threads, 0);
  std::vector<std::uint64_t> checks(n_threads, 0);

  auto worker = [&](unsigned tid, std::size_t begin, std::size_t end) {
    auto& totals = partial[tid];
    std::vector<std::vector<MatchScore>> scores(ranges.size(), std::vector<MatchScore>(scan_len));
    std::vector<MatchScore> nested(ranges.size());
    std::vector<ScanRecords> records;
    std::vector<std::uint8_t> decided(n_cells);
    for (std::size_t p = begin; p < end; ++p) {
      const std::size_t mate = mates[p];
      // Entries at or past the largest prefix never influence a row.
      const RotationBank bank(probes[p], bank_range);
      for (std::size_t i = 0; i < scan_len; ++i) {
        bank.best_nested(g[i], ranges, nested);
        for (std::size_t r = 0; r < ranges.size(); ++r) scores[r][i] = nested[r];
      }
      records.clear();
      for (std::size_t r = 0; r < ranges.size(); ++r) records.emplace_back(scores[r]);

      for (std::size_t c = 0; c < n_cells; ++c) {
        const SweepCell& cell = result.cells[c];
        decided[c] = kNotEvaluated;
        if (mate >= cell.gallery_size) continue;
        const Method m = base_method(cell.method);
        ScanResult scan;
        const bool two_stage = cell.method == RowMethod::OneToNTwoStage || cell.method == RowMethod::OneToFirstTwoStage;
        if (two_stage) {
          scan = records[range_slot(grid.two_stage->first)].scan(m, cell.gallery_size, cell.threshold);
          if (!scan.index) {
            const std::size_t spent = scan.comparisons;
            scan = records[range_slot(cell.shift_range)].scan(m, cell.gallery_size, cell.threshold);
            scan.comparisons += spent;
          }
        } else {
          scan = records[range_slot(cell.shift_range)].scan(m, cell.gallery_size, cell.threshold);
        }
        const Outcome o = !scan.index ? Outcome::FalseNonMatch
                                      : (*scan.index == mate ? Outcome::TrueMatch : Outcome::FalseMatch);
        totals[c].counts.add(o);
        totals[c].comparisons += scan.comparisons;
        decided[c] = static_cast<std::uint8_t>(o);
      }
      if (options.keep_probe_outcomes)
        std::copy(decided.begin(), decided.end(), result.probe_outcomes.begin() + static_cast<std::ptrdiff_t>(p * n_cells));

      for (const auto& [a, b] : twins) {
        if (decided[a] == kNotEvaluated) continue;
        ++checks[tid];
        const bool match_a = decided[a] != static_cast<std::uint8_t>(Outcome::FalseNonMatch);
        const bool match_b = decided[b] != static_cast<std::uint8_t>(Outcome::FalseNonMatch);
        if (match_a != match_b) ++mismatches[tid];
      }
    }
  };

  if (n_threads == 1) {
    worker(0, 0, probes.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (probes.size() + n_threads - 1) / n_threads;
    for (unsigned t = 0; t < n_threads; ++t) {
      const std::size_t begin = std::min(probes.size(), t * chunk);
      const std::size_t end = std::min(probes.size(), begin + chunk);
      pool.emplace_back(worker, t, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  std::vector<detail::CellTotals> totals(n_cells);
  for (unsigned t = 0; t < n_threads; ++t) {
    for (std::size_t c = 0; c < n_cells; ++c) {
      totals[c].counts += partial[t][c].counts;
      totals[c].comparisons += partial[t][c].comparisons;
    }
    result.decision_mismatches += mismatches[t];
    result.decision_checks += checks[t];
  }

  for (std::size_t c = 0; c < n_cells; ++c) {
    const SweepCell& cell = result.cells[c];
    const auto& tot = totals[c];
    if (tot.counts.total() == 0)
      throw ContractViolation("no probes are enrolled in the gallery of size " + std::to_string(cell.gallery_size));
    const Rates rt = rates(tot.counts);
    result.rows.push_back({cell.method, cell.gallery_size, cell.threshold, cell.shift_range, rt.tmr, rt.fmr, rt.fnmr,
                           static_cast<double>(tot.comparisons) / static_cast<double>(tot.counts.total())});
    result.counts.push_back(tot.counts);
  }
  return result;
}

// One row per (method, threshold, shift range) for the whole gallery.
inline std::vector<MetricsRow> sweep(const Gallery& g, std::span<const IrisTemplate> probes,
                                     std::span<const double> thresholds, std::span<const int> shift_ranges,
                                     std::span<const Method> methods, const SweepOptions& options = {}) {
  SweepGrid grid;
  grid.gallery_sizes = {g.size()};
  grid.thresholds.assign(thresholds.begin(), thresholds.end());
  grid.shift_ranges.assign(shift_ranges.begin(), shift_ranges.end());
  grid.methods.assign(methods.begin(), methods.end());
  return run_sweep(g, probes, grid, options).rows;
}

inline std::vector<double> default_thresholds() {
  std::vector<double> t;
  for (int i = 26; i <= 35; ++i) t.push_back(i / 100.0);
  return t;
}

inline std::vector<int> default_shift_ranges() { return {0, 3, 5, 9, 14}; }

// Mean and sample standard deviation of each metric.
struct SummaryRow {
  RowMethod method = RowMethod::OneToN;
  std::size_t gallery_size = 0;
  int shift_range = 0;
  std::size_t thresholds = 0;
  Rates mean;
  Rates stddev;
  double mean_comparisons = 0.0;
  double mean_comparisons_std = 0.0;
};

inline std::vector<SummaryRow> average_over_thresholds(std::span<const MetricsRow> rows) {
  std::map<std::tuple<RowMethod, std::size_t, int>, std::vector<const MetricsRow*>> groups;
  for (const auto& r : rows) groups[{r.method, r.gallery_size, r.shift_range}].push_back(&r);

  auto mean_std = [](const std::vector<const MetricsRow*>& g, double MetricsRow::*field) {
    double m = 0.0;
    for (const auto* r : g) m += r->*field;
    m /= static_cast<double>(g.size());
    double ss = 0.0;
    for (const auto* r : g) ss += (r->*field - m) * (r->*field - m);
    return std::pair(m, std::sqrt(ss / static_cast<double>(g.size() - 1)));
  };

  std::vector<SummaryRow> out;
  for (const auto& [key, g] : groups) {
    if (g.size() < 2)
      throw ContractViolation("average_over_thresholds needs at least two thresholds per group");
    SummaryRow s;
    std::tie(s.method, s.gallery_size, s.shift_range) = key;
    s.thresholds = g.size();
    std::tie(s.mean.tmr, s.stddev.tmr) = mean_std(g, &MetricsRow::tmr);
    std::tie(s.mean.fmr, s.stddev.fmr) = mean_std(g, &MetricsRow::fmr);
    std::tie(s.mean.fnmr, s.stddev.fnmr) = mean_std(g, &MetricsRow::fnmr);
    std::tie(s.mean_comparisons, s.mean_comparisons_std) = mean_std(g, &MetricsRow::mean_comparisons);
    out.push_back(s);
  }
  return out;
}

struct RocPoint {
  double fmr = 0.0;
  double tmr = 0.0;
  double threshold = 0.0;
  std::size_t gallery_size = 0;
  RowMethod method = RowMethod::OneToN;
  int shift_range = 0;
};

// Ordered by method, gallery size, shift range, then threshold, so each curve
// is a contiguous run.
inline std::vector<RocPoint> roc_points(std::span<const MetricsRow> rows) {
  std::vector<MetricsRow> sorted(rows.begin(), rows.end());
  std::stable_sort(sorted.begin(), sorted.end(), emission_order);
  std::vector<RocPoint> out;
  out.reserve(sorted.size());
  for (const auto& r : sorted) out.push_back({r.fmr, r.tmr, r.threshold, r.gallery_size, r.method, r.shift_range});
  return out;
}

inline nlohmann::json to_json(const RocPoint& p) {
  return {{"fmr", p.fmr},
          {"tmr", p.tmr},
          {"threshold", p.threshold},
          {"gallery_size", p.gallery_size},
          {"method", std::string(to_string(p.method))},
          {"shifts", p.shift_range}};
}

// --- CSV ---------------------------------------------------------------------

inline constexpr std::string_view kRowsHeader = "method,gallery_size,threshold,shifts,tmr,fmr,fnmr,mean_comparisons";
inline constexpr std::string_view kSummaryHeader =
    "method,gallery_size,shifts,tmr,fmr,fnmr,mean_comparisons,tmr_std,fmr_std,fnmr_std,mean_comparisons_std";

namespace detail {

inline std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  // Avoid "-0.0000" from tiny negative rounding noise.
  if (std::string_view(buf).find_first_not_of("-0.") == std::string_view::npos && buf[0] == '-')
    return std::string(buf + 1);
  return buf;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double to_double(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line) + ": bad number '" + s + "'");
  }
}

}  // namespace detail

inline void write_rows_csv(std::ostream& out, std::span<const MetricsRow> rows) {
  out << kRowsHeader << '\n';
  for (const auto& r : rows) {
    out << to_string(r.method) << ',' << r.gallery_size << ',' << detail::fixed(r.threshold, 2) << ','
        << r.shift_range << ',' << detail::fixed(r.tmr, 4) << ',' << detail::fixed(r.fmr, 4) << ','
        << detail::fixed(r.fnmr, 4) << ',' << detail::fixed(r.mean_comparisons, 4) << '\n';
  }
}

inline std::vector<MetricsRow> read_rows_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("rows CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kRowsHeader) throw ParseError("unexpected rows CSV header: " + line);
  std::vector<MetricsRow> rows;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 8) throw ParseError("line " + std::to_string(n) + ": expected 8 fields");
    MetricsRow r;
    r.method = parse_row_method(f[0]);
    r.gallery_size = static_cast<std::size_t>(detail::to_double(f[1], n));
    r.threshold = detail::to_double(f[2], n);
    r.shift_range = static_cast<int>(detail::to_double(f[3], n));
    r.tmr = detail::to_double(f[4], n);
    r.fmr = detail::to_double(f[5], n);
    r.fnmr = detail::to_double(f[6], n);
    r.mean_comparisons = detail::to_double(f[7], n);
    rows.push_back(r);
  }
  return rows;
}

inline void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows) {
  out << kSummaryHeader << '\n';
  for (const auto& s : rows) {
    out << to_string(s.method) << ',' << s.gallery_size << ',' << s.shift_range << ','
        << detail::fixed(s.mean.tmr, 2) << ',' << detail::fixed(s.mean.fmr, 2) << ','
        << detail::fixed(s.mean.fnmr, 2) << ',' << detail::fixed(s.mean_comparisons, 2) << ','
        << detail::fixed(s.stddev.tmr, 2) << ',' << detail::fixed(s.stddev.fmr, 2) << ','
        << detail::fixed(s.stddev.fnmr, 2) << ',' << detail::fixed(s.mean_comparisons_std, 2) << '\n';
  }
}

inline std::string roc_json(std::span<const RocPoint> points) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : points) arr.push_back(to_json(p));
  return arr.dump(2) + "\n";
}

// Summary CSV and ROC JSON derived from a rows CSV. The sweep bundle uses the
// same path on its own rows.csv, so reporting is reproducible from the file.
struct Report {
  std::string summary_csv;
  std::string roc_json;
};

inline Report render_report(const std::string& rows_csv) {
  std::istringstream in(rows_csv);
  const auto rows = read_rows_csv(in);
  Report rep;
  std::ostringstream summary;
  write_summary_csv(summary, average_over_thresholds(rows));
  rep.summary_csv = summary.str();
  rep.roc_json = roc_json(roc_points(rows));
  return rep;
}

}  // namespace irislab
