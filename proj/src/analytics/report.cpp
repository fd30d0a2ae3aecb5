#include <fmt/format.h>

#include <algorithm>
#include <fstream>

#include "kgap/analytics.hpp"
#include "kgap/common/csv.hpp"
#include "kgap/error.hpp"

namespace kgap::analytics {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

std::string fixed(double v) { return fmt::format("{:.6f}", v); }

std::vector<YearlyRates> ordered(std::span<const YearlyRates> rates) {
  std::vector<YearlyRates> v(rates.begin(), rates.end());
  std::stable_sort(v.begin(), v.end(), [](const YearlyRates& a, const YearlyRates& b) {
    return std::tie(a.threshold, a.year) < std::tie(b.threshold, b.year);
  });
  return v;
}

}  // namespace

void write_rates(const std::filesystem::path& path, std::span<const YearlyRates> rates) {
  auto out = open_out(path);
  csv::write_row(out, {"year", "n", "success_rate", "hallucination_rate", "stderr_success",
                       "threshold"});
  for (const auto& r : ordered(rates)) {
    csv::write_row(out, {std::to_string(r.year), std::to_string(r.n), fixed(r.success_rate),
                         fixed(r.hallucination_rate), fixed(r.stderr_success),
                         fmt::format("{}", r.threshold)});
  }
  finish(out, path);
}

void write_tallies(const std::filesystem::path& path, std::span<const EntityTally> tallies) {
  std::vector<EntityTally> v(tallies.begin(), tallies.end());
  std::stable_sort(v.begin(), v.end(),
                   [](const auto& a, const auto& b) { return a.entity_id < b.entity_id; });
  auto out = open_out(path);
  csv::write_row(out, {"entity_id", "years_correct", "years_hallucinated", "mean_covariate"});
  for (const auto& t : v) {
    csv::write_row(out, {t.entity_id, std::to_string(t.years_correct),
                         std::to_string(t.years_hallucinated),
                         t.mean_covariate ? fixed(*t.mean_covariate) : ""});
  }
  finish(out, path);
}

void write_error_distribution(const std::filesystem::path& path,
                              std::span<const ErrorSummary> summaries) {
  auto out = open_out(path);
  csv::write_row(out, {"year", "n", "answered", "answer_rate", "empty", "q1", "median", "q3",
                       "lower_whisker", "upper_whisker", "outlier_count"});
  for (const auto& s : summaries) {
    auto opt = [&](double v) { return s.empty ? std::string() : fixed(v); };
    csv::write_row(out, {std::to_string(s.year), std::to_string(s.n), std::to_string(s.answered),
                         fixed(s.answer_rate), s.empty ? "1" : "0", opt(s.q1), opt(s.median),
                         opt(s.q3), opt(s.lower_whisker), opt(s.upper_whisker),
                         std::to_string(s.outlier_count)});
  }
  finish(out, path);
}

std::vector<std::filesystem::path> emit_report(std::span<const YearlyRates> rates,
                                               std::span<const EntityTally> tallies,
                                               std::span<const glmfit::NamedFit> fits,
                                               const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  const auto rates_path = out_dir / "rates.csv";
  const auto tallies_path = out_dir / "tallies.csv";
  const auto fits_path = out_dir / "fits.json";
  const auto summary_path = out_dir / "summary.txt";

  write_rates(rates_path, rates);
  write_tallies(tallies_path, tallies);
  {
    auto out = open_out(fits_path);
    out << glmfit::to_json(fits).dump(2) << '\n';
    finish(out, fits_path);
  }

  auto out = open_out(summary_path);
  out << "# stderr_success is the binomial standard error sqrt(r(1-r)/n) of the yearly\n"
         "# success rate; hallucination_rate divides hallucinations by failed answers.\n\n";

  const auto sorted = ordered(rates);
  std::size_t total = 0;
  for (const auto& r : sorted) total += r.n;
  out << fmt::format("rate rows: {}  outcomes counted: {}  entities: {}  fits: {}\n\n",
                     sorted.size(), total, tallies.size(), fits.size());

  if (!sorted.empty()) {
    out << fmt::format("{:>6} {:>7} {:>9} {:>9} {:>9} {:>9}\n", "year", "n", "success",
                       "halluc", "stderr", "thresh");
    for (const auto& r : sorted) {
      out << fmt::format("{:>6} {:>7} {:>9.4f} {:>9.4f} {:>9.4f} {:>9}\n", r.year, r.n,
                         r.success_rate, r.hallucination_rate, r.stderr_success,
                         fmt::format("{}", r.threshold));
    }
    out << '\n';
  }

  for (const auto& f : fits) {
    out << fmt::format("== {} (n={}, dropped={}, logL={:.4f}, iterations={}{})\n", f.label,
                       f.fit.n, f.fit.dropped_rows, f.fit.log_likelihood, f.fit.iterations,
                       f.fit.converged ? "" : ", NOT CONVERGED");
    for (const auto& c : f.fit.coefficients) {
      out << fmt::format("  {:<24} {:>11.4f} {:>10.4f} {:>8.3f} {:>8.4f} {}\n", c.name,
                         c.estimate, c.std_error, c.z, c.p_value, glmfit::symbol(c.stars));
    }
  }
  if (!fits.empty()) {
    const auto& covs = fits.front().fit.covariate_names;
    if (!covs.empty()) out << '\n' << glmfit::format_table(fits, covs.front());
  }
  finish(out, summary_path);

  return {rates_path, tallies_path, fits_path, summary_path};
}

}  // namespace kgap::analytics
