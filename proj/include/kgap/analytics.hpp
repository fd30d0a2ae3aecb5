#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kgap/glmfit.hpp"
#include "kgap/ingest.hpp"
#include "kgap/outcome.hpp"

namespace kgap::analytics {

// Denominator of the hallucination rate: failed answers (no answer or
// hallucination), or every answer.
enum class HallucinationDenominator { failures, all };

struct YearlyRates {
  int year = 0;
  std::size_t n = 0;
  double success_rate = 0.0;
  double hallucination_rate = 0.0;
  // Binomial standard error sqrt(r (1 - r) / n) of the success rate.
  double stderr_success = 0.0;
  double threshold = outcome::kDefaultThreshold;
  // Set when the year had no failures (hallucination rate reported as 0).
  bool no_failures = false;
};

// Ascending by year. All outcomes are expected to share one threshold.
std::vector<YearlyRates> rates_by_year(
    std::span<const outcome::Outcome> outcomes,
    HallucinationDenominator denominator = HallucinationDenominator::failures);

struct EntityTally {
  std::string entity_id;
  std::size_t years_correct = 0;
  std::size_t years_hallucinated = 0;
  // Mean covariate over the entity's outcome years that have one.
  std::optional<double> mean_covariate;
};

// Lexicographic by entity_id. `covariate` may be null.
std::vector<EntityTally> tally_entities(std::span<const outcome::Outcome> outcomes,
                                        const ingest::CovariateIndex* covariate);

// Re-classifies each outcome's (truth, answer) at every threshold. The
// thresholds must be strictly increasing and inside (0, 1).
std::map<double, std::vector<YearlyRates>> threshold_sweep(
    std::span<const outcome::Outcome> outcomes, std::span<const double> thresholds,
    HallucinationDenominator denominator = HallucinationDenominator::failures);

// Box-plot summary of the percent errors of answered records in one year.
struct ErrorSummary {
  int year = 0;
  std::size_t n = 0;
  std::size_t answered = 0;
  double answer_rate = 0.0;
  bool empty = true;  // no answered record with a finite error
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double lower_whisker = 0.0;
  double upper_whisker = 0.0;
  // Finite errors beyond 1.5 IQR from the quartiles, plus infinite errors.
  std::size_t outlier_count = 0;
};

std::vector<ErrorSummary> error_distribution(std::span<const outcome::Outcome> outcomes);

// Linear-interpolation quantile (the common "type 7" definition) of sorted data.
double quantile_sorted(std::span<const double> sorted, double q);

// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

void write_rates(const std::filesystem::path& path, std::span<const YearlyRates> rates);
void write_tallies(const std::filesystem::path& path, std::span<const EntityTally> tallies);
void write_error_distribution(const std::filesystem::path& path,
                              std::span<const ErrorSummary> summaries);

// Writes rates.csv, tallies.csv, fits.json and summary.txt into out_dir.
// Rows are ordered by (threshold, year) and entity_id.
std::vector<std::filesystem::path> emit_report(std::span<const YearlyRates> rates,
                                               std::span<const EntityTally> tallies,
                                               std::span<const glmfit::NamedFit> fits,
                                               const std::filesystem::path& out_dir);

}  // namespace kgap::analytics
