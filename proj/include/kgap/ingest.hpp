#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace kgap::ingest {

enum class Unit { millions_usd, points, raw };

std::string_view to_string(Unit unit);
Unit parse_unit(std::string_view text);

// Ground-truth value for one entity-year: the answer key for one prompt.
struct FactRecord {
  std::string entity_id;
  std::string entity_name;
  int year = 0;
  double value = 0.0;
  Unit unit = Unit::raw;

  friend bool operator==(const FactRecord&, const FactRecord&) = default;
};

enum class TransformTag { raw, log10, standardized, inflation_adjusted_log10 };

std::string_view to_string(TransformTag tag);
TransformTag parse_transform_tag(std::string_view text);

// A named entity-year characteristic (market cap, attention score, ...).
struct CovariateValue {
  std::string entity_id;
  int year = 0;
  std::string name;
  double value = 0.0;
  TransformTag transform_tag = TransformTag::raw;

  friend bool operator==(const CovariateValue&, const CovariateValue&) = default;
};

// CPI levels keyed by period ("2022" or "2022-12"). Keys sort
// lexicographically, which is chronological for both forms.
class CpiSeries {
 public:
  CpiSeries() = default;
  explicit CpiSeries(std::map<std::string, double> levels);

  double level(std::string_view period) const;
  bool contains(std::string_view period) const;
  const std::string& latest_period() const;
  std::size_t size() const { return levels_.size(); }

 private:
  std::map<std::string, double, std::less<>> levels_;
};

// Maps the canonical fact fields onto file columns, and bounds the years
// accepted from the file.
struct FactSchema {
  std::string entity_id = "entity_id";
  std::string entity_name = "entity_name";
  std::string year = "year";
  std::string value = "value";
  std::string unit = "unit";
  int min_year = 1900;
  int max_year = 2100;
};

std::vector<FactRecord> load_facts(const std::filesystem::path& path,
                                   const FactSchema& schema = {});
std::vector<FactRecord> parse_facts(std::string_view csv_text,
                                    const FactSchema& schema = {});
void write_facts(const std::filesystem::path& path,
                 std::span<const FactRecord> facts);

std::vector<CovariateValue> load_covariates(const std::filesystem::path& path);
std::vector<CovariateValue> parse_covariates(std::string_view csv_text);
void write_covariates(const std::filesystem::path& path,
                      std::span<const CovariateValue> covariates);

CpiSeries load_cpi(const std::filesystem::path& path);
CpiSeries parse_cpi(std::string_view csv_text);

// value * CPI(reference) / CPI(period).
double adjust_inflation(double value, std::string_view period,
                        std::string_view reference, const CpiSeries& cpi);

double log_transform(double value);

// Mean-centred, divided by the sample (n-1) standard deviation.
std::vector<double> standardize(std::span<const double> values);

// Log10 market-cap size classes used for stratified sampling.
enum class McapBucket { below_8, eight, nine, ten_and_above };

McapBucket bucket_of(double log_mcap);
std::string_view label(McapBucket bucket);
inline std::string_view bucketize_logmcap(double log_mcap) {
  return label(bucket_of(log_mcap));
}

// Standardizes every covariate called `name` over the whole table and tags
// it `standardized`. Other covariates pass through unchanged.
std::vector<CovariateValue> standardize_covariate(
    std::span<const CovariateValue> covariates, std::string_view name);

struct JoinedRow {
  FactRecord fact;
  double covariate = 0.0;
};

struct JoinResult {
  std::vector<JoinedRow> rows;
  std::size_t dropped = 0;
};

// Inner join on (entity_id, year) against covariates named `name`, in fact
// order. Facts without that covariate are dropped and counted.
JoinResult join_covariates(std::span<const FactRecord> facts,
                           std::span<const CovariateValue> covariates,
                           std::string_view name);

// (entity_id, year) -> value for one covariate name; rejects duplicate keys.
using CovariateIndex = std::map<std::pair<std::string, int>, double>;
CovariateIndex index_covariate(std::span<const CovariateValue> covariates,
                               std::string_view name);

}  // namespace kgap::ingest
