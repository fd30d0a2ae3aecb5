#include "kgap/ingest.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "kgap/common/csv.hpp"
#include "kgap/error.hpp"

namespace kgap::ingest {

namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void row_error(std::size_t line, std::string_view column,
                            std::string_view why) {
  throw DataError(fmt::format("row at line {}, column '{}': {}", line, column, why));
}

double parse_real(std::string_view text, std::size_t line, std::string_view column) {
  text = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
    row_error(line, column, fmt::format("not a number: '{}'", text));
  }
  if (!std::isfinite(v)) row_error(line, column, "value is not finite");
  return v;
}

int parse_int(std::string_view text, std::size_t line, std::string_view column) {
  text = trim(text);
  int v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
    row_error(line, column, fmt::format("not an integer: '{}'", text));
  }
  return v;
}

std::size_t require_column(const csv::Table& table, std::string_view name) {
  const auto idx = table.column(name);
  if (idx == std::string::npos) {
    throw DataError(fmt::format("missing column '{}'", name));
  }
  return idx;
}

const std::string& cell(const csv::Table& table, std::size_t r, std::size_t c,
                        std::string_view column) {
  const auto& row = table.rows[r];
  if (c >= row.size()) row_error(table.line_numbers[r], column, "field missing");
  return row[c];
}

}  // namespace

std::string_view to_string(Unit unit) {
  switch (unit) {
    case Unit::millions_usd: return "millions_usd";
    case Unit::points: return "points";
    case Unit::raw: return "raw";
  }
  return "raw";
}

Unit parse_unit(std::string_view text) {
  text = trim(text);
  if (text == "millions_usd") return Unit::millions_usd;
  if (text == "points") return Unit::points;
  if (text == "raw") return Unit::raw;
  throw DataError(fmt::format("unknown unit '{}'", text));
}

std::string_view to_string(TransformTag tag) {
  switch (tag) {
    case TransformTag::raw: return "raw";
    case TransformTag::log10: return "log10";
    case TransformTag::standardized: return "standardized";
    case TransformTag::inflation_adjusted_log10: return "inflation_adjusted_log10";
  }
  return "raw";
}

TransformTag parse_transform_tag(std::string_view text) {
  text = trim(text);
  if (text == "raw") return TransformTag::raw;
  if (text == "log10") return TransformTag::log10;
  if (text == "standardized") return TransformTag::standardized;
  if (text == "inflation_adjusted_log10") return TransformTag::inflation_adjusted_log10;
  throw DataError(fmt::format("unknown transform tag '{}'", text));
}

CpiSeries::CpiSeries(std::map<std::string, double> levels)
    : levels_(levels.begin(), levels.end()) {
  for (const auto& [period, level] : levels_) {
    if (!(level > 0.0) || !std::isfinite(level)) {
      throw DataError(fmt::format("CPI level for {} must be positive", period));
    }
  }
}

double CpiSeries::level(std::string_view period) const {
  const auto it = levels_.find(period);
  if (it == levels_.end()) {
    throw DataError(fmt::format("CPI has no level for period '{}'", period));
  }
  return it->second;
}

bool CpiSeries::contains(std::string_view period) const {
  return levels_.find(period) != levels_.end();
}

const std::string& CpiSeries::latest_period() const {
  if (levels_.empty()) throw DataError("CPI series is empty");
  return levels_.rbegin()->first;
}

std::vector<FactRecord> parse_facts(std::string_view csv_text, const FactSchema& schema) {
  const auto table = csv::parse(csv_text);
  std::vector<FactRecord> facts;
  if (table.header.empty()) return facts;

  const auto c_id = require_column(table, schema.entity_id);
  const auto c_name = require_column(table, schema.entity_name);
  const auto c_year = require_column(table, schema.year);
  const auto c_value = require_column(table, schema.value);
  const auto c_unit = require_column(table, schema.unit);

  std::set<std::pair<std::string, int>> seen;
  facts.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto line = table.line_numbers[r];
    FactRecord f;
    f.entity_id = std::string(trim(cell(table, r, c_id, schema.entity_id)));
    if (f.entity_id.empty()) row_error(line, schema.entity_id, "empty entity id");
    f.entity_name = cell(table, r, c_name, schema.entity_name);
    f.year = parse_int(cell(table, r, c_year, schema.year), line, schema.year);
    if (f.year < schema.min_year || f.year > schema.max_year) {
      row_error(line, schema.year,
                fmt::format("year {} outside [{}, {}]", f.year, schema.min_year,
                            schema.max_year));
    }
    f.value = parse_real(cell(table, r, c_value, schema.value), line, schema.value);
    try {
      f.unit = parse_unit(cell(table, r, c_unit, schema.unit));
    } catch (const DataError& e) {
      row_error(line, schema.unit, e.what());
    }
    if (!facts.empty() && f.unit != facts.front().unit) {
      row_error(line, schema.unit,
                fmt::format("unit '{}' differs from table unit '{}'", to_string(f.unit),
                            to_string(facts.front().unit)));
    }
    if (!seen.emplace(f.entity_id, f.year).second) {
      throw DataError(fmt::format("duplicate fact key (entity_id={}, year={}) at line {}",
                                  f.entity_id, f.year, line));
    }
    facts.push_back(std::move(f));
  }
  return facts;
}

std::vector<FactRecord> load_facts(const std::filesystem::path& path,
                                   const FactSchema& schema) {
  return parse_facts(read_text(path), schema);
}

void write_facts(const std::filesystem::path& path, std::span<const FactRecord> facts) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  csv::write_row(out, {"entity_id", "entity_name", "year", "value", "unit"});
  for (const auto& f : facts) {
    csv::write_row(out, {f.entity_id, f.entity_name, std::to_string(f.year),
                         fmt::format("{}", f.value), std::string(to_string(f.unit))});
  }
}

std::vector<CovariateValue> parse_covariates(std::string_view csv_text) {
  const auto table = csv::parse(csv_text);
  std::vector<CovariateValue> out;
  if (table.header.empty()) return out;

  const auto c_id = require_column(table, "entity_id");
  const auto c_year = require_column(table, "year");
  const auto c_name = require_column(table, "name");
  const auto c_value = require_column(table, "value");
  const auto c_tag = require_column(table, "transform_tag");

  out.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto line = table.line_numbers[r];
    CovariateValue v;
    v.entity_id = std::string(trim(cell(table, r, c_id, "entity_id")));
    v.year = parse_int(cell(table, r, c_year, "year"), line, "year");
    v.name = std::string(trim(cell(table, r, c_name, "name")));
    if (v.name.empty()) row_error(line, "name", "empty covariate name");
    v.value = parse_real(cell(table, r, c_value, "value"), line, "value");
    try {
      v.transform_tag = parse_transform_tag(cell(table, r, c_tag, "transform_tag"));
    } catch (const DataError& e) {
      row_error(line, "transform_tag", e.what());
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<CovariateValue> load_covariates(const std::filesystem::path& path) {
  return parse_covariates(read_text(path));
}

void write_covariates(const std::filesystem::path& path,
                      std::span<const CovariateValue> covariates) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  csv::write_row(out, {"entity_id", "year", "name", "value", "transform_tag"});
  for (const auto& c : covariates) {
    csv::write_row(out, {c.entity_id, std::to_string(c.year), c.name,
                         fmt::format("{}", c.value),
                         std::string(to_string(c.transform_tag))});
  }
}

CpiSeries parse_cpi(std::string_view csv_text) {
  const auto table = csv::parse(csv_text);
  std::map<std::string, double> levels;
  if (table.header.empty()) return CpiSeries(std::move(levels));
  const auto c_period = require_column(table, "period");
  const auto c_level = require_column(table, "level");
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto line = table.line_numbers[r];
    std::string period(trim(cell(table, r, c_period, "period")));
    const double level = parse_real(cell(table, r, c_level, "level"), line, "level");
    if (!(level > 0.0)) row_error(line, "level", "CPI level must be positive");
    if (!levels.emplace(period, level).second) {
      throw DataError(fmt::format("duplicate CPI period '{}' at line {}", period, line));
    }
  }
  return CpiSeries(std::move(levels));
}

CpiSeries load_cpi(const std::filesystem::path& path) { return parse_cpi(read_text(path)); }

double adjust_inflation(double value, std::string_view period, std::string_view reference,
                        const CpiSeries& cpi) {
  const double at_t = cpi.level(period);
  const double at_r = cpi.level(reference);
  if (period == reference) return value;
  return value * (at_r / at_t);
}

double log_transform(double value) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw DomainError(fmt::format("log10 requires a positive finite value, got {}", value));
  }
  return std::log10(value);
}

std::vector<double> standardize(std::span<const double> values) {
  if (values.size() < 2) {
    throw DomainError("standardize needs at least two values");
  }
  const double n = static_cast<double>(values.size());
  double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double residual = 0.0;
  for (double v : values) residual += v - mean;
  mean += residual / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (!(sd > 0.0)) throw DomainError("standardize: zero variance");

  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) out.push_back((v - mean) / sd);
  return out;
}

McapBucket bucket_of(double log_mcap) {
  if (!std::isfinite(log_mcap)) {
    throw DomainError("log market cap must be finite");
  }
  if (log_mcap < 8.0) return McapBucket::below_8;
  if (log_mcap < 9.0) return McapBucket::eight;
  if (log_mcap < 10.0) return McapBucket::nine;
  return McapBucket::ten_and_above;
}

std::string_view label(McapBucket bucket) {
  switch (bucket) {
    case McapBucket::below_8: return "<8.00";
    case McapBucket::eight: return "8.xx";
    case McapBucket::nine: return "9.xx";
    case McapBucket::ten_and_above: return ">=10.00";
  }
  return "<8.00";
}

std::vector<CovariateValue> standardize_covariate(std::span<const CovariateValue> covariates,
                                                  std::string_view name) {
  std::vector<double> values;
  for (const auto& c : covariates) {
    if (c.name == name) values.push_back(c.value);
  }
  const auto z = standardize(values);

  std::vector<CovariateValue> out(covariates.begin(), covariates.end());
  std::size_t k = 0;
  for (auto& c : out) {
    if (c.name != name) continue;
    c.value = z[k++];
    c.transform_tag = TransformTag::standardized;
  }
  return out;
}

CovariateIndex index_covariate(std::span<const CovariateValue> covariates,
                               std::string_view name) {
  CovariateIndex index;
  for (const auto& c : covariates) {
    if (c.name != name) continue;
    if (!index.emplace(std::make_pair(c.entity_id, c.year), c.value).second) {
      throw DataError(fmt::format("duplicate covariate key (entity_id={}, year={}, name={})",
                                  c.entity_id, c.year, c.name));
    }
  }
  return index;
}

JoinResult join_covariates(std::span<const FactRecord> facts,
                           std::span<const CovariateValue> covariates,
                           std::string_view name) {
  const auto index = index_covariate(covariates, name);
  JoinResult result;
  for (const auto& f : facts) {
    const auto it = index.find({f.entity_id, f.year});
    if (it == index.end()) {
      ++result.dropped;
      continue;
    }
    result.rows.push_back({f, it->second});
  }
  return result;
}

}  // namespace kgap::ingest
