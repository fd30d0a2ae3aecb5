#include <doctest.h>

#include <cmath>
#include <numeric>

#include "kgap/common/rng.hpp"
#include "kgap/error.hpp"
#include "kgap/ingest.hpp"

using namespace kgap;
using namespace kgap::ingest;

namespace {

const char* kHeader = "entity_id,entity_name,year,value,unit\n";

double sample_mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  const double m = sample_mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

TEST_CASE("load_facts maps a row onto a FactRecord") {
  const auto facts = parse_facts(std::string(kHeader) + "1234,NEXTERA ENERGY,1984,1521.0,millions_usd\n");
  REQUIRE(facts.size() == 1);
  CHECK(facts[0].entity_id == "1234");
  CHECK(facts[0].entity_name == "NEXTERA ENERGY");
  CHECK(facts[0].year == 1984);
  CHECK(facts[0].value == 1521.0);
  CHECK(facts[0].unit == Unit::millions_usd);
}

TEST_CASE("load_facts on an empty file is empty") {
  CHECK(parse_facts("").empty());
  CHECK(parse_facts(kHeader).empty());
}

TEST_CASE("load_facts rejects duplicate keys and names the key") {
  const std::string text = std::string(kHeader) +
                           "1234,NEXTERA ENERGY,1984,1521.0,millions_usd\n"
                           "1234,NEXTERA ENERGY,1984,1600.0,millions_usd\n";
  try {
    parse_facts(text);
    FAIL("expected a duplicate-key error");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("duplicate") != std::string::npos);
    CHECK(msg.find("1234") != std::string::npos);
    CHECK(msg.find("1984") != std::string::npos);
  }
}

TEST_CASE("load_facts reports the row line and column of malformed fields") {
  const std::string text = std::string(kHeader) + "1,A,1990,10,millions_usd\n2,B,1991,abc,millions_usd\n";
  try {
    parse_facts(text);
    FAIL("expected a malformed-row error");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("'value'") != std::string::npos);
  }
}

TEST_CASE("load_facts enforces the year window and a single unit") {
  FactSchema schema;
  schema.min_year = 1980;
  schema.max_year = 2022;
  CHECK_THROWS_AS(parse_facts(std::string(kHeader) + "1,A,1979,10,millions_usd\n", schema), DataError);
  CHECK_THROWS_AS(parse_facts(std::string(kHeader) + "1,A,1990,10,millions_usd\n2,B,1990,3,points\n"),
                  DataError);
  CHECK_THROWS_AS(parse_facts(std::string(kHeader) + "1,A,1990,10,euros\n"), DataError);
}

TEST_CASE("load_facts honours a column mapping") {
  FactSchema schema;
  schema.entity_id = "gvkey";
  schema.entity_name = "conm";
  schema.year = "fyear";
  schema.value = "revt";
  const auto facts =
      parse_facts("fyear,gvkey,revt,conm,unit\n2018,001690,265595,\"APPLE INC.\",millions_usd\n", schema);
  REQUIRE(facts.size() == 1);
  CHECK(facts[0].entity_id == "001690");
  CHECK(facts[0].entity_name == "APPLE INC.");
  CHECK(facts[0].value == 265595.0);
}

TEST_CASE("adjust_inflation examples") {
  const CpiSeries cpi({{"1990", 200.0}, {"2022", 300.0}, {"2000", 200.0}});
  CHECK(adjust_inflation(100.0, "1990", "2000", cpi) == 100.0);
  CHECK(adjust_inflation(100.0, "1990", "2022", cpi) == doctest::Approx(150.0).epsilon(1e-15));
  CHECK(adjust_inflation(0.0, "1990", "2022", cpi) == 0.0);
  CHECK(cpi.latest_period() == "2022");
  try {
    adjust_inflation(1.0, "1985", "2022", cpi);
    FAIL("expected a lookup error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("1985") != std::string::npos);
  }
}

TEST_CASE("CPI series supports monthly keys and rejects non-positive levels") {
  const auto cpi = parse_cpi("period,level\n2022-11,297.7\n2022-12,296.8\n2021-12,278.8\n");
  CHECK(cpi.latest_period() == "2022-12");
  CHECK(adjust_inflation(10.0, "2021-12", "2022-12", cpi) == doctest::Approx(10.0 * 296.8 / 278.8));
  CHECK_THROWS_AS(parse_cpi("period,level\n2022,0\n"), DataError);
}

TEST_CASE("adjust_inflation identity and linearity over random inputs") {
  Rng rng(7);
  std::map<std::string, double> levels;
  for (int y = 1980; y <= 2022; ++y) levels[std::to_string(y)] = rng.uniform(50.0, 350.0);
  const CpiSeries cpi(levels);
  for (int i = 0; i < 2000; ++i) {
    const auto t = std::to_string(1980 + static_cast<int>(rng.below(43)));
    const auto r = std::to_string(1980 + static_cast<int>(rng.below(43)));
    const double v = rng.uniform(-1e6, 1e6);
    const double a = rng.uniform(-100.0, 100.0);
    CHECK(adjust_inflation(v, t, t, cpi) == v);
    const double lhs = adjust_inflation(a * v, t, r, cpi);
    const double rhs = a * adjust_inflation(v, t, r, cpi);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(rhs)));
  }
}

TEST_CASE("log_transform") {
  CHECK(log_transform(1e9) == 9.0);
  CHECK(log_transform(1.0) == 0.0);
  CHECK_THROWS_AS(log_transform(-5.0), DomainError);
  CHECK_THROWS_AS(log_transform(0.0), DomainError);
  for (int k = -20; k <= 20; ++k) {
    CHECK(log_transform(std::pow(10.0, k)) == static_cast<double>(k));
  }
}

TEST_CASE("standardize examples") {
  const auto a = standardize(std::vector<double>{1, 2, 3});
  CHECK(a == std::vector<double>{-1.0, 0.0, 1.0});
  CHECK_THROWS_AS(standardize(std::vector<double>{5, 5, 5}), DomainError);
  CHECK_THROWS_AS(standardize(std::vector<double>{5}), DomainError);
  const auto b = standardize(std::vector<double>{0, 2});
  CHECK(b[0] == doctest::Approx(-0.70710678).epsilon(1e-8));
  CHECK(b[1] == doctest::Approx(0.70710678).epsilon(1e-8));
}

TEST_CASE("standardize moments hold for random series") {
  Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const auto n = 2 + rng.below(300);
    const double scale = std::pow(10.0, rng.uniform(-3.0, 6.0));
    const double shift = rng.uniform(-1e4, 1e4);
    std::vector<double> v(n);
    for (auto& x : v) x = shift + scale * rng.normal();
    const auto z = standardize(v);
    CHECK(std::abs(sample_mean(z)) <= 1e-9);
    CHECK(std::abs(sample_sd(z) - 1.0) <= 1e-9);
  }
}

TEST_CASE("bucketize_logmcap labels and boundaries") {
  CHECK(bucketize_logmcap(7.5) == "<8.00");
  CHECK(bucketize_logmcap(9.3) == "9.xx");
  CHECK(bucketize_logmcap(10.0) == ">=10.00");
  CHECK(bucketize_logmcap(8.0) == "8.xx");
  CHECK(bucketize_logmcap(std::nextafter(8.0, 0.0)) == "<8.00");
  CHECK(bucketize_logmcap(std::nextafter(10.0, 0.0)) == "9.xx");
  CHECK_THROWS_AS(bucketize_logmcap(std::nan("")), DomainError);
  CHECK_THROWS_AS(bucketize_logmcap(INFINITY), DomainError);
}

TEST_CASE("buckets partition the reals in order") {
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const double a = rng.uniform(-50.0, 50.0);
    const double b = rng.uniform(-50.0, 50.0);
    const auto ba = bucket_of(a);
    const auto bb = bucket_of(b);
    if (a <= b) CHECK(static_cast<int>(ba) <= static_cast<int>(bb));
  }
}

TEST_CASE("join_covariates keeps matches and counts drops") {
  const std::vector<FactRecord> facts{{"a", "A", 2000, 1.0, Unit::millions_usd},
                                      {"b", "B", 2000, 2.0, Unit::millions_usd},
                                      {"c", "C", 2000, 3.0, Unit::millions_usd}};
  const std::vector<CovariateValue> covs{{"a", 2000, "mcap", 8.5, TransformTag::log10},
                                         {"c", 2000, "mcap", 9.5, TransformTag::log10},
                                         {"b", 2000, "other", 1.0, TransformTag::raw}};
  const auto j = join_covariates(facts, covs, "mcap");
  REQUIRE(j.rows.size() == 2);
  CHECK(j.dropped == 1);
  CHECK(j.rows[0].fact.entity_id == "a");
  CHECK(j.rows[0].covariate == 8.5);
  CHECK(j.rows[1].fact.entity_id == "c");

  CHECK(join_covariates(facts, {}, "mcap").rows.empty());

  auto dup = covs;
  dup.push_back({"a", 2000, "mcap", 7.0, TransformTag::log10});
  try {
    join_covariates(facts, dup, "mcap");
    FAIL("expected duplicate-key error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("entity_id=a") != std::string::npos);
  }
}

TEST_CASE("join result is bounded and keys agree") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<FactRecord> facts;
    std::vector<CovariateValue> covs;
    for (int e = 0; e < 20; ++e) {
      for (int y = 2000; y < 2005; ++y) {
        if (rng.bernoulli(0.7)) facts.push_back({std::to_string(e), "E", y, 1.0, Unit::raw});
        if (rng.bernoulli(0.5)) covs.push_back({std::to_string(e), y, "x", rng.uniform(), TransformTag::raw});
      }
    }
    const auto j = join_covariates(facts, covs, "x");
    CHECK(j.rows.size() <= std::min(facts.size(), covs.size()));
    CHECK(j.rows.size() + j.dropped == facts.size());
    const auto idx = index_covariate(covs, "x");
    for (const auto& r : j.rows) CHECK(idx.at({r.fact.entity_id, r.fact.year}) == r.covariate);
  }
}

TEST_CASE("standardize_covariate retags only the named covariate") {
  const std::vector<CovariateValue> covs{{"a", 2000, "x", 1.0, TransformTag::raw},
                                         {"a", 2000, "y", 7.0, TransformTag::raw},
                                         {"b", 2000, "x", 3.0, TransformTag::raw}};
  const auto out = standardize_covariate(covs, "x");
  CHECK(out[0].value == doctest::Approx(-0.70710678));
  CHECK(out[0].transform_tag == TransformTag::standardized);
  CHECK(out[1] == covs[1]);
  CHECK(out[2].value == doctest::Approx(0.70710678));
}

TEST_CASE("covariates file parses and rejects unknown tags") {
  const auto covs = parse_covariates(
      "entity_id,year,name,value,transform_tag\na,2001,mcap_log10,9.1,inflation_adjusted_log10\n");
  REQUIRE(covs.size() == 1);
  CHECK(covs[0].transform_tag == TransformTag::inflation_adjusted_log10);
  CHECK_THROWS_AS(parse_covariates("entity_id,year,name,value,transform_tag\na,2001,m,9.1,cubed\n"),
                  DataError);
}
