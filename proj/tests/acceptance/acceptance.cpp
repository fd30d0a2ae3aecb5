// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <fmt/format.h>
#include <json.hpp>
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "kgap/analytics.hpp"
#include "kgap/common/csv.hpp"
#include "kgap/common/hash.hpp"
#include "kgap/common/rng.hpp"
#include "kgap/error.hpp"
#include "kgap/extract.hpp"
#include "kgap/glmfit.hpp"
#include "kgap/ingest.hpp"
#include "kgap/llmgate.hpp"
#include "kgap/outcome.hpp"
#include "kgap/promptgen.hpp"

namespace fs = std::filesystem;
using namespace kgap;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("kgap_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int cli(const fs::path& dir, const std::string& args) {
  const auto cmd = fmt::format("{} {} > {} 2> {}", KGAP_CLI, args, (dir / "stdout.txt").string(),
                               (dir / "stderr.txt").string());
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void must(const fs::path& dir, const std::string& args) {
  if (const int rc = cli(dir, args); rc != 0) {
    throw std::runtime_error(
        fmt::format("kgap {} exited {}: {}", args, rc, slurp(dir / "stderr.txt")));
  }
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// ---------------------------------------------------------------------------
// 1. extraction corpus

Verdict extraction_corpus() {
  const auto t0 = Clock::now();
  const auto table = csv::read_file(fs::path(KGAP_DATA_DIR) / "extraction_corpus.csv");
  int agree = 0;
  int numeric = 0;
  for (const auto& row : table.rows) {
    const auto got = extract::extract_money(row.at(0)).value;
    const bool labelled = !row.at(1).empty();
    numeric += labelled;
    if (labelled) {
      const double want = std::stod(row[1]);
      agree += got && std::abs(*got - want) <= 1e-9 * std::max(1.0, std::abs(want));
    } else {
      agree += !got;
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = table.rows.size() == 100 && numeric == 85 && agree == 100 && secs < 1.0;
  return {ok, fmt::format("{} texts ({} numeric, {} refusals), {}/100 agree with labels, {:.3f} s",
                          table.rows.size(), numeric, table.rows.size() - numeric, agree, secs)};
}

// ---------------------------------------------------------------------------
// 2. regression oracle

// Plain Newton-Raphson with Gauss-Jordan solves; shares no code with glmfit.
std::vector<double> newton_oracle(const std::vector<std::vector<double>>& x,
                                  const std::vector<double>& y) {
  const std::size_t n = x.size();
  const std::size_t p = x[0].size();
  std::vector<double> beta(p, 0.0);
  for (int it = 0; it < 200; ++it) {
    std::vector<double> g(p, 0.0);
    std::vector<std::vector<double>> h(p, std::vector<double>(p + 1, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      double eta = 0.0;
      for (std::size_t j = 0; j < p; ++j) eta += x[i][j] * beta[j];
      const double mu = sigmoid(eta);
      const double w = mu * (1.0 - mu);
      for (std::size_t j = 0; j < p; ++j) {
        g[j] += (y[i] - mu) * x[i][j];
        for (std::size_t k = 0; k < p; ++k) h[j][k] += w * x[i][j] * x[i][k];
      }
    }
    for (std::size_t j = 0; j < p; ++j) h[j][p] = g[j];
    for (std::size_t c = 0; c < p; ++c) {
      std::size_t piv = c;
      for (std::size_t r = c + 1; r < p; ++r) {
        if (std::abs(h[r][c]) > std::abs(h[piv][c])) piv = r;
      }
      std::swap(h[c], h[piv]);
      for (std::size_t r = 0; r < p; ++r) {
        if (r == c) continue;
        const double f = h[r][c] / h[c][c];
        for (std::size_t k = c; k <= p; ++k) h[r][k] -= f * h[c][k];
      }
    }
    double step = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      const double d = h[j][p] / h[j][j];
      beta[j] += d;
      step = std::max(step, std::abs(d));
    }
    if (step < 1e-14) break;
  }
  return beta;
}

glmfit::Frame simulate_year_panel(Rng& rng, std::size_t n, double alpha, double beta) {
  glmfit::Frame f;
  std::vector<std::optional<double>> x;
  std::vector<std::optional<std::string>> year;
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = rng.normal();
    const auto level = static_cast<int>(rng.below(3));
    f.response_codes.push_back(rng.bernoulli(sigmoid(alpha + beta * xi)) ? 2 : 0);
    x.emplace_back(xi);
    year.emplace_back(std::to_string(2000 + level));
  }
  f.covariates.emplace_back("x", std::move(x));
  f.factors.emplace_back("year", std::move(year));
  return f;
}

Verdict regression_oracle() {
  const auto t0 = Clock::now();
  std::vector<std::string> notes;
  bool ok = true;

  // n = 20, one covariate, against the brute-force oracle.
  {
    Rng rng(2024);
    double worst = 0.0;
    int compared = 0;
    for (int rep = 0; rep < 50 && compared < 20; ++rep) {
      std::vector<double> xs(20), ys(20);
      for (int i = 0; i < 20; ++i) {
        xs[i] = rng.normal();
        ys[i] = rng.bernoulli(sigmoid(-0.3 + 0.9 * xs[i])) ? 1.0 : 0.0;
      }
      const std::vector<std::pair<std::string, std::vector<double>>> cols{{"x", xs}};
      glmfit::FitResult fit;
      try {
        fit = glmfit::fit_logit(glmfit::design_from_columns(cols, ys));
      } catch (const SeparationError&) {
        continue;
      }
      std::vector<std::vector<double>> rows;
      for (double v : xs) rows.push_back({1.0, v});
      const auto ref = newton_oracle(rows, ys);
      for (std::size_t j = 0; j < 2; ++j) {
        worst = std::max(worst, std::abs(fit.coefficients[j].estimate - ref[j]));
      }
      ++compared;
    }
    ok &= compared == 20 && worst <= 1e-6;
    notes.push_back(fmt::format("n=20 oracle max|diff|={:.1e} over {} fits", worst, compared));
  }

  // n = 10,000 with a 3-level year factor; true year effects are zero.
  glmfit::RegressionSpec spec;
  spec.covariate_names = {"x"};
  spec.fixed_effects = {"year"};
  {
    Rng rng(77);
    const auto design = glmfit::build_design(simulate_year_panel(rng, 10000, -1.0, 0.8), spec);
    const auto fit = glmfit::fit_logit(design);
    double worst_z = 0.0;
    for (const auto& c : fit.coefficients) {
      const double truth = c.name == glmfit::kIntercept ? -1.0 : c.name == "x" ? 0.8 : 0.0;
      worst_z = std::max(worst_z, std::abs(c.estimate - truth) / c.std_error);
    }
    ok &= fit.coefficients.size() == 4 && worst_z <= 3.0;
    notes.push_back(fmt::format("n=10000 {} coefs, max |err|/SE={:.2f}", fit.coefficients.size(), worst_z));
  }

  // 200 replications, 95% Wald intervals for alpha and beta.
  {
    Rng rng(99);
    int covered_a = 0;
    int covered_b = 0;
    for (int rep = 0; rep < 200; ++rep) {
      const auto fit = glmfit::fit_logit(glmfit::build_design(simulate_year_panel(rng, 1000, -1.0, 0.8), spec));
      const auto& a = fit.at(glmfit::kIntercept);
      const auto& b = fit.at("x");
      covered_a += std::abs(a.estimate + 1.0) <= 1.959964 * a.std_error;
      covered_b += std::abs(b.estimate - 0.8) <= 1.959964 * b.std_error;
    }
    ok &= covered_a >= 180 && covered_b >= 180;
    notes.push_back(fmt::format("coverage alpha {}/200 beta {}/200", covered_a, covered_b));
  }

  const double secs = seconds_since(t0);
  ok &= secs < 30.0;
  notes.push_back(fmt::format("{:.2f} s", secs));
  return {ok, fmt::format("{}", fmt::join(notes, "; "))};
}

// ---------------------------------------------------------------------------
// 3 and 4. planted bias through the full CLI pipeline

struct PlantedRun {
  bool ran = false;
  std::string error;
  double beta_success = 0.0;
  double p_success = 1.0;
  double beta_halluc = 0.0;
  double p_halluc = 1.0;
  double rho = 0.0;
  double seconds = 0.0;
};

double beta_from(const fs::path& fits, std::string_view model, double* p) {
  const auto j = nlohmann::json::parse(slurp(fits));
  for (const auto& m : j) {
    if (m.at("label") != model) continue;
    for (const auto& c : m.at("coefficients")) {
      if (c.at("name") == "z") {
        *p = c.at("p").get<double>();
        return c.at("coef").get<double>();
      }
    }
  }
  throw std::runtime_error(fmt::format("no coefficient z for {} in {}", model, fits.string()));
}

PlantedRun planted_run() {
  PlantedRun r;
  const auto t0 = Clock::now();
  try {
    const auto dir = scratch("planted");
    Rng rng(31);
    std::vector<ingest::FactRecord> facts;
    std::vector<ingest::CovariateValue> raw;
    for (int e = 0; e < 500; ++e) {
      const auto id = fmt::format("C{:03}", e);
      const double size = 9.0 + 0.8 * rng.normal();
      for (int y = 2000; y < 2020; ++y) {
        facts.push_back({id, fmt::format("Company {:03}", e), y,
                         std::round(std::pow(10.0, rng.uniform(1.0, 4.5)) * 10.0) / 10.0,
                         ingest::Unit::millions_usd});
        raw.push_back({id, y, "z", size + 0.2 * rng.normal(), ingest::TransformTag::log10});
      }
    }
    ingest::write_facts(dir / "facts.csv", facts);
    ingest::write_covariates(dir / "cov.csv", ingest::standardize_covariate(raw, "z"));

    llmgate::OracleProfile profile;
    profile.a_const = -1.5;
    profile.b_year = 0.15;
    profile.c_cov = 1.0;
    profile.hallucinate_given_known = 0.1;
    profile.h_cov = 2.0;
    profile.noise_seed = 8;
    profile.base_year = 2000;
    profile.covariate = "z";
    std::ofstream(dir / "profile.json") << llmgate::to_json(profile).dump(2);

    const auto p = [&](const char* n) { return (dir / n).string(); };
    must(dir, fmt::format("gen --facts {} --out {}", p("facts.csv"), p("prompts.jsonl")));
    must(dir, fmt::format("query --prompts {} --facts {} --covariates {} --mock {} --parallelism 8 --out {}",
                          p("prompts.jsonl"), p("facts.csv"), p("cov.csv"), p("profile.json"),
                          p("responses.jsonl")));
    must(dir, fmt::format("extract --responses {} --out {}", p("responses.jsonl"), p("answers.jsonl")));
    must(dir, fmt::format("classify --answers {} --prompts {} --facts {} --out {}", p("answers.jsonl"),
                          p("prompts.jsonl"), p("facts.csv"), p("outcomes.csv")));
    must(dir, fmt::format("temporal --outcomes {} --out {}", p("outcomes.csv"), p("temporal")));
    for (const char* target : {"success", "hallucination"}) {
      must(dir, fmt::format("regress --outcomes {} --covariates {} --x z --fixed year --target {} --out {}",
                            p("outcomes.csv"), p("cov.csv"), target,
                            (dir / fmt::format("fits_{}.json", target)).string()));
    }
    r.beta_success = beta_from(dir / "fits_success.json", "success", &r.p_success);
    r.beta_halluc = beta_from(dir / "fits_hallucination.json", "hallucination", &r.p_halluc);

    const auto rates = csv::read_file(dir / "temporal" / "rates.csv");
    std::vector<double> years, success;
    for (const auto& row : rates.rows) {
      years.push_back(std::stod(row.at(0)));
      success.push_back(std::stod(row.at(2)));
    }
    if (years.size() != 20) throw std::runtime_error(fmt::format("{} rate rows, expected 20", years.size()));
    r.rho = analytics::spearman(years, success);
    r.ran = true;
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  r.seconds = seconds_since(t0);
  return r;
}

Verdict planted_bias(const PlantedRun& r) {
  if (!r.ran) return {false, "pipeline failed: " + r.error};
  const bool ok = r.beta_success >= 0.8 && r.beta_success <= 1.2 && r.rho >= 0.9 && r.seconds < 120.0;
  return {ok, fmt::format("500 entities x 20 years, beta_hat={:.4f} (planted 1.0), spearman(year, success)={:.3f}, {:.1f} s",
                          r.beta_success, r.rho, r.seconds)};
}

Verdict hallucination_structure(const PlantedRun& r) {
  if (!r.ran) return {false, "pipeline failed: " + r.error};
  const bool ok = r.beta_success > 0 && r.p_success < 0.01 && r.beta_halluc > 0 && r.p_halluc < 0.01;
  return {ok, fmt::format("success beta={:.4f} (p={:.2g}), hallucination beta={:.4f} (p={:.2g})",
                          r.beta_success, r.p_success, r.beta_halluc, r.p_halluc)};
}

// ---------------------------------------------------------------------------
// 5. classification invariants

Verdict classification_invariants() {
  Rng rng(55);
  const std::vector<double> dyadic{0.125, 0.25, 0.375, 0.5, 0.625, 0.75};
  int cases = 0;
  std::vector<std::string> broken;
  auto fail = [&](const std::string& what) {
    if (broken.size() < 5) broken.push_back(what);
  };
  for (; cases < 10000; ++cases) {
    const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
    const double truth = sign * std::pow(10.0, rng.uniform(-3.0, 6.0));
    std::optional<double> answer;
    if (!rng.bernoulli(0.15)) answer = truth * (1.0 + 0.2 * rng.normal());
    double t1 = rng.uniform(0.001, 0.999);
    double t2 = rng.uniform(0.001, 0.999);
    if (t1 > t2) std::swap(t1, t2);

    const auto a = outcome::classify(truth, answer, t1);
    const auto b = outcome::classify(truth, answer, t2);
    // Partition: exactly one label, no_answer iff no value.
    const auto code = static_cast<int>(a.y);
    if (code < 0 || code > 2 || (a.y == outcome::Label::no_answer) != !answer) fail("partition");
    // Direct computation.
    if (answer) {
      const double rel = std::abs(*answer - truth) / std::abs(truth);
      const auto want = rel < t1 ? outcome::Label::success : outcome::Label::hallucination;
      if (a.y != want) fail("direct");
    }
    // Monotone in the threshold.
    if (a.y == outcome::Label::success && b.y != outcome::Label::success) fail("monotone");
    if (b.y == outcome::Label::hallucination && a.y != outcome::Label::hallucination) fail("monotone");
    // Scale invariance under exact (power-of-two) rescaling.
    const double s = std::ldexp(1.0, static_cast<int>(rng.below(40)) - 20);
    const auto scaled = outcome::classify(truth * s, answer ? std::optional<double>(*answer * s) : std::nullopt, t1);
    if (scaled.y != a.y) fail("scale");
    // Boundary: an error of exactly the threshold is a hallucination.
    const double theta = dyadic[rng.below(dyadic.size())];
    const double base = sign * std::ldexp(1.0, static_cast<int>(rng.below(30)) - 10);
    const bool above = rng.bernoulli(0.5);
    const double edge = above ? base * (1.0 + theta) : base * (1.0 - theta);
    if (outcome::classify(base, edge, theta).y != outcome::Label::hallucination) fail("boundary");
    // One ulp inside, where the difference to the truth is still exact (Sterbenz).
    if ((above || theta <= 0.5) &&
        outcome::classify(base, std::nextafter(edge, base), theta).y != outcome::Label::success) {
      fail("boundary-inside");
    }
  }
  const bool ok = broken.empty();
  return {ok, ok ? fmt::format("{} randomized cases: partition, direct, monotone, scale, boundary all hold", cases)
                 : fmt::format("violations: {}", fmt::join(broken, ", "))};
}

// ---------------------------------------------------------------------------
// 6. transform identities

Verdict transform_identities() {
  const auto t0 = Clock::now();
  std::vector<std::string> broken;
  auto fail = [&](const std::string& what) {
    if (broken.size() < 5) broken.push_back(what);
  };
  Rng rng(66);

  std::map<std::string, double> levels;
  for (int y = 1980; y <= 2024; ++y) levels[std::to_string(y)] = 80.0 + 4.0 * (y - 1980) + rng.uniform(0, 3);
  const ingest::CpiSeries cpi(levels);
  for (int i = 0; i < 20000; ++i) {
    const auto p = std::to_string(1980 + static_cast<int>(rng.below(45)));
    const auto ref = std::to_string(1980 + static_cast<int>(rng.below(45)));
    const double v1 = rng.uniform(-1e6, 1e6);
    const double v2 = rng.uniform(-1e6, 1e6);
    const double a = rng.uniform(-5, 5);
    const double b = rng.uniform(-5, 5);
    if (ingest::adjust_inflation(v1, p, p, cpi) != v1) fail("inflation identity");
    const double lhs = ingest::adjust_inflation(a * v1 + b * v2, p, ref, cpi);
    const double rhs = a * ingest::adjust_inflation(v1, p, ref, cpi) + b * ingest::adjust_inflation(v2, p, ref, cpi);
    if (std::abs(lhs - rhs) > 1e-9 * std::max({1.0, std::abs(a * v1), std::abs(b * v2)})) fail("inflation linearity");
  }

  for (int trial = 0; trial < 2000; ++trial) {
    const auto n = 2 + rng.below(500);
    const double scale = std::pow(10.0, rng.uniform(-3.0, 6.0));
    const double shift = rng.uniform(-1e4, 1e4);
    std::vector<double> v(n);
    for (auto& x : v) x = shift + scale * rng.normal();
    const auto z = ingest::standardize(v);
    double mean = 0.0;
    for (double x : z) mean += x;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double x : z) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (std::abs(mean) > 1e-9) fail(fmt::format("standardize mean {:.2e}", mean));
    if (std::abs(sd - 1.0) > 1e-9) fail(fmt::format("standardize sd {:.2e}", sd - 1.0));
  }

  for (int k = -20; k <= 20; ++k) {
    if (ingest::log_transform(std::pow(10.0, k)) != static_cast<double>(k)) fail(fmt::format("log10 1e{}", k));
  }

  const std::set<std::string> labels{"<8.00", "8.xx", "9.xx", ">=10.00"};
  auto expected = [](double v) -> std::string {
    return v < 8.0 ? "<8.00" : v < 9.0 ? "8.xx" : v < 10.0 ? "9.xx" : ">=10.00";
  };
  std::vector<double> probes;
  for (int i = 0; i <= 200000; ++i) probes.push_back(i * 1e-4);
  for (double edge : {8.0, 9.0, 10.0}) {
    probes.push_back(edge);
    probes.push_back(std::nextafter(edge, 0.0));
    probes.push_back(std::nextafter(edge, 20.0));
  }
  for (int i = 0; i < 100000; ++i) probes.push_back(rng.uniform(-50.0, 50.0));
  for (double v : probes) {
    const std::string got(ingest::bucketize_logmcap(v));
    if (!labels.contains(got) || got != expected(v)) fail(fmt::format("bucket {}", v));
  }

  const double secs = seconds_since(t0);
  const bool ok = broken.empty() && secs < 5.0;
  return {ok, broken.empty()
                  ? fmt::format("inflation 20000, standardize 2000, log10 41, bucket {} probes; {:.2f} s",
                                probes.size(), secs)
                  : fmt::format("violations: {}", fmt::join(broken, ", "))};
}

// ---------------------------------------------------------------------------
// 7. determinism of CLI stages

Verdict determinism() {
  try {
    const auto dir = scratch("determinism");
    Rng rng(70);
    std::vector<ingest::FactRecord> facts;
    std::vector<ingest::CovariateValue> covs;
    for (int e = 0; e < 80; ++e) {
      for (int y = 2000; y < 2010; ++y) {
        const auto id = fmt::format("D{}", e);
        facts.push_back({id, fmt::format("Firm {}", e), y, std::round(rng.uniform(50, 9000)), ingest::Unit::millions_usd});
        covs.push_back({id, y, "mcap_log10", rng.uniform(7.2, 10.8), ingest::TransformTag::log10});
      }
    }
    ingest::write_facts(dir / "facts.csv", facts);
    ingest::write_covariates(dir / "cov.csv", covs);
    llmgate::OracleProfile profile;
    profile.a_const = -7.0;
    profile.c_cov = 0.8;
    profile.hallucinate_given_known = 0.5;
    profile.noise_seed = 12;
    std::ofstream(dir / "profile.json") << llmgate::to_json(profile).dump();

    const std::vector<std::string> outputs{"prompts.jsonl", "outcomes.csv", "t/rates.csv",
                                           "t/tallies.csv", "t/errors.csv", "fits.json"};
    std::vector<std::vector<std::string>> hashes;
    for (const char* run : {"run1", "run2"}) {
      const auto out = dir / run;
      fs::create_directories(out);
      const auto in = [&](const char* n) { return (dir / n).string(); };
      const auto o = [&](const char* n) { return (out / n).string(); };
      must(dir, fmt::format("gen --facts {} --covariates {} --sample stratified --per-cell 4 --seed 9 --out {}",
                            in("facts.csv"), in("cov.csv"), o("prompts.jsonl")));
      must(dir, fmt::format("query --prompts {} --facts {} --covariates {} --mock {} --out {}", o("prompts.jsonl"),
                            in("facts.csv"), in("cov.csv"), in("profile.json"), o("responses.jsonl")));
      must(dir, fmt::format("extract --responses {} --out {}", o("responses.jsonl"), o("answers.jsonl")));
      must(dir, fmt::format("classify --answers {} --prompts {} --facts {} --out {}", o("answers.jsonl"),
                            o("prompts.jsonl"), in("facts.csv"), o("outcomes.csv")));
      must(dir, fmt::format("temporal --outcomes {} --covariates {} --out {}", o("outcomes.csv"), in("cov.csv"), o("t")));
      must(dir, fmt::format("regress --outcomes {} --covariates {} --x mcap_log10 --fixed year --out {}",
                            o("outcomes.csv"), in("cov.csv"), o("fits.json")));
      std::vector<std::string> h;
      for (const auto& f : outputs) h.push_back(sha256_hex(slurp(out / f)));
      hashes.push_back(std::move(h));
    }
    std::vector<std::string> differing;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      if (hashes[0][i] != hashes[1][i]) differing.push_back(outputs[i]);
    }
    const bool ok = differing.empty();
    return {ok, ok ? fmt::format("{} output files byte-identical across reruns (sha256)", outputs.size())
                   : fmt::format("differing: {}", fmt::join(differing, ", "))};
  } catch (const std::exception& e) {
    return {false, e.what()};
  }
}

// ---------------------------------------------------------------------------
// 8. sampling arithmetic

Verdict sampling_arithmetic() {
  const std::vector<std::string> buckets{"<8.00", "8.xx", "9.xx", ">=10.00"};
  std::vector<promptgen::StratifiedInput> panel;
  for (int y = 1980; y < 2023; ++y) {
    for (std::size_t b = 0; b < buckets.size(); ++b) {
      for (int e = 0; e < 70; ++e) {
        const auto id = fmt::format("S{}_{}", b, e);
        panel.push_back({{id, id, y, 1.0 + e, ingest::Unit::millions_usd}, buckets[b]});
      }
    }
  }
  const auto s = promptgen::sample_stratified(panel, 50, 1);

  std::vector<ingest::FactRecord> facts;
  for (int e = 0; e < 430; ++e) {
    for (int y = 1980; y < 2023; ++y) {
      facts.push_back({fmt::format("I{}", e), "n", y, 1.0, ingest::Unit::millions_usd});
    }
  }
  // Entities with a gap year must be excluded.
  for (int e = 0; e < 25; ++e) {
    for (int y = 1980; y < 2023; ++y) {
      if (y != 2001) facts.push_back({fmt::format("G{}", e), "n", y, 1.0, ingest::Unit::millions_usd});
    }
  }
  const auto inter = promptgen::sample_intersection(facts, 1980, 2022);
  const bool ok = s.records.size() == 8600 && s.shortfalls.empty() && inter.size() == 18490;
  return {ok, fmt::format("stratified 43 years x 4 buckets x 50 = {}; intersection 430 complete entities x 43 years = {}",
                          s.records.size(), inter.size())};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int id, const char* name, const std::function<Verdict()>& check) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << fmt::format("{} criterion {} ({}): {}\n", v.pass ? "PASS" : "FAIL", id, name, v.detail)
              << std::flush;
  };

  report(1, "extraction corpus", extraction_corpus);
  report(2, "regression oracle", regression_oracle);
  const auto planted = planted_run();
  report(3, "planted-bias recovery", [&] { return planted_bias(planted); });
  report(4, "hallucination co-occurrence", [&] { return hallucination_structure(planted); });
  report(5, "classification invariants", classification_invariants);
  report(6, "transform identities", transform_identities);
  report(7, "determinism", determinism);
  report(8, "sampling arithmetic", sampling_arithmetic);

  std::cout << fmt::format("{}/8 criteria passed\n", 8 - failed);
  return failed == 0 ? 0 : 1;
}
