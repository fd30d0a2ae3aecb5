#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace kgap::glmfit {

// Which rows count as 1 in the binary response.
enum class Target {
  success,        // outcome code 2 vs rest
  hallucination,  // outcome code 1 vs rest
  label,          // a 0/1 indicator supplied directly
};

std::string_view to_string(Target t);
Target parse_target(std::string_view text);

struct RegressionSpec {
  Target target = Target::success;
  std::vector<std::string> covariate_names;
  std::vector<std::string> fixed_effects;
  // Optional per-factor reference level; default is the smallest level.
  std::map<std::string, std::string> reference_levels;
};

// Long-form regression input. Missing covariate or factor values are
// nullopt and drop the row.
struct Frame {
  std::vector<int> response_codes;
  std::vector<std::pair<std::string, std::vector<std::optional<double>>>> covariates;
  std::vector<std::pair<std::string, std::vector<std::optional<std::string>>>> factors;

  std::size_t rows() const { return response_codes.size(); }
};

struct FactorCoding {
  std::string name;
  std::string reference;
  // Non-reference levels, in column order.
  std::vector<std::string> levels;
};

// Intercept column first, then covariates, then one dummy per
// non-reference factor level (named "factor=level").
struct DesignMatrix {
  Eigen::MatrixXd x;
  Eigen::VectorXd response;
  std::vector<std::string> column_names;
  std::vector<std::string> covariate_names;
  std::vector<FactorCoding> factors;
  std::size_t dropped_rows = 0;

  std::size_t n() const { return static_cast<std::size_t>(x.rows()); }
  std::size_t columns() const { return static_cast<std::size_t>(x.cols()); }
};

inline constexpr std::string_view kIntercept = "(intercept)";

DesignMatrix build_design(const Frame& frame, const RegressionSpec& spec);

// Intercept plus the given covariate columns; no factors.
DesignMatrix design_from_columns(
    std::span<const std::pair<std::string, std::vector<double>>> covariates,
    std::span<const double> response);

// Significance markers at the 10%, 5% and 1% levels.
enum class Stars { none, ten, five, one };

std::string_view symbol(Stars s);
Stars stars_for(double p_value);

struct Coefficient {
  std::string name;
  double estimate = 0.0;
  double std_error = 0.0;
  double z = 0.0;
  double p_value = 1.0;
  Stars stars = Stars::none;
};

struct FitResult {
  std::vector<Coefficient> coefficients;  // design column order
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
  double score_max_norm = 0.0;
  std::size_t n = 0;
  std::size_t dropped_rows = 0;
  std::vector<std::string> covariate_names;
  std::vector<FactorCoding> factors;

  const Coefficient& at(std::string_view name) const;
  const Coefficient* find(std::string_view name) const;
  Eigen::VectorXd estimates() const;
};

enum class Kernel { serial, parallel };

struct FitOptions {
  double tolerance = 1e-8;  // score max-norm
  int max_iter = 100;
  // Coefficients past this magnitude while Newton is still moving are
  // reported as separation.
  double divergence_bound = 30.0;
  // Newton step max-norm below which a small score counts as converged.
  double step_tolerance = 1e-4;
  Kernel kernel = Kernel::parallel;
};

// Maximum-likelihood logistic regression by Newton-Raphson (IRLS) with
// step halving. Throws SeparationError on diverging coefficients and
// RankError on collinear columns.
FitResult fit_logit(const DesignMatrix& design, const FitOptions& options);
inline FitResult fit_logit(const DesignMatrix& design, double tolerance = 1e-8,
                           int max_iter = 100) {
  FitOptions o;
  o.tolerance = tolerance;
  o.max_iter = max_iter;
  return fit_logit(design, o);
}

// Standard normal CDF, Abramowitz & Stegun 26.2.17 (|error| < 7.5e-8).
double normal_cdf(double z);

// Two-sided p = 2 (1 - Phi(|z|)).
double wald_pvalue(double z);

struct PredictRow {
  std::map<std::string, double> covariates;
  std::map<std::string, std::string> factors;
};

// sigmoid(x' theta). Unknown factor levels throw LevelError.
double predict(const FitResult& fit, const PredictRow& row);

Eigen::VectorXd fitted_probabilities(const FitResult& fit, const DesignMatrix& design);

struct NamedFit {
  std::string label;
  FitResult fit;
};

nlohmann::ordered_json to_json(const FitResult& fit);
nlohmann::ordered_json to_json(std::span<const NamedFit> fits);

// Plain-text table: one row per fit with the constant and the coefficient of
// `covariate`, each marked with significance stars.
std::string format_table(std::span<const NamedFit> fits, std::string_view covariate);

namespace kernels {

// Score X'(y - p), information X' W X and log-likelihood at theta.
struct Accumulation {
  Eigen::VectorXd score;
  Eigen::MatrixXd information;
  double log_likelihood = 0.0;
};

// Row-by-row reference implementation.
Accumulation accumulate_serial(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& theta);

// OpenMP over fixed-size row chunks; chunk partials are summed in chunk
// order, so the result does not depend on the thread count.
Accumulation accumulate_parallel(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& theta, std::size_t chunk_rows = 4096);

}  // namespace kernels

}  // namespace kgap::glmfit
