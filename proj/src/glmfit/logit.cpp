#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "kernels_common.hpp"
#include "kgap/error.hpp"
#include "kgap/glmfit.hpp"

namespace kgap::glmfit {

std::string_view symbol(Stars s) {
  switch (s) {
    case Stars::none: return "";
    case Stars::ten: return "*";
    case Stars::five: return "†";
    case Stars::one: return "‡";
  }
  return "";
}

Stars stars_for(double p_value) {
  if (p_value < 0.01) return Stars::one;
  if (p_value < 0.05) return Stars::five;
  if (p_value < 0.10) return Stars::ten;
  return Stars::none;
}

double normal_cdf(double z) {
  constexpr double kP = 0.2316419;
  constexpr double kB1 = 0.319381530;
  constexpr double kB2 = -0.356563782;
  constexpr double kB3 = 1.781477937;
  constexpr double kB4 = -1.821255978;
  constexpr double kB5 = 1.330274429;

  const double a = std::abs(z);
  const double t = 1.0 / (1.0 + kP * a);
  const double density = std::exp(-0.5 * a * a) / std::sqrt(2.0 * std::numbers::pi);
  const double poly = t * (kB1 + t * (kB2 + t * (kB3 + t * (kB4 + t * kB5))));
  const double upper = density * poly;
  return z >= 0.0 ? 1.0 - upper : upper;
}

double wald_pvalue(double z) {
  if (std::isnan(z)) return 1.0;
  // 2 * upper tail, evaluated directly to keep precision for large |z|.
  const double upper = normal_cdf(-std::abs(z));
  return std::clamp(2.0 * upper, 0.0, 1.0);
}

const Coefficient* FitResult::find(std::string_view name) const {
  for (const auto& c : coefficients) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

const Coefficient& FitResult::at(std::string_view name) const {
  if (const auto* c = find(name)) return *c;
  throw AnalysisError(fmt::format("fit has no coefficient '{}'", name));
}

Eigen::VectorXd FitResult::estimates() const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(coefficients.size()));
  for (std::size_t j = 0; j < coefficients.size(); ++j) {
    v(static_cast<Eigen::Index>(j)) = coefficients[j].estimate;
  }
  return v;
}

namespace {

kernels::Accumulation accumulate(const DesignMatrix& d, const Eigen::VectorXd& theta,
                                 Kernel kernel) {
  return kernel == Kernel::parallel ? kernels::accumulate_parallel(d.x, d.response, theta)
                                    : kernels::accumulate_serial(d.x, d.response, theta);
}

// Names the columns that are linear combinations of earlier ones.
void check_rank(const DesignMatrix& d) {
  // Scale columns so the rank threshold is not fooled by units.
  Eigen::MatrixXd scaled = d.x;
  for (Eigen::Index j = 0; j < scaled.cols(); ++j) {
    const double norm = scaled.col(j).norm();
    if (norm > 0.0) scaled.col(j) /= norm;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
  qr.setThreshold(1e-10);
  const auto rank = qr.rank();
  if (rank == scaled.cols()) return;

  std::vector<std::string> names;
  const auto& perm = qr.colsPermutation().indices();
  for (Eigen::Index k = rank; k < scaled.cols(); ++k) {
    names.push_back(d.column_names[static_cast<std::size_t>(perm(k))]);
  }
  std::sort(names.begin(), names.end());
  throw RankError(fmt::format("design matrix is rank deficient ({} of {} columns); collinear: {}",
                              rank, scaled.cols(), fmt::join(names, ", ")));
}

}  // namespace

FitResult fit_logit(const DesignMatrix& design, const FitOptions& options) {
  if (options.max_iter < 1) throw ConfigError("max_iter must be >= 1");
  if (!(options.tolerance > 0.0)) throw ConfigError("tolerance must be > 0");
  if (design.n() == 0) throw AnalysisError("empty design matrix");
  check_rank(design);

  const auto p = static_cast<Eigen::Index>(design.columns());
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
  auto acc = accumulate(design, theta, options.kernel);

  FitResult fit;
  Eigen::LDLT<Eigen::MatrixXd> ldlt;
  for (;;) {
    ldlt.compute(acc.information);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all()) {
      throw SeparationError(
          "information matrix is not positive definite; fitted probabilities are 0 or 1");
    }
    const Eigen::VectorXd step = ldlt.solve(acc.score);
    const double score_norm = acc.score.cwiseAbs().maxCoeff();
    const double step_norm = step.cwiseAbs().maxCoeff();
    fit.score_max_norm = score_norm;

    if (score_norm <= options.tolerance && step_norm <= options.step_tolerance) {
      fit.converged = true;
      break;
    }
    if (fit.iterations >= options.max_iter) break;

    // Step halving keeps the log-likelihood from decreasing, up to the
    // rounding noise of an n-term sum.
    const double slack = 4.0 * std::sqrt(static_cast<double>(design.n())) *
                         std::numeric_limits<double>::epsilon() *
                         (std::abs(acc.log_likelihood) + 1.0);
    double scale = 1.0;
    bool accepted = false;
    Eigen::VectorXd candidate;
    kernels::Accumulation next;
    for (int halving = 0; halving < 40; ++halving, scale *= 0.5) {
      candidate = theta + scale * step;
      next = accumulate(design, candidate, options.kernel);
      if (next.log_likelihood >= acc.log_likelihood - slack) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // No ascent direction left at machine precision.
      fit.converged = score_norm <= options.tolerance;
      break;
    }
    theta = std::move(candidate);
    acc = std::move(next);
    ++fit.iterations;

    Eigen::Index worst = 0;
    if (theta.cwiseAbs().maxCoeff(&worst) > options.divergence_bound) {
      throw SeparationError(fmt::format(
          "separation: coefficient '{}' diverges (|{:.3g}| > {}) after {} iterations",
          design.column_names[static_cast<std::size_t>(worst)], theta(worst),
          options.divergence_bound, fit.iterations));
    }
  }

  const Eigen::MatrixXd covariance =
      ldlt.solve(Eigen::MatrixXd::Identity(p, p));

  fit.log_likelihood = acc.log_likelihood;
  fit.n = design.n();
  fit.dropped_rows = design.dropped_rows;
  fit.covariate_names = design.covariate_names;
  fit.factors = design.factors;
  fit.coefficients.reserve(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) {
    Coefficient c;
    c.name = design.column_names[static_cast<std::size_t>(j)];
    c.estimate = theta(j);
    c.std_error = std::sqrt(covariance(j, j));
    c.z = c.estimate / c.std_error;
    c.p_value = wald_pvalue(c.z);
    c.stars = stars_for(c.p_value);
    fit.coefficients.push_back(std::move(c));
  }
  return fit;
}

double predict(const FitResult& fit, const PredictRow& row) {
  double eta = 0.0;
  std::size_t j = 0;
  auto coef = [&](std::size_t k) { return fit.coefficients.at(k).estimate; };

  eta += coef(j++);  // intercept
  for (const auto& name : fit.covariate_names) {
    const auto it = row.covariates.find(name);
    if (it == row.covariates.end()) {
      throw LevelError(fmt::format("prediction row lacks covariate '{}'", name));
    }
    eta += coef(j++) * it->second;
  }
  for (const auto& f : fit.factors) {
    const auto it = row.factors.find(f.name);
    if (it == row.factors.end()) {
      throw LevelError(fmt::format("prediction row lacks factor '{}'", f.name));
    }
    const auto pos = std::find(f.levels.begin(), f.levels.end(), it->second);
    if (pos != f.levels.end()) {
      eta += coef(j + static_cast<std::size_t>(pos - f.levels.begin()));
    } else if (it->second != f.reference) {
      throw LevelError(
          fmt::format("level '{}' of factor '{}' was not seen at fit time", it->second, f.name));
    }
    j += f.levels.size();
  }
  return kernels::detail::sigmoid(eta);
}

Eigen::VectorXd fitted_probabilities(const FitResult& fit, const DesignMatrix& design) {
  const Eigen::VectorXd eta = design.x * fit.estimates();
  return eta.unaryExpr([](double e) { return kernels::detail::sigmoid(e); });
}

}  // namespace kgap::glmfit
