#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <set>

#include "kgap/error.hpp"
#include "kgap/glmfit.hpp"

namespace kgap::glmfit {

std::string_view to_string(Target t) {
  switch (t) {
    case Target::success: return "success";
    case Target::hallucination: return "hallucination";
    case Target::label: return "label";
  }
  return "success";
}

Target parse_target(std::string_view text) {
  if (text == "success") return Target::success;
  if (text == "hallucination") return Target::hallucination;
  if (text == "label") return Target::label;
  throw ConfigError(fmt::format("unknown regression target '{}'", text));
}

namespace {

std::optional<long long> as_integer(const std::string& s) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// Integer-valued levels (years) sort numerically, anything else lexically.
std::vector<std::string> sorted_levels(const std::set<std::string>& levels) {
  std::vector<std::string> out(levels.begin(), levels.end());
  const bool numeric = std::all_of(out.begin(), out.end(),
                                    [](const std::string& s) { return as_integer(s).has_value(); });
  if (numeric) {
    std::sort(out.begin(), out.end(), [](const std::string& a, const std::string& b) {
      return *as_integer(a) < *as_integer(b);
    });
  }
  return out;
}

double response_value(int code, Target target, std::size_t row) {
  switch (target) {
    case Target::success: return code == 2 ? 1.0 : 0.0;
    case Target::hallucination: return code == 1 ? 1.0 : 0.0;
    case Target::label:
      if (code != 0 && code != 1) {
        throw AnalysisError(fmt::format("row {}: label response must be 0 or 1, got {}", row, code));
      }
      return static_cast<double>(code);
  }
  return 0.0;
}

void check_response(const Eigen::VectorXd& y) {
  const double ones = y.sum();
  if (ones == 0.0 || ones == static_cast<double>(y.size())) {
    throw AnalysisError(fmt::format("degenerate response: all {} rows are {}", y.size(),
                                    ones == 0.0 ? 0 : 1));
  }
}

void check_columns(const DesignMatrix& d) {
  for (Eigen::Index j = 1; j < d.x.cols(); ++j) {
    const auto col = d.x.col(j);
    if ((col.array() == col(0)).all()) {
      throw AnalysisError(fmt::format("column '{}' is constant", d.column_names[j]));
    }
  }
}

}  // namespace

DesignMatrix build_design(const Frame& frame, const RegressionSpec& spec) {
  if (spec.covariate_names.empty() && spec.fixed_effects.empty()) {
    throw ConfigError("regression needs at least one covariate or fixed effect");
  }
  const std::size_t n_in = frame.rows();

  auto find_cov = [&](const std::string& name) -> const std::vector<std::optional<double>>& {
    for (const auto& [n, v] : frame.covariates) {
      if (n == name) {
        if (v.size() != n_in) throw AnalysisError("covariate '" + name + "' has wrong length");
        return v;
      }
    }
    throw ConfigError("covariate '" + name + "' is not in the data");
  };
  auto find_factor = [&](const std::string& name)
      -> const std::vector<std::optional<std::string>>& {
    for (const auto& [n, v] : frame.factors) {
      if (n == name) {
        if (v.size() != n_in) throw AnalysisError("factor '" + name + "' has wrong length");
        return v;
      }
    }
    throw ConfigError("factor '" + name + "' is not in the data");
  };

  std::vector<const std::vector<std::optional<double>>*> covs;
  for (const auto& name : spec.covariate_names) covs.push_back(&find_cov(name));
  std::vector<const std::vector<std::optional<std::string>>*> facs;
  for (const auto& name : spec.fixed_effects) facs.push_back(&find_factor(name));

  // Listwise deletion.
  std::vector<std::size_t> keep;
  keep.reserve(n_in);
  for (std::size_t i = 0; i < n_in; ++i) {
    bool complete = true;
    for (const auto* c : covs) complete = complete && (*c)[i].has_value();
    for (const auto* f : facs) complete = complete && (*f)[i].has_value();
    if (complete) keep.push_back(i);
  }

  DesignMatrix d;
  d.dropped_rows = n_in - keep.size();
  d.covariate_names = spec.covariate_names;

  for (std::size_t k = 0; k < facs.size(); ++k) {
    const auto& name = spec.fixed_effects[k];
    std::set<std::string> observed;
    for (auto i : keep) observed.insert(*(*facs[k])[i]);
    if (observed.size() < 2) {
      throw AnalysisError(fmt::format("factor '{}' has a single level", name));
    }
    auto levels = sorted_levels(observed);
    FactorCoding coding{name, levels.front(), {}};
    if (const auto it = spec.reference_levels.find(name); it != spec.reference_levels.end()) {
      if (!observed.contains(it->second)) {
        throw ConfigError(fmt::format("reference level '{}' is not an observed level of '{}'",
                                      it->second, name));
      }
      coding.reference = it->second;
    }
    for (auto& l : levels) {
      if (l != coding.reference) coding.levels.push_back(std::move(l));
    }
    d.factors.push_back(std::move(coding));
  }

  std::size_t p = 1 + covs.size();
  for (const auto& f : d.factors) p += f.levels.size();
  const auto n = static_cast<Eigen::Index>(keep.size());

  d.x = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(p));
  d.response.resize(n);
  d.column_names.reserve(p);
  d.column_names.emplace_back(kIntercept);
  for (const auto& name : spec.covariate_names) d.column_names.push_back(name);
  for (const auto& f : d.factors) {
    for (const auto& l : f.levels) d.column_names.push_back(f.name + "=" + l);
  }

  for (Eigen::Index r = 0; r < n; ++r) {
    const auto i = keep[static_cast<std::size_t>(r)];
    d.response(r) = response_value(frame.response_codes[i], spec.target, i);
    d.x(r, 0) = 1.0;
    Eigen::Index col = 1;
    for (const auto* c : covs) d.x(r, col++) = *(*c)[i];
    for (std::size_t k = 0; k < facs.size(); ++k) {
      const auto& level = *(*facs[k])[i];
      const auto& coding = d.factors[k];
      const auto it = std::find(coding.levels.begin(), coding.levels.end(), level);
      if (it != coding.levels.end()) d.x(r, col + (it - coding.levels.begin())) = 1.0;
      col += static_cast<Eigen::Index>(coding.levels.size());
    }
  }

  if (n == 0) throw AnalysisError("no complete rows for regression");
  check_response(d.response);
  check_columns(d);
  return d;
}

DesignMatrix design_from_columns(
    std::span<const std::pair<std::string, std::vector<double>>> covariates,
    std::span<const double> response) {
  DesignMatrix d;
  const auto n = static_cast<Eigen::Index>(response.size());
  d.x = Eigen::MatrixXd::Ones(n, static_cast<Eigen::Index>(covariates.size() + 1));
  d.response = Eigen::Map<const Eigen::VectorXd>(response.data(), n);
  d.column_names.emplace_back(kIntercept);
  for (std::size_t j = 0; j < covariates.size(); ++j) {
    const auto& [name, values] = covariates[j];
    if (values.size() != response.size()) {
      throw AnalysisError("covariate '" + name + "' has wrong length");
    }
    d.x.col(static_cast<Eigen::Index>(j + 1)) =
        Eigen::Map<const Eigen::VectorXd>(values.data(), n);
    d.column_names.push_back(name);
    d.covariate_names.push_back(name);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (d.response(i) != 0.0 && d.response(i) != 1.0) {
      throw AnalysisError("response must be 0 or 1");
    }
  }
  check_response(d.response);
  check_columns(d);
  return d;
}

}  // namespace kgap::glmfit
