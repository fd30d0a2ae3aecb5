#include "kgap/analytics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kgap/error.hpp"

namespace kgap::analytics {

using outcome::Label;
using outcome::Outcome;

std::vector<YearlyRates> rates_by_year(std::span<const Outcome> outcomes,
                                       HallucinationDenominator denominator) {
  struct Counts {
    std::size_t n = 0, success = 0, hallucination = 0, no_answer = 0;
    double threshold = outcome::kDefaultThreshold;
  };
  std::map<int, Counts> by_year;
  for (const auto& o : outcomes) {
    auto& c = by_year[o.year];
    ++c.n;
    c.threshold = o.threshold;
    switch (o.y) {
      case Label::success: ++c.success; break;
      case Label::hallucination: ++c.hallucination; break;
      case Label::no_answer: ++c.no_answer; break;
    }
  }

  std::vector<YearlyRates> out;
  out.reserve(by_year.size());
  for (const auto& [year, c] : by_year) {
    YearlyRates r;
    r.year = year;
    r.n = c.n;
    r.threshold = c.threshold;
    r.success_rate = static_cast<double>(c.success) / static_cast<double>(c.n);
    r.stderr_success = std::sqrt(r.success_rate * (1.0 - r.success_rate) / static_cast<double>(c.n));
    const std::size_t failures = c.hallucination + c.no_answer;
    r.no_failures = failures == 0;
    const std::size_t denom =
        denominator == HallucinationDenominator::failures ? failures : c.n;
    r.hallucination_rate =
        denom == 0 ? 0.0 : static_cast<double>(c.hallucination) / static_cast<double>(denom);
    out.push_back(r);
  }
  return out;
}

std::vector<EntityTally> tally_entities(std::span<const Outcome> outcomes,
                                        const ingest::CovariateIndex* covariate) {
  struct Acc {
    std::size_t correct = 0, hallucinated = 0, with_cov = 0;
    double cov_sum = 0.0;
  };
  std::map<std::string, Acc> by_entity;
  for (const auto& o : outcomes) {
    auto& a = by_entity[o.entity_id];
    if (o.y == Label::success) ++a.correct;
    if (o.y == Label::hallucination) ++a.hallucinated;
    if (covariate) {
      if (const auto it = covariate->find({o.entity_id, o.year}); it != covariate->end()) {
        a.cov_sum += it->second;
        ++a.with_cov;
      }
    }
  }
  std::vector<EntityTally> out;
  out.reserve(by_entity.size());
  for (const auto& [id, a] : by_entity) {
    EntityTally t{id, a.correct, a.hallucinated, std::nullopt};
    if (a.with_cov > 0) t.mean_covariate = a.cov_sum / static_cast<double>(a.with_cov);
    out.push_back(std::move(t));
  }
  return out;
}

std::map<double, std::vector<YearlyRates>> threshold_sweep(std::span<const Outcome> outcomes,
                                                           std::span<const double> thresholds,
                                                           HallucinationDenominator denominator) {
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > 0.0 && thresholds[i] < 1.0)) {
      throw ConfigError(fmt::format("threshold {} outside (0, 1)", thresholds[i]));
    }
    if (i > 0 && !(thresholds[i] > thresholds[i - 1])) {
      throw ConfigError("thresholds must be strictly increasing");
    }
  }
  std::map<double, std::vector<YearlyRates>> out;
  std::vector<Outcome> reclassified(outcomes.size());
  for (double t : thresholds) {
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      const auto& src = outcomes[i];
      auto o = outcome::classify(src.truth, src.answer, t);
      o.prompt_id = src.prompt_id;
      o.entity_id = src.entity_id;
      o.year = src.year;
      reclassified[i] = std::move(o);
    }
    out.emplace(t, rates_by_year(reclassified, denominator));
  }
  return out;
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw DomainError("quantile of empty data");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<ErrorSummary> error_distribution(std::span<const Outcome> outcomes) {
  struct Acc {
    std::size_t n = 0, answered = 0, infinite = 0;
    std::vector<double> errors;
  };
  std::map<int, Acc> by_year;
  for (const auto& o : outcomes) {
    auto& a = by_year[o.year];
    ++a.n;
    if (o.y == Label::no_answer) continue;
    ++a.answered;
    if (o.pct_error && std::isfinite(*o.pct_error)) {
      a.errors.push_back(*o.pct_error);
    } else {
      ++a.infinite;
    }
  }

  std::vector<ErrorSummary> out;
  for (auto& [year, a] : by_year) {
    ErrorSummary s;
    s.year = year;
    s.n = a.n;
    s.answered = a.answered;
    s.answer_rate = static_cast<double>(a.answered) / static_cast<double>(a.n);
    s.outlier_count = a.infinite;
    if (!a.errors.empty()) {
      std::sort(a.errors.begin(), a.errors.end());
      s.empty = false;
      s.q1 = quantile_sorted(a.errors, 0.25);
      s.median = quantile_sorted(a.errors, 0.5);
      s.q3 = quantile_sorted(a.errors, 0.75);
      const double iqr = s.q3 - s.q1;
      const double lo_fence = s.q1 - 1.5 * iqr;
      const double hi_fence = s.q3 + 1.5 * iqr;
      s.lower_whisker = s.q1;
      s.upper_whisker = s.q3;
      for (double e : a.errors) {
        if (e < lo_fence || e > hi_fence) {
          ++s.outlier_count;
        } else {
          s.lower_whisker = std::min(s.lower_whisker, e);
          s.upper_whisker = std::max(s.upper_whisker, e);
        }
      }
    }
    out.push_back(s);
  }
  return out;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw DomainError("spearman needs two equal-length samples of size >= 2");
  }
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw DomainError("spearman of a constant sample");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace kgap::analytics
