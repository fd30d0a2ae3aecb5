#include <fmt/format.h>

#include "kgap/glmfit.hpp"

namespace kgap::glmfit {

nlohmann::ordered_json to_json(const FitResult& fit) {
  auto table = nlohmann::ordered_json::array();
  for (const auto& c : fit.coefficients) {
    table.push_back({{"name", c.name},
                     {"coef", c.estimate},
                     {"se", c.std_error},
                     {"z", c.z},
                     {"p", c.p_value},
                     {"stars", std::string(symbol(c.stars))}});
  }
  return {{"n", fit.n},
          {"dropped_rows", fit.dropped_rows},
          {"log_likelihood", fit.log_likelihood},
          {"iterations", fit.iterations},
          {"converged", fit.converged},
          {"coefficients", std::move(table)}};
}

nlohmann::ordered_json to_json(std::span<const NamedFit> fits) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& f : fits) {
    auto j = to_json(f.fit);
    nlohmann::ordered_json named{{"label", f.label}};
    for (auto& [k, v] : j.items()) named[k] = v;
    out.push_back(std::move(named));
  }
  return out;
}

namespace {

std::string cell(const Coefficient* c) {
  if (c == nullptr) return "-";
  return fmt::format("{:.4f}{}", c->estimate, symbol(c->stars));
}

// Display width, counting each UTF-8 code point once.
std::size_t width(std::string_view s) {
  std::size_t w = 0;
  for (unsigned char ch : s) w += (ch & 0xC0) != 0x80;
  return w;
}

std::string pad(std::string s, std::size_t w) {
  const auto cur = width(s);
  if (cur < w) s.append(w - cur, ' ');
  return s;
}

}  // namespace

std::string format_table(std::span<const NamedFit> fits, std::string_view covariate) {
  std::size_t label_w = width("Model");
  for (const auto& f : fits) label_w = std::max(label_w, width(f.label));
  constexpr std::size_t kCol = 16;

  std::string out;
  out += pad("Model", label_w + 2) + pad("Constant (α)", kCol) + "Beta (β)\n";
  for (const auto& f : fits) {
    out += pad(f.label, label_w + 2) + pad(cell(f.fit.find(kIntercept)), kCol) +
           cell(f.fit.find(covariate)) + "\n";
  }
  out += "*, †, ‡: p < 0.10, 0.05, 0.01 (two-sided Wald)\n";
  return out;
}

}  // namespace kgap::glmfit
