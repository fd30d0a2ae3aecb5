#include "kgap/outcome.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>

#include "kgap/common/csv.hpp"
#include "kgap/error.hpp"

namespace kgap::outcome {

Outcome classify(double truth, std::optional<double> answer, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw DomainError(fmt::format("threshold {} outside (0, 1)", threshold));
  }
  if (!std::isfinite(truth)) throw DomainError("ground truth must be finite");

  Outcome o;
  o.truth = truth;
  o.answer = answer;
  o.threshold = threshold;
  if (!answer) {
    o.y = Label::no_answer;
    return o;
  }
  double rel = 0.0;
  if (truth == 0.0) {
    o.degenerate_truth = *answer != 0.0;
    rel = o.degenerate_truth ? std::numeric_limits<double>::infinity() : 0.0;
  } else {
    rel = std::abs(*answer - truth) / std::abs(truth);
  }
  o.pct_error = 100.0 * rel;
  o.y = rel < threshold ? Label::success : Label::hallucination;
  return o;
}

BatchOutcome classify_batch(const TruthIndex& truths,
                            std::span<const extract::ExtractedAnswer> answers, double threshold) {
  BatchOutcome out;
  out.outcomes.reserve(answers.size());
  for (const auto& a : answers) {
    const auto it = truths.find(a.prompt_id);
    if (it == truths.end()) {
      out.errors.push_back({a.prompt_id, "prompt_id does not resolve to a fact"});
      continue;
    }
    auto o = classify(it->second.value, a.value, threshold);
    o.prompt_id = a.prompt_id;
    o.entity_id = it->second.entity_id;
    o.year = it->second.year;
    out.outcomes.push_back(std::move(o));
  }
  return out;
}

namespace {

std::string num(double v) { return fmt::format("{}", v); }

double parse_double(const std::string& s, std::size_t line, std::string_view column) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw DataError(fmt::format("outcomes line {}, column '{}': not a number '{}'", line, column, s));
  }
  return v;
}

}  // namespace

void write_outcomes(const std::filesystem::path& path, std::span<const Outcome> outcomes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  csv::write_row(out, {"prompt_id", "entity_id", "year", "truth", "answer", "pct_error", "y",
                       "threshold"});
  for (const auto& o : outcomes) {
    csv::write_row(out, {o.prompt_id, o.entity_id, std::to_string(o.year), num(o.truth),
                         o.answer ? num(*o.answer) : "", o.pct_error ? num(*o.pct_error) : "",
                         std::to_string(static_cast<int>(o.y)), num(o.threshold)});
  }
}

std::vector<Outcome> read_outcomes(const std::filesystem::path& path) {
  const auto table = csv::read_file(path);
  std::vector<Outcome> out;
  if (table.header.empty()) return out;
  const std::vector<std::string> cols{"prompt_id", "entity_id", "year", "truth",
                                      "answer",    "pct_error", "y",    "threshold"};
  std::vector<std::size_t> idx;
  for (const auto& c : cols) {
    const auto i = table.column(c);
    if (i == std::string::npos) throw DataError("outcomes file lacks column " + c);
    idx.push_back(i);
  }
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto line = table.line_numbers[r];
    auto get = [&](std::size_t k) -> const std::string& {
      if (idx[k] >= row.size()) {
        throw DataError(fmt::format("outcomes line {}: missing field {}", line, cols[k]));
      }
      return row[idx[k]];
    };
    Outcome o;
    o.prompt_id = get(0);
    o.entity_id = get(1);
    o.year = static_cast<int>(parse_double(get(2), line, "year"));
    o.truth = parse_double(get(3), line, "truth");
    if (!get(4).empty()) o.answer = parse_double(get(4), line, "answer");
    if (!get(5).empty()) o.pct_error = parse_double(get(5), line, "pct_error");
    const int y = static_cast<int>(parse_double(get(6), line, "y"));
    if (y < 0 || y > 2) throw DataError(fmt::format("outcomes line {}: y={} invalid", line, y));
    o.y = static_cast<Label>(y);
    o.threshold = parse_double(get(7), line, "threshold");
    o.degenerate_truth = o.truth == 0.0 && o.answer && *o.answer != 0.0;
    out.push_back(std::move(o));
  }
  return out;
}

}  // namespace kgap::outcome
