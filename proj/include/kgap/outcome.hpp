#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "kgap/extract.hpp"
#include "kgap/ingest.hpp"

namespace kgap::outcome {

// Ternary outcome of one answer.
enum class Label : int { no_answer = 0, hallucination = 1, success = 2 };

inline constexpr double kDefaultThreshold = 0.10;

struct Outcome {
  std::string prompt_id;
  std::string entity_id;
  int year = 0;
  double truth = 0.0;
  std::optional<double> answer;
  // Percent (0-100 scale). +inf when truth == 0 and the answer is not 0;
  // degenerate_truth marks that case.
  std::optional<double> pct_error;
  Label y = Label::no_answer;
  double threshold = kDefaultThreshold;
  bool degenerate_truth = false;
};

// Relative error r = |answer - truth| / |truth|, reported as pct_error = 100 r.
// Success iff r < threshold; hallucination iff r >= threshold; no_answer iff
// no answer.
// Throws DomainError for a threshold outside (0, 1) or a non-finite truth.
Outcome classify(double truth, std::optional<double> answer, double threshold);

struct Truth {
  std::string entity_id;
  int year = 0;
  double value = 0.0;
};

// prompt_id -> ground truth.
using TruthIndex = std::unordered_map<std::string, Truth>;

struct ClassifyError {
  std::string prompt_id;
  std::string message;
};

struct BatchOutcome {
  std::vector<Outcome> outcomes;
  std::vector<ClassifyError> errors;
};

// One outcome per resolvable answer, in answer order; unresolvable
// prompt_ids are returned as errors.
BatchOutcome classify_batch(const TruthIndex& truths,
                            std::span<const extract::ExtractedAnswer> answers, double threshold);

void write_outcomes(const std::filesystem::path& path, std::span<const Outcome> outcomes);
std::vector<Outcome> read_outcomes(const std::filesystem::path& path);

}  // namespace kgap::outcome
