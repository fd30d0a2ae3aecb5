#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "kgap/glmfit.hpp"
#include "kgap/ingest.hpp"
#include "kgap/llmgate.hpp"
#include "kgap/outcome.hpp"
#include "kgap/promptgen.hpp"

// Glue between stage files: joins prompts back to facts and outcomes to
// covariates.
namespace kgap::stages {

// prompt_id -> truth; every prompt must resolve to a fact.
outcome::TruthIndex truth_index(std::span<const promptgen::PromptRecord> prompts,
                                std::span<const ingest::FactRecord> facts);

// Text category per (entity_id, year), e.g. a team's league.
using CategoryIndex = std::map<std::pair<std::string, int>, std::string>;
using NamedCategories = std::map<std::string, CategoryIndex>;

// Regression input from outcomes. Each covariate is looked up by
// (entity_id, year). A fixed effect named "year" uses the outcome year, one
// found in `categories` uses that label, and any other reads the covariate
// of that name as a category label.
glmfit::Frame outcome_frame(std::span<const outcome::Outcome> outcomes,
                            std::span<const ingest::CovariateValue> covariates,
                            std::span<const std::string> covariate_names,
                            std::span<const std::string> fixed_effects,
                            const NamedCategories& categories = {});

// Facts paired with the size bucket of `covariate` (log10 market cap).
// Facts without the covariate are skipped; `skipped` receives the count.
std::vector<promptgen::StratifiedInput> bucket_inputs(
    std::span<const ingest::FactRecord> facts, std::span<const ingest::CovariateValue> covariates,
    const std::string& covariate, std::size_t* skipped = nullptr);

// Registers every prompt with a mock transport; prompts whose fact lacks the
// profile covariate get covariate 0.
void register_mock_prompts(llmgate::MockTransport& mock,
                           std::span<const promptgen::PromptRecord> prompts,
                           std::span<const ingest::FactRecord> facts,
                           std::span<const ingest::CovariateValue> covariates,
                           const std::string& covariate);

}  // namespace kgap::stages
