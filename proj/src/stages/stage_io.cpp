#include <fmt/format.h>

#include <map>

#include "kgap/error.hpp"
#include "kgap/stages.hpp"

namespace kgap::stages {

namespace {

using Key = std::pair<std::string, int>;

std::map<Key, const ingest::FactRecord*> fact_index(std::span<const ingest::FactRecord> facts) {
  std::map<Key, const ingest::FactRecord*> index;
  for (const auto& f : facts) index.emplace(Key{f.entity_id, f.year}, &f);
  return index;
}

std::string level_label(double v) { return fmt::format("{}", v); }

}  // namespace

outcome::TruthIndex truth_index(std::span<const promptgen::PromptRecord> prompts,
                                std::span<const ingest::FactRecord> facts) {
  const auto index = fact_index(facts);
  outcome::TruthIndex out;
  for (const auto& p : prompts) {
    const auto it = index.find({p.entity_id, p.year});
    if (it == index.end()) {
      throw DataError(fmt::format("prompt {} refers to unknown fact ({}, {})", p.prompt_id,
                                  p.entity_id, p.year));
    }
    out.emplace(p.prompt_id, outcome::Truth{p.entity_id, p.year, it->second->value});
  }
  return out;
}

glmfit::Frame outcome_frame(std::span<const outcome::Outcome> outcomes,
                            std::span<const ingest::CovariateValue> covariates,
                            std::span<const std::string> covariate_names,
                            std::span<const std::string> fixed_effects,
                            const NamedCategories& categories) {
  glmfit::Frame frame;
  frame.response_codes.reserve(outcomes.size());
  for (const auto& o : outcomes) frame.response_codes.push_back(static_cast<int>(o.y));

  for (const auto& name : covariate_names) {
    const auto index = ingest::index_covariate(covariates, name);
    std::vector<std::optional<double>> col;
    col.reserve(outcomes.size());
    for (const auto& o : outcomes) {
      const auto it = index.find({o.entity_id, o.year});
      col.push_back(it == index.end() ? std::nullopt : std::optional<double>(it->second));
    }
    frame.covariates.emplace_back(name, std::move(col));
  }

  for (const auto& name : fixed_effects) {
    std::vector<std::optional<std::string>> col;
    col.reserve(outcomes.size());
    if (name == "year") {
      for (const auto& o : outcomes) col.emplace_back(std::to_string(o.year));
    } else if (const auto cat = categories.find(name); cat != categories.end()) {
      for (const auto& o : outcomes) {
        const auto it = cat->second.find({o.entity_id, o.year});
        col.push_back(it == cat->second.end() ? std::nullopt
                                              : std::optional<std::string>(it->second));
      }
    } else {
      const auto index = ingest::index_covariate(covariates, name);
      for (const auto& o : outcomes) {
        const auto it = index.find({o.entity_id, o.year});
        col.push_back(it == index.end() ? std::nullopt
                                        : std::optional<std::string>(level_label(it->second)));
      }
    }
    frame.factors.emplace_back(name, std::move(col));
  }
  return frame;
}

std::vector<promptgen::StratifiedInput> bucket_inputs(
    std::span<const ingest::FactRecord> facts, std::span<const ingest::CovariateValue> covariates,
    const std::string& covariate, std::size_t* skipped) {
  const auto joined = ingest::join_covariates(facts, covariates, covariate);
  std::vector<promptgen::StratifiedInput> out;
  out.reserve(joined.rows.size());
  for (const auto& row : joined.rows) {
    out.push_back({row.fact, std::string(ingest::bucketize_logmcap(row.covariate))});
  }
  if (skipped) *skipped = joined.dropped;
  return out;
}

void register_mock_prompts(llmgate::MockTransport& mock,
                           std::span<const promptgen::PromptRecord> prompts,
                           std::span<const ingest::FactRecord> facts,
                           std::span<const ingest::CovariateValue> covariates,
                           const std::string& covariate) {
  const auto index = fact_index(facts);
  const auto cov = ingest::index_covariate(covariates, covariate);
  for (const auto& p : prompts) {
    const auto it = index.find({p.entity_id, p.year});
    if (it == index.end()) {
      throw DataError(fmt::format("prompt {} refers to unknown fact ({}, {})", p.prompt_id,
                                  p.entity_id, p.year));
    }
    const auto c = cov.find({p.entity_id, p.year});
    mock.add_prompt(p, *it->second, c == cov.end() ? 0.0 : c->second);
  }
}

}  // namespace kgap::stages
