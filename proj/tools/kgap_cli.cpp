// kgap: staged pipeline for auditing what a chat model knows about numeric facts.
//
//   gen -> query -> extract -> classify -> temporal / regress / report
//
// plus the multi-turn recommendation study (reco) and the soccer study
// (soccer), which run their stages end to end.

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "kgap/analytics.hpp"
#include "kgap/common/csv.hpp"
#include "kgap/error.hpp"
#include "kgap/extract.hpp"
#include "kgap/glmfit.hpp"
#include "kgap/ingest.hpp"
#include "kgap/llmgate.hpp"
#include "kgap/outcome.hpp"
#include "kgap/promptgen.hpp"
#include "kgap/stages.hpp"

namespace fs = std::filesystem;
using namespace kgap;

namespace {

struct Globals {
  std::string config;
  bool dry_run = false;
};

// --- config file -----------------------------------------------------------

std::string option_flag(const std::string& key) {
  std::string flag = "--" + key;
  std::replace(flag.begin(), flag.end(), '_', '-');
  return flag;
}

std::string json_scalar(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  throw ConfigError("config values must be strings, numbers, booleans or lists of those");
}

nlohmann::json load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path);
  try {
    auto j = nlohmann::json::parse(in);
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("config {}: {}", path, e.what()));
  }
}

// Every key must name an option of some subcommand, or be a subcommand
// section whose keys are options of that subcommand.
void validate_config(const CLI::App& app, const nlohmann::json& cfg) {
  const auto subs = app.get_subcommands({});
  auto known_anywhere = [&](const std::string& flag) {
    return std::any_of(subs.begin(), subs.end(), [&](const CLI::App* s) {
      return s->get_option_no_throw(flag) != nullptr;
    });
  };
  for (const auto& [key, value] : cfg.items()) {
    if (key == "config" || key == "dry_run") continue;
    if (const auto* sub = app.get_subcommand_no_throw(key); sub != nullptr && value.is_object()) {
      for (const auto& [k, v] : value.items()) {
        if (sub->get_option_no_throw(option_flag(k)) == nullptr) {
          throw ConfigError(fmt::format("config: '{}' is not an option of '{}'", k, key));
        }
      }
      continue;
    }
    if (!known_anywhere(option_flag(key))) throw ConfigError("config: unknown key '" + key + "'");
  }
}

// Fills options not given on the command line from the config: top-level
// keys first, then the subcommand's own section.
void apply_config(CLI::App& sub, const nlohmann::json& cfg) {
  nlohmann::json merged = nlohmann::json::object();
  for (const auto& [k, v] : cfg.items()) {
    if (!v.is_object()) merged[k] = v;
  }
  if (cfg.contains(sub.get_name()) && cfg[sub.get_name()].is_object()) {
    for (const auto& [k, v] : cfg[sub.get_name()].items()) merged[k] = v;
  }
  for (const auto& [key, value] : merged.items()) {
    auto* opt = sub.get_option_no_throw(option_flag(key));
    if (opt == nullptr || opt->count() > 0) continue;
    try {
      if (value.is_array()) {
        for (const auto& v : value) opt->add_result(json_scalar(v));
      } else {
        opt->add_result(json_scalar(value));
      }
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw ConfigError(fmt::format("config key '{}': {}", key, e.what()));
    }
  }
}

void need(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(fmt::format("{} is required", flag));
}

std::pair<int, int> parse_range(const std::string& text) {
  const auto colon = text.find(':');
  try {
    if (colon == std::string::npos) throw std::invalid_argument(text);
    std::size_t used = 0;
    const int a = std::stoi(text.substr(0, colon), &used);
    const auto rest = text.substr(colon + 1);
    std::size_t used_b = 0;
    const int b = std::stoi(rest, &used_b);
    if (used != colon || used_b != rest.size() || a > b) throw std::invalid_argument(text);
    return {a, b};
  } catch (const std::exception&) {
    throw ConfigError("--range must look like FIRST:LAST with FIRST <= LAST, got '" + text + "'");
  }
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

// Text columns of a CSV keyed by (entity_id, year), e.g. a team's league.
stages::NamedCategories load_categories(const fs::path& path, std::span<const std::string> only) {
  const auto t = csv::read_file(path);
  const auto id = t.column("entity_id");
  const auto yr = t.column("year");
  if (id == std::string::npos || yr == std::string::npos) {
    throw DataError(path.string() + ": needs entity_id and year columns");
  }
  stages::NamedCategories out;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    const auto& name = t.header[c];
    if (c == id || c == yr) continue;
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    auto& index = out[name];
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const auto& row = t.rows[r];
      if (c >= row.size() || row[c].empty()) continue;
      int year = 0;
      try {
        year = std::stoi(row[yr]);
      } catch (const std::exception&) {
        throw DataError(fmt::format("{}: line {}: bad year '{}'", path.string(), t.line_numbers[r], row[yr]));
      }
      index[{row[id], year}] = row[c];
    }
  }
  return out;
}

// --- shared query options ----------------------------------------------------

struct QueryOptions {
  std::string model;
  std::string endpoint;
  double temperature = 0.0;
  int max_tokens = 100;
  std::string api_key_env = "LLM_API_KEY";
  std::string cache;
  std::size_t parallelism = 4;
  int timeout = 120;
  std::string mock;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--model", model, "Model name sent with each request");
    cmd->add_option("--endpoint", endpoint, "Chat-completions URL");
    cmd->add_option("--temperature", temperature, "Sampling temperature")->capture_default_str();
    cmd->add_option("--max-tokens", max_tokens, "Completion token cap")->capture_default_str();
    cmd->add_option("--api-key-env", api_key_env,
                    "Environment variable holding the API key (empty: no auth)")
        ->capture_default_str();
    cmd->add_option("--cache", cache, "Response cache (JSONL); makes reruns resumable");
    cmd->add_option("--parallelism", parallelism, "Requests in flight")->capture_default_str();
    cmd->add_option("--timeout", timeout, "HTTP timeout in seconds")->capture_default_str();
    cmd->add_option("--mock", mock, "Answer offline from an oracle profile (JSON)");
  }

  bool mocked() const { return !mock.empty(); }

  llmgate::OracleProfile profile() const {
    std::ifstream in(mock, std::ios::binary);
    if (!in) throw ConfigError("cannot open mock profile " + mock);
    try {
      return llmgate::profile_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(fmt::format("mock profile {}: {}", mock, e.what()));
    }
  }

  llmgate::QueryParams params() const {
    llmgate::QueryParams p;
    p.model = model;
    p.endpoint = endpoint;
    p.temperature = temperature;
    p.max_tokens = max_tokens;
    p.api_key_env = api_key_env;
    if (mocked()) {
      if (p.model.empty()) p.model = std::string(llmgate::kMockModel);
      if (p.endpoint.empty()) p.endpoint = "mock://local";
      p.api_key_env.clear();
    }
    p.validate();
    return p;
  }
};

struct Client {
  std::unique_ptr<llmgate::ResponseCache> cache;
  std::unique_ptr<llmgate::ChatClient> chat;
};

Client make_client(const QueryOptions& q, std::shared_ptr<llmgate::Transport> transport) {
  Client c;
  if (!q.cache.empty()) c.cache = std::make_unique<llmgate::ResponseCache>(q.cache);
  c.chat = std::make_unique<llmgate::ChatClient>(q.params(), std::move(transport), c.cache.get());
  return c;
}

std::shared_ptr<llmgate::Transport> http_transport(const QueryOptions& q) {
  return std::make_shared<llmgate::HttpTransport>(std::chrono::seconds(q.timeout));
}

struct QueryOutcome {
  std::vector<llmgate::ModelResponse> responses;
  std::size_t failed = 0;
};

QueryOutcome collect(std::vector<llmgate::BatchResult> results, bool mocked) {
  QueryOutcome out;
  for (auto& r : results) {
    if (!r.ok()) {
      ++out.failed;
      std::cerr << fmt::format("query failed for {}: {}\n", r.prompt_id, r.error);
      continue;
    }
    auto resp = std::move(*r.response);
    // Offline runs carry a fixed timestamp so their outputs are reproducible.
    if (mocked) resp.timestamp = std::string(llmgate::kMockTimestamp);
    out.responses.push_back(std::move(resp));
  }
  return out;
}

// --- gen -----------------------------------------------------------------------

struct GenOptions {
  std::string facts;
  std::string covariates;
  std::string covariate = "mcap_log10";
  std::string template_id = "revenue";
  std::string sample = "full";
  std::size_t per_cell = 50;
  std::string range;
  std::uint64_t seed = 0;
  std::string out;
};

// League per (entity_id, year) from a "league" column of the facts file.
promptgen::LeagueLookup league_lookup(const fs::path& facts) {
  const std::vector<std::string> want{"league"};
  auto cats = load_categories(facts, want);
  if (!cats.contains("league")) throw DataError(facts.string() + ": soccer facts need a league column");
  auto index = std::make_shared<stages::CategoryIndex>(std::move(cats["league"]));
  return [index](const ingest::FactRecord& f) -> std::optional<std::string> {
    const auto it = index->find({f.entity_id, f.year});
    if (it == index->end()) return std::nullopt;
    return it->second;
  };
}

std::vector<promptgen::PromptRecord> generate(const GenOptions& o) {
  need(o.facts, "--facts");
  const auto facts = ingest::load_facts(o.facts);
  const auto& tmpl = promptgen::builtin_template(o.template_id);

  std::vector<ingest::FactRecord> chosen;
  if (o.sample == "full") {
    chosen = facts;
  } else if (o.sample == "stratified") {
    need(o.covariates, "--covariates (for stratified sampling)");
    const auto covs = ingest::load_covariates(o.covariates);
    std::size_t skipped = 0;
    const auto inputs = stages::bucket_inputs(facts, covs, o.covariate, &skipped);
    if (skipped > 0) {
      std::cerr << fmt::format("{} facts lack covariate '{}' and were not sampled\n", skipped, o.covariate);
    }
    auto s = promptgen::sample_stratified(inputs, o.per_cell, o.seed);
    for (const auto& sf : s.shortfalls) {
      std::cerr << fmt::format("cell ({}, {}) has {} of {} requested records\n", sf.year, sf.bucket,
                               sf.available, sf.requested);
    }
    chosen = std::move(s.records);
  } else if (o.sample == "intersection") {
    need(o.range, "--range");
    const auto [a, b] = parse_range(o.range);
    chosen = promptgen::sample_intersection(facts, a, b);
  } else {
    throw ConfigError("--sample must be full, stratified or intersection");
  }

  promptgen::LeagueLookup league;
  if (o.template_id == "soccer") league = league_lookup(o.facts);
  return promptgen::build_dataset(chosen, tmpl, league);
}

void cmd_gen(const GenOptions& o, const Globals& g) {
  need(o.out, "--out");
  const auto prompts = generate(o);
  if (g.dry_run) {
    std::cout << fmt::format("gen: {} prompts would be written to {}\n", prompts.size(), o.out);
    return;
  }
  ensure_parent(o.out);
  promptgen::write_prompts(o.out, prompts);
  std::cout << fmt::format("gen: wrote {} prompts to {}\n", prompts.size(), o.out);
}

// --- query ---------------------------------------------------------------------

struct QueryCommand {
  std::string prompts;
  std::string facts;
  std::string covariates;
  std::string out;
  QueryOptions q;
};

void cmd_query(const QueryCommand& o, const Globals& g) {
  need(o.prompts, "--prompts");
  need(o.out, "--out");
  const auto prompts = promptgen::read_prompts(o.prompts);
  const auto params = o.q.params();

  std::shared_ptr<llmgate::Transport> transport;
  if (o.q.mocked()) {
    need(o.facts, "--facts (the mock answers from the ground truth)");
    const auto profile = o.q.profile();
    const auto facts = ingest::load_facts(o.facts);
    const auto covs = o.covariates.empty() ? std::vector<ingest::CovariateValue>{}
                                           : ingest::load_covariates(o.covariates);
    auto mock = std::make_shared<llmgate::MockTransport>(profile);
    stages::register_mock_prompts(*mock, prompts, facts, covs, profile.covariate);
    transport = mock;
  } else {
    transport = http_transport(o.q);
  }

  if (g.dry_run) {
    std::size_t cached = 0;
    if (!o.q.cache.empty() && fs::exists(o.q.cache)) {
      const llmgate::ResponseCache cache(o.q.cache);
      for (const auto& p : prompts) {
        cached += cache.find(llmgate::cache_key(params, promptgen::Conversation::single_user(p.text)))
                      .has_value();
      }
    }
    std::cout << fmt::format("query: {} prompts, {} cached, {} to request from {}\n", prompts.size(),
                             cached, prompts.size() - cached, params.endpoint);
    return;
  }

  auto client = make_client(o.q, transport);
  const auto result = collect(client.chat->complete_batch(prompts, o.q.parallelism), o.q.mocked());
  ensure_parent(o.out);
  llmgate::write_responses(o.out, result.responses);
  std::cout << fmt::format("query: wrote {} responses to {}\n", result.responses.size(), o.out);
  if (result.failed > 0) {
    throw TransportError(fmt::format("{} of {} prompts failed; rerun to retry them", result.failed,
                                     prompts.size()));
  }
}

// --- extract ---------------------------------------------------------------------

struct ExtractCommand {
  std::string responses;
  std::string mode = "money";
  std::string out;
};

extract::Mode parse_mode(const std::string& m) {
  if (m == "money") return extract::Mode::money;
  if (m == "points") return extract::Mode::points;
  throw ConfigError("--mode must be money or points");
}

std::vector<extract::ExtractedAnswer> extract_responses(std::span<const llmgate::ModelResponse> rs,
                                                        extract::Mode mode) {
  std::vector<extract::ResponseText> texts;
  texts.reserve(rs.size());
  for (const auto& r : rs) texts.push_back({r.prompt_id, r.raw_text});
  return extract::extract_all(texts, mode);
}

void cmd_extract(const ExtractCommand& o, const Globals& g) {
  need(o.responses, "--responses");
  need(o.out, "--out");
  const auto mode = parse_mode(o.mode);
  const auto answers = extract_responses(llmgate::read_responses(o.responses), mode);
  const auto refusals = static_cast<std::size_t>(
      std::count_if(answers.begin(), answers.end(), [](const auto& a) { return a.refusal; }));
  if (g.dry_run) {
    std::cout << fmt::format("extract: {} answers ({} without a value)\n", answers.size(), refusals);
    return;
  }
  ensure_parent(o.out);
  extract::write_answers(o.out, answers);
  std::cout << fmt::format("extract: wrote {} answers ({} without a value) to {}\n", answers.size(),
                           refusals, o.out);
}

// --- classify --------------------------------------------------------------------

struct ClassifyCommand {
  std::string answers;
  std::string prompts;
  std::string facts;
  double threshold = outcome::kDefaultThreshold;
  std::string out;
};

outcome::BatchOutcome classify_answers(std::span<const promptgen::PromptRecord> prompts,
                                       std::span<const ingest::FactRecord> facts,
                                       std::span<const extract::ExtractedAnswer> answers,
                                       double threshold) {
  auto b = outcome::classify_batch(stages::truth_index(prompts, facts), answers, threshold);
  for (const auto& e : b.errors) std::cerr << fmt::format("unresolved {}: {}\n", e.prompt_id, e.message);
  return b;
}

void cmd_classify(const ClassifyCommand& o, const Globals& g) {
  need(o.answers, "--answers");
  need(o.prompts, "--prompts");
  need(o.facts, "--facts");
  need(o.out, "--out");
  const auto b = classify_answers(promptgen::read_prompts(o.prompts), ingest::load_facts(o.facts),
                                  extract::read_answers(o.answers), o.threshold);
  if (g.dry_run) {
    std::cout << fmt::format("classify: {} outcomes, {} unresolved\n", b.outcomes.size(), b.errors.size());
    return;
  }
  ensure_parent(o.out);
  outcome::write_outcomes(o.out, b.outcomes);
  std::cout << fmt::format("classify: wrote {} outcomes to {}\n", b.outcomes.size(), o.out);
  if (!b.errors.empty()) {
    throw DataError(fmt::format("{} answers did not resolve to a prompt", b.errors.size()));
  }
}

// --- temporal --------------------------------------------------------------------

analytics::HallucinationDenominator parse_denominator(const std::string& d) {
  if (d == "failures") return analytics::HallucinationDenominator::failures;
  if (d == "all") return analytics::HallucinationDenominator::all;
  throw ConfigError("--denominator must be failures or all");
}

struct TemporalCommand {
  std::string outcomes;
  std::vector<double> thresholds;
  std::string denominator = "failures";
  std::string covariates;
  std::string covariate = "mcap_log10";
  std::string out;
};

std::vector<analytics::YearlyRates> yearly_rates(std::span<const outcome::Outcome> outcomes,
                                                 std::span<const double> thresholds,
                                                 analytics::HallucinationDenominator d) {
  if (thresholds.empty()) return analytics::rates_by_year(outcomes, d);
  std::vector<analytics::YearlyRates> all;
  for (auto& [t, rates] : analytics::threshold_sweep(outcomes, thresholds, d)) {
    all.insert(all.end(), rates.begin(), rates.end());
  }
  return all;
}

void cmd_temporal(const TemporalCommand& o, const Globals& g) {
  need(o.outcomes, "--outcomes");
  need(o.out, "--out");
  const auto outcomes = outcome::read_outcomes(o.outcomes);
  const auto rates = yearly_rates(outcomes, o.thresholds, parse_denominator(o.denominator));
  std::optional<ingest::CovariateIndex> cov;
  if (!o.covariates.empty()) {
    cov = ingest::index_covariate(ingest::load_covariates(o.covariates), o.covariate);
  }
  const auto tallies = analytics::tally_entities(outcomes, cov ? &*cov : nullptr);
  const auto errors = analytics::error_distribution(outcomes);
  if (g.dry_run) {
    std::cout << fmt::format("temporal: {} rate rows, {} entities, {} error rows\n", rates.size(),
                             tallies.size(), errors.size());
    return;
  }
  const fs::path dir(o.out);
  fs::create_directories(dir);
  analytics::write_rates(dir / "rates.csv", rates);
  analytics::write_tallies(dir / "tallies.csv", tallies);
  analytics::write_error_distribution(dir / "errors.csv", errors);
  std::cout << fmt::format("temporal: wrote rates.csv, tallies.csv, errors.csv to {}\n", dir.string());
}

// --- regress ---------------------------------------------------------------------

struct RegressCommand {
  std::string outcomes;
  std::string covariates;
  std::string categories;
  std::vector<std::string> x;
  std::string target = "success";
  std::vector<std::string> fixed;
  std::vector<std::string> reference;
  std::string kernel = "parallel";
  std::string out;
};

glmfit::RegressionSpec regression_spec(const std::vector<std::string>& x,
                                       const std::vector<std::string>& fixed,
                                       const std::vector<std::string>& reference,
                                       glmfit::Target target) {
  glmfit::RegressionSpec spec;
  spec.target = target;
  spec.covariate_names = x;
  spec.fixed_effects = fixed;
  for (const auto& r : reference) {
    const auto eq = r.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("--reference must look like factor=level, got '" + r + "'");
    }
    spec.reference_levels[r.substr(0, eq)] = r.substr(eq + 1);
  }
  return spec;
}

glmfit::FitOptions fit_options(const std::string& kernel) {
  glmfit::FitOptions f;
  if (kernel == "serial") {
    f.kernel = glmfit::Kernel::serial;
  } else if (kernel != "parallel") {
    throw ConfigError("--kernel must be serial or parallel");
  }
  return f;
}

glmfit::FitResult fit_outcomes(std::span<const outcome::Outcome> outcomes,
                               std::span<const ingest::CovariateValue> covs,
                               const stages::NamedCategories& cats, const glmfit::RegressionSpec& spec,
                               const glmfit::FitOptions& options) {
  const auto frame =
      stages::outcome_frame(outcomes, covs, spec.covariate_names, spec.fixed_effects, cats);
  const auto design = glmfit::build_design(frame, spec);
  auto fit = glmfit::fit_logit(design, options);
  if (!fit.converged) {
    std::cerr << fmt::format("warning: fit did not converge after {} iterations\n", fit.iterations);
  }
  return fit;
}

void write_text(const fs::path& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

void cmd_regress(const RegressCommand& o, const Globals& g) {
  need(o.outcomes, "--outcomes");
  need(o.out, "--out");
  if (o.x.empty()) throw ConfigError("--x is required");
  const auto target = glmfit::parse_target(o.target);
  if (target == glmfit::Target::label) throw ConfigError("regress --target must be success or hallucination");
  const auto spec = regression_spec(o.x, o.fixed, o.reference, target);
  const auto options = fit_options(o.kernel);
  const auto outcomes = outcome::read_outcomes(o.outcomes);
  const auto covs = o.covariates.empty() ? std::vector<ingest::CovariateValue>{}
                                         : ingest::load_covariates(o.covariates);
  const auto cats = o.categories.empty() ? stages::NamedCategories{}
                                         : load_categories(o.categories, o.fixed);
  const auto fit = fit_outcomes(outcomes, covs, cats, spec, options);
  const std::vector<glmfit::NamedFit> fits{{std::string(glmfit::to_string(target)), fit}};
  std::cout << glmfit::format_table(fits, o.x.front());
  if (g.dry_run) return;
  write_text(o.out, glmfit::to_json(fits).dump(2) + "\n");
}

// --- report ----------------------------------------------------------------------

struct ReportCommand {
  std::string outcomes;
  std::string covariates;
  std::string categories;
  std::vector<std::string> x;
  std::vector<std::string> fixed;
  std::vector<std::string> reference;
  std::vector<double> thresholds;
  std::string denominator = "failures";
  std::string kernel = "parallel";
  std::string out;
};

void cmd_report(const ReportCommand& o, const Globals& g) {
  need(o.outcomes, "--outcomes");
  need(o.out, "--out");
  const auto outcomes = outcome::read_outcomes(o.outcomes);
  const auto covs = o.covariates.empty() ? std::vector<ingest::CovariateValue>{}
                                         : ingest::load_covariates(o.covariates);
  const auto cats = o.categories.empty() ? stages::NamedCategories{}
                                         : load_categories(o.categories, o.fixed);
  const auto rates = yearly_rates(outcomes, o.thresholds, parse_denominator(o.denominator));
  std::optional<ingest::CovariateIndex> cov;
  if (!o.x.empty() && !covs.empty()) cov = ingest::index_covariate(covs, o.x.front());
  const auto tallies = analytics::tally_entities(outcomes, cov ? &*cov : nullptr);

  std::vector<glmfit::NamedFit> fits;
  if (!o.x.empty()) {
    const auto options = fit_options(o.kernel);
    for (auto target : {glmfit::Target::success, glmfit::Target::hallucination}) {
      const auto spec = regression_spec(o.x, o.fixed, o.reference, target);
      fits.push_back({std::string(glmfit::to_string(target)),
                      fit_outcomes(outcomes, covs, cats, spec, options)});
    }
  }
  if (g.dry_run) {
    std::cout << fmt::format("report: {} rate rows, {} entities, {} fits\n", rates.size(),
                             tallies.size(), fits.size());
    return;
  }
  const auto files = analytics::emit_report(rates, tallies, fits, o.out);
  for (const auto& f : files) std::cout << "report: wrote " << f.string() << "\n";
}

// --- reco ------------------------------------------------------------------------

struct RecoCommand {
  std::string facts;
  std::string covariates;
  std::string x = "mcap_log10";
  int start = 0;
  int end = 0;
  std::string out;
  std::string kernel = "parallel";
  QueryOptions q;
};

struct Dialogue {
  std::string conv_id;
  std::string entity_id;
  std::string entity_name;
  promptgen::Conversation conversation;
  bool alive = true;
};

void run_stage(const llmgate::ChatClient& client, std::vector<Dialogue>& dialogues,
               promptgen::CotStage stage, int start, int end, std::size_t parallelism) {
  std::vector<std::pair<std::string, promptgen::Conversation>> batch;
  std::vector<std::size_t> owner;
  for (std::size_t i = 0; i < dialogues.size(); ++i) {
    auto& d = dialogues[i];
    if (!d.alive) continue;
    if (stage != promptgen::CotStage::history) {
      d.conversation = promptgen::build_cot_conversation(d.entity_name, start, end, stage, d.conversation);
    }
    batch.emplace_back(d.conv_id, d.conversation);
    owner.push_back(i);
  }
  auto results = client.complete_conversations(batch, parallelism);
  for (std::size_t k = 0; k < results.size(); ++k) {
    auto& d = dialogues[owner[k]];
    if (!results[k].ok()) {
      std::cerr << fmt::format("reco {} stage {} failed: {}\n", d.conv_id, promptgen::to_string(stage),
                               results[k].error);
      d.alive = false;
      continue;
    }
    d.conversation.append(promptgen::Role::assistant, results[k].response->raw_text);
  }
}

void cmd_reco(const RecoCommand& o, const Globals& g) {
  need(o.facts, "--facts");
  need(o.out, "--out");
  if (o.start == 0 || o.end == 0 || o.start > o.end) {
    throw ConfigError("--start and --end must give a non-empty year range");
  }
  const auto facts = ingest::load_facts(o.facts);
  const auto covs = o.covariates.empty() ? std::vector<ingest::CovariateValue>{}
                                         : ingest::load_covariates(o.covariates);
  const auto cov_index = ingest::index_covariate(covs, o.x);
  const auto panel = promptgen::sample_intersection(facts, o.start, o.end);

  std::map<std::string, std::vector<ingest::FactRecord>> history;
  std::vector<std::string> order;
  for (const auto& f : panel) {
    auto& h = history[f.entity_id];
    if (h.empty()) order.push_back(f.entity_id);
    h.push_back(f);
  }

  std::vector<Dialogue> dialogues;
  for (const auto& id : order) {
    auto& h = history[id];
    std::sort(h.begin(), h.end(), [](const auto& a, const auto& b) { return a.year < b.year; });
    Dialogue d;
    d.conv_id = promptgen::make_prompt_id("reco", id, o.end);
    d.entity_id = id;
    d.entity_name = h.front().entity_name;
    d.conversation = promptgen::build_cot_conversation(d.entity_name, o.start, o.end,
                                                       promptgen::CotStage::history, {});
    dialogues.push_back(std::move(d));
  }
  if (g.dry_run) {
    std::cout << fmt::format("reco: {} dialogues x 3 stages = {} requests\n", dialogues.size(),
                             3 * dialogues.size());
    return;
  }

  std::shared_ptr<llmgate::Transport> transport;
  if (o.q.mocked()) {
    auto mock = std::make_shared<llmgate::MockTransport>(o.q.profile());
    for (const auto& d : dialogues) {
      const auto& h = history[d.entity_id];
      const auto c = cov_index.find({d.entity_id, o.end});
      mock->add_dialogue(d.conversation.messages().back().content,
                         {d.conv_id, h.back(), c == cov_index.end() ? 0.0 : c->second, h});
    }
    transport = mock;
  } else {
    transport = http_transport(o.q);
  }
  auto client = make_client(o.q, transport);
  for (auto stage : {promptgen::CotStage::history, promptgen::CotStage::forecast,
                     promptgen::CotStage::recommend}) {
    run_stage(*client.chat, dialogues, stage, o.start, o.end, o.q.parallelism);
  }

  const fs::path dir(o.out);
  fs::create_directories(dir);
  std::vector<promptgen::ConversationRecord> records;
  std::ofstream recs(dir / "recommendations.csv", std::ios::binary | std::ios::trunc);
  if (!recs) throw IoError("cannot write " + (dir / "recommendations.csv").string());
  csv::write_row(recs, {"conv_id", "entity_id", "year", "recommendation", o.x});

  std::vector<int> labels;  // 0 dnk, 1 buy, 2 sell
  std::vector<std::optional<double>> xs;
  std::size_t unparseable = 0;
  std::size_t failed = 0;
  for (const auto& d : dialogues) {
    if (!d.alive) {
      ++failed;
      continue;
    }
    records.push_back({d.conv_id, d.conversation});
    std::string label;
    try {
      const auto r = extract::parse_recommendation(d.conversation.messages().back().content);
      label = std::string(extract::to_string(r));
      labels.push_back(r == extract::Recommendation::dnk ? 0 : r == extract::Recommendation::buy ? 1 : 2);
      const auto c = cov_index.find({d.entity_id, o.end});
      xs.push_back(c == cov_index.end() ? std::nullopt : std::optional<double>(c->second));
    } catch (const ParseError&) {
      ++unparseable;
    }
    const auto c = cov_index.find({d.entity_id, o.end});
    csv::write_row(recs, {d.conv_id, d.entity_id, std::to_string(o.end), label,
                          c == cov_index.end() ? "" : fmt::format("{}", c->second)});
  }
  recs.close();
  promptgen::write_conversations(dir / "conversations.jsonl", records);

  std::vector<glmfit::NamedFit> fits;
  std::size_t fit_failures = 0;
  const auto options = fit_options(o.kernel);
  const std::array<std::pair<const char*, int>, 3> kinds{{{"DNK", 0}, {"BUY", 1}, {"SELL", 2}}};
  for (const auto& [name, code] : kinds) {
    glmfit::Frame frame;
    for (int l : labels) frame.response_codes.push_back(l == code ? 1 : 0);
    frame.covariates.emplace_back(o.x, xs);
    glmfit::RegressionSpec spec;
    spec.target = glmfit::Target::label;
    spec.covariate_names = {o.x};
    try {
      fits.push_back({name, glmfit::fit_logit(glmfit::build_design(frame, spec), options)});
    } catch (const AnalysisError& e) {
      ++fit_failures;
      std::cerr << fmt::format("reco fit {} skipped: {}\n", name, e.what());
    }
  }
  write_text(dir / "fits.json", glmfit::to_json(fits).dump(2) + "\n");
  std::cout << fmt::format("reco: {} dialogues, {} failed, {} unparseable, {} labelled\n",
                           dialogues.size(), failed, unparseable, labels.size());
  std::cout << glmfit::format_table(fits, o.x);
  if (failed > 0) throw TransportError(fmt::format("{} dialogues failed; rerun to retry them", failed));
  if (fit_failures > 0) throw AnalysisError(fmt::format("{} of 3 fits failed", fit_failures));
}

// --- soccer ----------------------------------------------------------------------

struct SoccerCommand {
  std::string facts;
  std::string x = "position";
  double threshold = 0.05;
  std::string out;
  std::string kernel = "parallel";
  QueryOptions q;
};

void cmd_soccer(const SoccerCommand& o, const Globals& g) {
  need(o.facts, "--facts");
  need(o.out, "--out");
  const auto facts = ingest::load_facts(o.facts);
  const std::vector<std::string> wanted{"league", o.x};
  const auto cats = load_categories(o.facts, wanted);
  if (!cats.contains("league")) throw DataError(o.facts + ": soccer facts need a league column");

  std::vector<ingest::CovariateValue> covs;
  if (const auto it = cats.find(o.x); it != cats.end()) {
    for (const auto& [key, text] : it->second) {
      try {
        covs.push_back({key.first, key.second, o.x, std::stod(text), ingest::TransformTag::raw});
      } catch (const std::exception&) {
        throw DataError(fmt::format("{}: {} '{}' is not a number", o.facts, o.x, text));
      }
    }
  }

  GenOptions gen;
  gen.facts = o.facts;
  gen.template_id = "soccer";
  const auto prompts = generate(gen);
  if (g.dry_run) {
    std::cout << fmt::format("soccer: {} prompts\n", prompts.size());
    return;
  }

  std::shared_ptr<llmgate::Transport> transport;
  if (o.q.mocked()) {
    auto mock = std::make_shared<llmgate::MockTransport>(o.q.profile());
    stages::register_mock_prompts(*mock, prompts, facts, covs, o.x);
    transport = mock;
  } else {
    transport = http_transport(o.q);
  }
  auto client = make_client(o.q, transport);
  const auto result = collect(client.chat->complete_batch(prompts, o.q.parallelism), o.q.mocked());
  const auto answers = extract_responses(result.responses, extract::Mode::points);
  const auto b = classify_answers(prompts, facts, answers, o.threshold);

  const fs::path dir(o.out);
  fs::create_directories(dir);
  promptgen::write_prompts(dir / "prompts.jsonl", prompts);
  llmgate::write_responses(dir / "responses.jsonl", result.responses);
  extract::write_answers(dir / "answers.jsonl", answers);
  outcome::write_outcomes(dir / "outcomes.csv", b.outcomes);
  const auto rates = analytics::rates_by_year(b.outcomes);
  analytics::write_rates(dir / "rates.csv", rates);

  const std::vector<std::string> x{o.x};
  const std::vector<std::string> fixed{"year", "league"};
  const auto spec = regression_spec(x, fixed, {}, glmfit::Target::success);
  const std::vector<glmfit::NamedFit> fits{
      {"success", fit_outcomes(b.outcomes, covs, cats, spec, fit_options(o.kernel))}};
  write_text(dir / "fits.json", glmfit::to_json(fits).dump(2) + "\n");
  std::cout << glmfit::format_table(fits, o.x);
  if (result.failed > 0) {
    throw TransportError(fmt::format("{} of {} prompts failed; rerun to retry them", result.failed,
                                     prompts.size()));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Audit a chat model's recall of numeric facts, staged through CSV/JSONL files."};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "JSON run configuration; flags override its values");
  app.add_flag("--dry-run", g.dry_run, "Validate and print planned row counts without network or writes");

  GenOptions gen;
  auto* c_gen = app.add_subcommand("gen", "Build the prompt dataset from facts");
  c_gen->add_option("--facts", gen.facts, "Facts CSV (entity_id, entity_name, year, value, unit)");
  c_gen->add_option("--covariates", gen.covariates, "Covariates CSV (for stratified sampling)");
  c_gen->add_option("--covariate", gen.covariate, "Log10 market-cap covariate to bucket on")->capture_default_str();
  c_gen->add_option("--template", gen.template_id, "revenue or soccer")->capture_default_str();
  c_gen->add_option("--sample", gen.sample, "full, stratified or intersection")->capture_default_str();
  c_gen->add_option("--per-cell", gen.per_cell, "Records per (year, bucket) cell")->capture_default_str();
  c_gen->add_option("--range", gen.range, "FIRST:LAST years for intersection sampling");
  c_gen->add_option("--seed", gen.seed, "Sampling seed")->capture_default_str();
  c_gen->add_option("--out", gen.out, "Prompts JSONL");

  QueryCommand query;
  auto* c_query = app.add_subcommand("query", "Ask the model every prompt");
  c_query->add_option("--prompts", query.prompts, "Prompts JSONL");
  c_query->add_option("--facts", query.facts, "Facts CSV (mock runs only)");
  c_query->add_option("--covariates", query.covariates, "Covariates CSV (mock runs only)");
  c_query->add_option("--out", query.out, "Responses JSONL");
  query.q.add_to(c_query);

  ExtractCommand ext;
  auto* c_extract = app.add_subcommand("extract", "Pull numeric answers out of responses");
  c_extract->add_option("--responses", ext.responses, "Responses JSONL");
  c_extract->add_option("--mode", ext.mode, "money or points")->capture_default_str();
  c_extract->add_option("--out", ext.out, "Answers JSONL");

  ClassifyCommand cls;
  auto* c_classify = app.add_subcommand("classify", "Score answers against the ground truth");
  c_classify->add_option("--answers", cls.answers, "Answers JSONL");
  c_classify->add_option("--prompts", cls.prompts, "Prompts JSONL");
  c_classify->add_option("--facts", cls.facts, "Facts CSV");
  c_classify->add_option("--threshold", cls.threshold, "Relative error tolerance")->capture_default_str();
  c_classify->add_option("--out", cls.out, "Outcomes CSV");

  TemporalCommand tmp;
  auto* c_temporal = app.add_subcommand("temporal", "Yearly rates, entity tallies and error spread");
  c_temporal->add_option("--outcomes", tmp.outcomes, "Outcomes CSV");
  c_temporal->add_option("--thresholds", tmp.thresholds, "Re-score at each threshold (increasing)");
  c_temporal->add_option("--denominator", tmp.denominator, "failures or all")->capture_default_str();
  c_temporal->add_option("--covariates", tmp.covariates, "Covariates CSV for tally means");
  c_temporal->add_option("--covariate", tmp.covariate, "Covariate averaged per entity")->capture_default_str();
  c_temporal->add_option("--out", tmp.out, "Output directory");

  RegressCommand reg;
  auto* c_regress = app.add_subcommand("regress", "Logistic regression of outcomes on covariates");
  c_regress->add_option("--outcomes", reg.outcomes, "Outcomes CSV");
  c_regress->add_option("--covariates", reg.covariates, "Covariates CSV");
  c_regress->add_option("--categories", reg.categories, "CSV of text factors keyed by entity_id, year");
  c_regress->add_option("--x", reg.x, "Covariate names");
  c_regress->add_option("--target", reg.target, "success or hallucination")->capture_default_str();
  c_regress->add_option("--fixed", reg.fixed, "Fixed-effect factors (year, or a category)");
  c_regress->add_option("--reference", reg.reference, "Reference levels as factor=level");
  c_regress->add_option("--kernel", reg.kernel, "serial or parallel")->capture_default_str();
  c_regress->add_option("--out", reg.out, "Fit JSON");

  RecoCommand reco;
  auto* c_reco = app.add_subcommand("reco", "Multi-turn BUY/SELL/DNK recommendation study");
  c_reco->add_option("--facts", reco.facts, "Revenue facts CSV");
  c_reco->add_option("--covariates", reco.covariates, "Covariates CSV");
  c_reco->add_option("--x", reco.x, "Covariate at the last history year")->capture_default_str();
  c_reco->add_option("--start", reco.start, "First history year");
  c_reco->add_option("--end", reco.end, "Last history year");
  c_reco->add_option("--kernel", reco.kernel, "serial or parallel")->capture_default_str();
  c_reco->add_option("--out", reco.out, "Output directory");
  reco.q.add_to(c_reco);

  ReportCommand rep;
  auto* c_report = app.add_subcommand("report", "Rates, tallies and both fits in one directory");
  c_report->add_option("--outcomes", rep.outcomes, "Outcomes CSV");
  c_report->add_option("--covariates", rep.covariates, "Covariates CSV");
  c_report->add_option("--categories", rep.categories, "CSV of text factors keyed by entity_id, year");
  c_report->add_option("--x", rep.x, "Covariate names");
  c_report->add_option("--fixed", rep.fixed, "Fixed-effect factors");
  c_report->add_option("--reference", rep.reference, "Reference levels as factor=level");
  c_report->add_option("--thresholds", rep.thresholds, "Re-score at each threshold (increasing)");
  c_report->add_option("--denominator", rep.denominator, "failures or all")->capture_default_str();
  c_report->add_option("--kernel", rep.kernel, "serial or parallel")->capture_default_str();
  c_report->add_option("--out", rep.out, "Output directory");

  SoccerCommand soc;
  auto* c_soccer = app.add_subcommand("soccer", "Season-points study with league fixed effects");
  c_soccer->add_option("--facts", soc.facts, "Points CSV with league and position columns");
  c_soccer->add_option("--x", soc.x, "Numeric column used as the covariate")->capture_default_str();
  c_soccer->add_option("--threshold", soc.threshold, "Relative error tolerance")->capture_default_str();
  c_soccer->add_option("--kernel", soc.kernel, "serial or parallel")->capture_default_str();
  c_soccer->add_option("--out", soc.out, "Output directory");
  soc.q.add_to(c_soccer);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::config);
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    if (!g.config.empty()) {
      const auto cfg = load_config(g.config);
      validate_config(app, cfg);
      apply_config(*sub, cfg);
      if (!g.dry_run && cfg.contains("dry_run") && cfg["dry_run"].is_boolean()) {
        g.dry_run = cfg["dry_run"].get<bool>();
      }
    }
    const std::string name = sub->get_name();
    if (name == "gen") cmd_gen(gen, g);
    else if (name == "query") cmd_query(query, g);
    else if (name == "extract") cmd_extract(ext, g);
    else if (name == "classify") cmd_classify(cls, g);
    else if (name == "temporal") cmd_temporal(tmp, g);
    else if (name == "regress") cmd_regress(reg, g);
    else if (name == "reco") cmd_reco(reco, g);
    else if (name == "report") cmd_report(rep, g);
    else if (name == "soccer") cmd_soccer(soc, g);
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::analysis);
  }
}
