#include <fmt/format.h>

#include <cmath>

#include "kgap/common/rng.hpp"
#include "kgap/error.hpp"
#include "kgap/llmgate.hpp"

namespace kgap::llmgate {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Fixed six decimals with trailing zeros removed: "1521", "265.6".
std::string format_plain(double value) {
  std::string s = fmt::format("{:.6f}", value);
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  if (s == "-0") s = "0";
  return s;
}

std::string render_value(ingest::Unit unit, double value) {
  switch (unit) {
    case ingest::Unit::millions_usd: return format_millions(value);
    case ingest::Unit::points: return format_plain(value) + " points";
    case ingest::Unit::raw: return format_plain(value);
  }
  return format_plain(value);
}

std::string answer_sentence(const ingest::FactRecord& truth, double value) {
  switch (truth.unit) {
    case ingest::Unit::millions_usd:
      return fmt::format("Revenue was {} for {} in financial year {}.",
                         render_value(truth.unit, value), truth.entity_name, truth.year);
    case ingest::Unit::points:
      return fmt::format("They finished with {} ({}, {} season).",
                         render_value(truth.unit, value), truth.entity_name, truth.year);
    case ingest::Unit::raw:
      return fmt::format("The answer is {}.", render_value(truth.unit, value));
  }
  return {};
}

constexpr std::string_view kRefusal =
    "I'm sorry, but I don't have reliable information to answer that question.";

enum class Draw { correct, hallucinated, refusal };

struct Decision {
  Draw draw = Draw::refusal;
  double value = 0.0;
};

Decision decide(const OracleProfile& profile, std::string_view key, const ingest::FactRecord& truth,
                double covariate) {
  auto rng = Rng::for_key(profile.noise_seed, key);
  const double u_correct = rng.uniform();
  const double u_hallucinate = rng.uniform();
  const double u_error = rng.uniform();
  const double u_sign = rng.uniform();

  if (u_correct < profile.p_correct(truth.year, covariate)) {
    return {Draw::correct, truth.value};
  }
  if (u_hallucinate < profile.p_hallucinate(covariate)) {
    const double rel = (2.0 + 8.0 * u_error) * profile.threshold;
    const double sign = (u_sign < 0.5 && rel < 1.0) ? -1.0 : 1.0;
    double wrong = truth.value * (1.0 + sign * rel);
    if (truth.value == 0.0) wrong = 1.0 + rel;
    return {Draw::hallucinated, wrong};
  }
  return {Draw::refusal, 0.0};
}

}  // namespace

std::string format_millions(double value) { return "$" + format_plain(value) + " million"; }

double OracleProfile::p_correct(int year, double covariate_value) const {
  return sigmoid(a_const + b_year * (year - base_year) + c_cov * covariate_value);
}

double OracleProfile::p_hallucinate(double covariate_value) const {
  if (h_cov == 0.0 || hallucinate_given_known <= 0.0 || hallucinate_given_known >= 1.0) {
    return hallucinate_given_known;
  }
  const double base = std::log(hallucinate_given_known / (1.0 - hallucinate_given_known));
  return sigmoid(base + h_cov * covariate_value);
}

void OracleProfile::validate() const {
  for (double v : {a_const, b_year, c_cov, h_cov}) {
    if (!std::isfinite(v)) throw ConfigError("oracle profile: coefficients must be finite");
  }
  if (!(hallucinate_given_known >= 0.0 && hallucinate_given_known <= 1.0)) {
    throw ConfigError("oracle profile: hallucinate_given_known must be in [0, 1]");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("oracle profile: threshold must be in (0, 1)");
  }
  if (!(buy_given_decision >= 0.0 && buy_given_decision <= 1.0)) {
    throw ConfigError("oracle profile: buy_given_decision must be in [0, 1]");
  }
}

OracleProfile profile_from_json(const nlohmann::json& j) {
  OracleProfile p;
  try {
    p.a_const = j.value("a_const", p.a_const);
    p.b_year = j.value("b_year", p.b_year);
    p.c_cov = j.value("c_cov", p.c_cov);
    p.hallucinate_given_known = j.value("hallucinate_given_known", p.hallucinate_given_known);
    p.h_cov = j.value("h_cov", p.h_cov);
    p.noise_seed = j.value("noise_seed", p.noise_seed);
    p.base_year = j.value("base_year", p.base_year);
    p.threshold = j.value("threshold", p.threshold);
    p.buy_given_decision = j.value("buy_given_decision", p.buy_given_decision);
    p.covariate = j.value("covariate", p.covariate);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("oracle profile: ") + e.what());
  }
  p.validate();
  return p;
}

nlohmann::ordered_json to_json(const OracleProfile& p) {
  return {{"a_const", p.a_const},
          {"b_year", p.b_year},
          {"c_cov", p.c_cov},
          {"hallucinate_given_known", p.hallucinate_given_known},
          {"h_cov", p.h_cov},
          {"noise_seed", p.noise_seed},
          {"base_year", p.base_year},
          {"threshold", p.threshold},
          {"buy_given_decision", p.buy_given_decision},
          {"covariate", p.covariate}};
}

ModelResponse mock_complete(const OracleProfile& profile, const PromptRecord& prompt,
                            const ingest::FactRecord& truth, double covariate) {
  const auto d = decide(profile, prompt.prompt_id, truth, covariate);
  std::string text = d.draw == Draw::refusal ? std::string(kRefusal)
                                             : answer_sentence(truth, d.value);
  return {prompt.prompt_id, std::move(text), std::string(kMockModel), true, false,
          std::string(kMockTimestamp)};
}

MockTransport::MockTransport(OracleProfile profile) : profile_(std::move(profile)) {
  profile_.validate();
}

void MockTransport::add_prompt(const PromptRecord& prompt, const ingest::FactRecord& truth,
                               double covariate) {
  MockCase c{prompt.prompt_id, truth, covariate, {}};
  prompts_.insert_or_assign(prompt.text, std::make_pair(prompt, std::move(c)));
}

void MockTransport::add_dialogue(const std::string& first_user_message, MockCase c) {
  dialogues_.insert_or_assign(first_user_message, std::move(c));
}

std::size_t MockTransport::requests() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

HttpReply MockTransport::post(const std::string& /*url*/, const std::string& body,
                              const Headers& /*headers*/) {
  {
    std::lock_guard lock(mutex_);
    ++requests_;
  }
  nlohmann::json request;
  try {
    request = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception&) {
    return {400, R"({"error":"bad json"})"};
  }

  std::vector<std::string> user_turns;
  for (const auto& m : request.at("messages")) {
    if (m.at("role") == "user") user_turns.push_back(m.at("content").get<std::string>());
  }
  if (user_turns.empty()) return {400, R"({"error":"no user message"})"};

  std::string text;
  if (const auto it = prompts_.find(user_turns.back());
      user_turns.size() == 1 && it != prompts_.end()) {
    const auto& [prompt, c] = it->second;
    text = mock_complete(profile_, prompt, c.truth, c.covariate).raw_text;
  } else if (const auto dit = dialogues_.find(user_turns.front()); dit != dialogues_.end()) {
    const MockCase& c = dit->second;
    const auto d = decide(profile_, c.key, c.truth, c.covariate);
    const bool known = d.draw == Draw::correct;
    switch (user_turns.size()) {
      case 1: {
        if (!known || c.history.empty()) {
          text = std::string(kRefusal);
          break;
        }
        text = fmt::format("Here are the revenues of {} for each financial year from {} to {}:\n",
                           c.truth.entity_name, c.history.front().year, c.history.back().year);
        for (std::size_t i = 0; i < c.history.size(); ++i) {
          if (i) text += "; ";
          text += fmt::format("{}: {}", c.history[i].year, format_millions(c.history[i].value));
        }
        break;
      }
      case 2:
        text = known ? format_millions(c.truth.value * 1.05) : std::string(kRefusal);
        break;
      default: {
        auto rng = Rng::for_key(profile_.noise_seed, c.key + "|recommend");
        if (!known) {
          text = "DNK";
        } else {
          text = rng.uniform() < profile_.buy_given_decision ? "BUY" : "SELL";
        }
        break;
      }
    }
  } else {
    text = std::string(kRefusal);
  }

  nlohmann::ordered_json reply{
      {"id", "mock"},
      {"object", "chat.completion"},
      {"model", request.value("model", std::string(kMockModel))},
      {"choices",
       {{{"index", 0},
         {"message", {{"role", "assistant"}, {"content", text}}},
         {"finish_reason", "stop"}}}}};
  return {200, reply.dump()};
}

}  // namespace kgap::llmgate
