#include "kgap/promptgen.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <map>
#include <set>

#include "kgap/common/hash.hpp"
#include "kgap/common/jsonl.hpp"
#include "kgap/common/rng.hpp"
#include "kgap/error.hpp"

namespace kgap::promptgen {

using ingest::FactRecord;

const Template& revenue_template() {
  static const Template t{
      "revenue", "What was the revenue of {company_name} in financial year {financial_year}?"};
  return t;
}

const Template& soccer_template() {
  static const Template t{
      "soccer", "In the {season} {league} season, how many points did {team} finish with?"};
  return t;
}

const Template& builtin_template(std::string_view id) {
  if (id == revenue_template().id) return revenue_template();
  if (id == soccer_template().id) return soccer_template();
  throw ConfigError(fmt::format("unknown template '{}'", id));
}

std::string render_prompt(std::string_view tmpl, const SlotBindings& bindings) {
  std::string out;
  out.reserve(tmpl.size() + 32);
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find('{', pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, open - pos));
    const auto close = tmpl.find('}', open);
    if (close == std::string_view::npos) {
      throw TemplateError(fmt::format("unterminated slot at offset {}", open));
    }
    const auto slot = tmpl.substr(open + 1, close - open - 1);
    if (slot == "company_name" || slot == "team" || slot == "entity") {
      out.append(bindings.entity_name);
    } else if (slot == "financial_year" || slot == "year" || slot == "season") {
      out.append(std::to_string(bindings.year));
    } else if (slot == "league") {
      if (!bindings.league) throw TemplateError("slot {league} has no binding");
      out.append(*bindings.league);
    } else {
      throw TemplateError(fmt::format("unresolved slot {{{}}}", slot));
    }
    pos = close + 1;
  }
  return out;
}

std::string make_prompt_id(std::string_view template_id, std::string_view entity_id, int year) {
  std::string key;
  key.append(template_id).push_back('\x1f');
  key.append(entity_id).push_back('\x1f');
  key.append(std::to_string(year));
  return sha256_hex(key).substr(0, 20);
}

std::vector<PromptRecord> build_dataset(std::span<const FactRecord> facts, const Template& tmpl,
                                        const LeagueLookup& league) {
  std::vector<PromptRecord> out;
  out.reserve(facts.size());
  for (const auto& f : facts) {
    std::optional<std::string> league_name;
    if (league) league_name = league(f);
    SlotBindings b{f.entity_name, f.year, std::nullopt};
    if (league_name) b.league = *league_name;
    out.push_back({make_prompt_id(tmpl.id, f.entity_id, f.year), f.entity_id, f.year,
                   render_prompt(tmpl.text, b), tmpl.id});
  }
  return out;
}

StratifiedSample sample_stratified(std::span<const StratifiedInput> input, std::size_t per_cell,
                                   std::uint64_t seed) {
  if (per_cell < 1) throw ConfigError("per_cell must be at least 1");

  std::map<std::pair<int, std::string>, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < input.size(); ++i) {
    cells[{input[i].fact.year, input[i].bucket}].push_back(i);
  }

  StratifiedSample sample;
  for (auto& [key, members] : cells) {
    const auto& [year, bucket] = key;
    if (members.size() <= per_cell) {
      if (members.size() < per_cell) {
        sample.shortfalls.push_back({year, bucket, members.size(), per_cell});
      }
    } else {
      // Partial Fisher-Yates: the first per_cell slots become the draw.
      auto rng = Rng::for_key(seed, fmt::format("{}|{}", year, bucket));
      for (std::size_t i = 0; i < per_cell; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(members.size() - i));
        std::swap(members[i], members[j]);
      }
      members.resize(per_cell);
      std::sort(members.begin(), members.end());
    }
    for (auto idx : members) sample.records.push_back(input[idx].fact);
  }
  return sample;
}

std::vector<FactRecord> sample_intersection(std::span<const FactRecord> facts, int first_year,
                                            int last_year) {
  if (first_year > last_year) {
    throw ConfigError(fmt::format("invalid year range {}:{}", first_year, last_year));
  }
  const auto span_years = static_cast<std::size_t>(last_year - first_year + 1);
  std::map<std::string, std::set<int>> years_by_entity;
  for (const auto& f : facts) {
    if (f.year >= first_year && f.year <= last_year) years_by_entity[f.entity_id].insert(f.year);
  }
  std::vector<FactRecord> out;
  for (const auto& f : facts) {
    if (f.year < first_year || f.year > last_year) continue;
    if (years_by_entity[f.entity_id].size() == span_years) out.push_back(f);
  }
  return out;
}

std::string_view to_string(Role role) {
  switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

Role parse_role(std::string_view text) {
  if (text == "system") return Role::system;
  if (text == "user") return Role::user;
  if (text == "assistant") return Role::assistant;
  throw DataError(fmt::format("unknown message role '{}'", text));
}

void Conversation::append(Role role, std::string content) {
  if (role == Role::assistant && !messages_.empty() &&
      messages_.back().role == Role::assistant) {
    throw ProtocolError("two consecutive assistant messages");
  }
  messages_.push_back({role, std::move(content)});
}

std::size_t Conversation::count(Role role) const {
  return static_cast<std::size_t>(std::count_if(
      messages_.begin(), messages_.end(), [role](const Message& m) { return m.role == role; }));
}

Conversation Conversation::single_user(std::string content) {
  Conversation c;
  c.append(Role::user, std::move(content));
  return c;
}

std::string_view to_string(CotStage stage) {
  switch (stage) {
    case CotStage::history: return "history";
    case CotStage::forecast: return "forecast";
    case CotStage::recommend: return "recommend";
  }
  return "history";
}

Conversation build_cot_conversation(std::string_view entity_name, int start_year, int end_year,
                                    CotStage stage, const Conversation& prior) {
  if (start_year > end_year) {
    throw ConfigError(fmt::format("invalid year range {}:{}", start_year, end_year));
  }
  const auto user_turns = prior.count(Role::user);
  const bool answered = !prior.empty() && prior.messages().back().role == Role::assistant;

  auto require = [&](std::size_t turns) {
    if (user_turns != turns || (turns > 0 && !answered)) {
      throw ProtocolError(fmt::format(
          "stage '{}' requires {} answered earlier turn(s); conversation has {} user turn(s){}",
          to_string(stage), turns, user_turns,
          (turns > 0 && !answered) ? " and no reply to the last" : ""));
    }
  };

  Conversation next = prior;
  switch (stage) {
    case CotStage::history:
      require(0);
      next.append(Role::system, "Forget all your previous instructions.");
      next.append(Role::user,
                  fmt::format("What are the revenues of {} for each finance year from {} to {}? "
                              "Please return the revenue only.",
                              entity_name, start_year, end_year));
      break;
    case CotStage::forecast:
      require(1);
      next.append(Role::user,
                  fmt::format("Based on the revenue information above, please predict the "
                              "revenue of {} in finance year {}. Please return the revenue only.",
                              entity_name, end_year + 1));
      break;
    case CotStage::recommend:
      require(2);
      next.append(Role::system,
                  "Act as a financial expert with experience in stock recommendations.");
      next.append(Role::user,
                  fmt::format("Based on the information above, give either BUY, SELL, or DNK "
                              "(do not have enough knowledge of the company) recommendation "
                              "for {} in finance year {}.",
                              entity_name, end_year + 2));
      break;
  }
  return next;
}

void write_prompts(const std::filesystem::path& path, std::span<const PromptRecord> prompts) {
  std::vector<nlohmann::ordered_json> rows;
  rows.reserve(prompts.size());
  for (const auto& p : prompts) {
    rows.push_back({{"prompt_id", p.prompt_id},
                    {"entity_id", p.entity_id},
                    {"year", p.year},
                    {"text", p.text},
                    {"template_id", p.template_id}});
  }
  jsonl::write(path, rows);
}

std::vector<PromptRecord> read_prompts(const std::filesystem::path& path) {
  std::vector<PromptRecord> out;
  std::set<std::string> ids;
  for (const auto& j : jsonl::read(path)) {
    try {
      PromptRecord p{j.at("prompt_id").get<std::string>(), j.at("entity_id").get<std::string>(),
                     j.at("year").get<int>(), j.at("text").get<std::string>(),
                     j.at("template_id").get<std::string>()};
      if (p.text.empty()) throw DataError("empty prompt text for " + p.prompt_id);
      if (!ids.insert(p.prompt_id).second) {
        throw DataError("duplicate prompt_id " + p.prompt_id);
      }
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ": " + e.what());
    }
  }
  return out;
}

void write_conversations(const std::filesystem::path& path,
                         std::span<const ConversationRecord> conversations) {
  std::vector<nlohmann::ordered_json> rows;
  for (const auto& c : conversations) {
    auto messages = nlohmann::ordered_json::array();
    for (const auto& m : c.conversation.messages()) {
      messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    }
    rows.push_back({{"conv_id", c.conv_id}, {"messages", std::move(messages)}});
  }
  jsonl::write(path, rows);
}

std::vector<ConversationRecord> read_conversations(const std::filesystem::path& path) {
  std::vector<ConversationRecord> out;
  for (const auto& j : jsonl::read(path)) {
    try {
      ConversationRecord rec;
      rec.conv_id = j.at("conv_id").get<std::string>();
      for (const auto& m : j.at("messages")) {
        rec.conversation.append(parse_role(m.at("role").get<std::string>()),
                                m.at("content").get<std::string>());
      }
      out.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace kgap::promptgen
