#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgap/ingest.hpp"

namespace kgap::promptgen {

struct Template {
  std::string id;
  std::string text;
};

// Zero-shot revenue question.
const Template& revenue_template();
// Season-points question for the soccer study; needs a {league} binding.
const Template& soccer_template();
// Looks up a built-in template by id ("revenue", "soccer").
const Template& builtin_template(std::string_view id);

struct SlotBindings {
  std::string_view entity_name;
  int year = 0;
  std::optional<std::string_view> league;
};

// Replaces {company_name}/{team}/{entity} with the entity name,
// {financial_year}/{year}/{season} with the year and {league} with the
// league. Any other slot, or a {league} slot without a binding, throws
// TemplateError.
std::string render_prompt(std::string_view tmpl, const SlotBindings& bindings);

inline std::string render_prompt(std::string_view tmpl, std::string_view entity_name,
                                 int year) {
  return render_prompt(tmpl, SlotBindings{entity_name, year, std::nullopt});
}

struct PromptRecord {
  std::string prompt_id;
  std::string entity_id;
  int year = 0;
  std::string text;
  std::string template_id;

  friend bool operator==(const PromptRecord&, const PromptRecord&) = default;
};

// Content-addressed id: hex prefix of SHA-256(template_id, entity_id, year).
std::string make_prompt_id(std::string_view template_id, std::string_view entity_id,
                           int year);

// Optional per-fact league lookup for templates that need {league}.
using LeagueLookup = std::function<std::optional<std::string>(const ingest::FactRecord&)>;

// One prompt per fact, in fact order.
std::vector<PromptRecord> build_dataset(std::span<const ingest::FactRecord> facts,
                                        const Template& tmpl,
                                        const LeagueLookup& league = {});

struct StratifiedInput {
  ingest::FactRecord fact;
  std::string bucket;
};

struct CellShortfall {
  int year = 0;
  std::string bucket;
  std::size_t available = 0;
  std::size_t requested = 0;
};

struct StratifiedSample {
  std::vector<ingest::FactRecord> records;
  std::vector<CellShortfall> shortfalls;
};

// Draws min(per_cell, |cell|) records uniformly without replacement from
// every (year, bucket) cell. Each cell uses its own stream seeded from
// (seed, year, bucket), so the draw in one cell does not depend on any
// other. Output is ordered by (year, bucket), then by input position.
StratifiedSample sample_stratified(std::span<const StratifiedInput> input,
                                   std::size_t per_cell, std::uint64_t seed);

// Keeps entities with a record for every year in [first_year, last_year],
// along with all of their records inside that range, in input order.
std::vector<ingest::FactRecord> sample_intersection(
    std::span<const ingest::FactRecord> facts, int first_year, int last_year);

enum class Role { system, user, assistant };

std::string_view to_string(Role role);
Role parse_role(std::string_view text);

struct Message {
  Role role = Role::user;
  std::string content;

  friend bool operator==(const Message&, const Message&) = default;
};

// Ordered chat messages. Two assistant messages in a row are rejected.
class Conversation {
 public:
  Conversation() = default;

  void append(Role role, std::string content);
  const std::vector<Message>& messages() const { return messages_; }
  std::size_t size() const { return messages_.size(); }
  bool empty() const { return messages_.empty(); }
  std::size_t count(Role role) const;

  static Conversation single_user(std::string content);

  friend bool operator==(const Conversation&, const Conversation&) = default;

 private:
  std::vector<Message> messages_;
};

enum class CotStage { history, forecast, recommend };

std::string_view to_string(CotStage stage);

// Appends one stage of the multi-turn revenue -> forecast -> recommendation
// dialogue. `prior` must hold every earlier stage together with the
// assistant's reply to it; otherwise ProtocolError.
Conversation build_cot_conversation(std::string_view entity_name, int start_year,
                                    int end_year, CotStage stage,
                                    const Conversation& prior);

// JSONL stage files.
void write_prompts(const std::filesystem::path& path, std::span<const PromptRecord> prompts);
std::vector<PromptRecord> read_prompts(const std::filesystem::path& path);

struct ConversationRecord {
  std::string conv_id;
  Conversation conversation;
};

void write_conversations(const std::filesystem::path& path,
                         std::span<const ConversationRecord> conversations);
std::vector<ConversationRecord> read_conversations(const std::filesystem::path& path);

}  // namespace kgap::promptgen
