#pragma once

#include <json.hpp>

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kgap/ingest.hpp"
#include "kgap/promptgen.hpp"

namespace kgap::llmgate {

using promptgen::Conversation;
using promptgen::PromptRecord;

// Request parameters sent verbatim with every chat completion.
struct QueryParams {
  std::string model;
  double temperature = 0.0;
  int max_tokens = 100;
  std::string endpoint;
  // Environment variable holding the bearer token. Empty disables auth
  // (for local servers).
  std::string api_key_env = "LLM_API_KEY";

  void validate() const;
};

struct RetryPolicy {
  int attempts = 5;
  std::chrono::milliseconds base_delay{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_delay{30000};

  std::chrono::milliseconds delay_before(int attempt) const;
};

struct ModelResponse {
  std::string prompt_id;
  std::string raw_text;
  std::string model;
  bool finished = true;
  bool retrieved_from_cache = false;
  std::string timestamp;

  friend bool operator==(const ModelResponse&, const ModelResponse&) = default;
};

std::string utc_timestamp_now();

// --- wire format ---------------------------------------------------------

// {model, messages:[{role, content}], temperature, max_tokens}
nlohmann::ordered_json request_body(const QueryParams& params, const Conversation& conversation);

struct ParsedReply {
  std::string text;
  bool finished = true;  // false when finish_reason == "length"
};

// Reads choices[0].message.content; anything else is a ProtocolError.
ParsedReply parse_reply(std::string_view body);

// SHA-256 over endpoint, model, temperature, max_tokens and the messages.
std::string cache_key(const QueryParams& params, const Conversation& conversation);

// --- transport -----------------------------------------------------------

struct HttpReply {
  int status = 0;
  std::string body;
};

using Headers = std::vector<std::pair<std::string, std::string>>;

class Transport {
 public:
  virtual ~Transport() = default;
  // Throws TransportError when no HTTP reply was obtained at all.
  virtual HttpReply post(const std::string& url, const std::string& body,
                         const Headers& headers) = 0;
};

// cpp-httplib backed HTTP(S) POST.
class HttpTransport final : public Transport {
 public:
  explicit HttpTransport(std::chrono::seconds timeout = std::chrono::seconds(120));
  HttpReply post(const std::string& url, const std::string& body,
                 const Headers& headers) override;

 private:
  std::chrono::seconds timeout_;
};

// --- cache ---------------------------------------------------------------

struct CachedReply {
  std::string raw_text;
  std::string model;
  bool finished = true;
  std::string timestamp;
};

// Append-only JSONL store keyed by cache_key(). Each entry is written as one
// complete line and flushed; a torn trailing line from an interrupted run is
// ignored on load. Many readers, one writer at a time.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path path);

  std::optional<CachedReply> find(const std::string& key) const;
  void store(const std::string& key, const CachedReply& reply);
  std::size_t size() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, CachedReply> entries_;
  std::ofstream out_;
};

// --- client --------------------------------------------------------------

struct BatchResult {
  std::string prompt_id;
  std::optional<ModelResponse> response;
  std::string error;

  bool ok() const { return response.has_value(); }
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

class ChatClient {
 public:
  // Resolves the API key from the environment up front: a missing variable
  // is a ConfigError before any request is made.
  ChatClient(QueryParams params, std::shared_ptr<Transport> transport,
             ResponseCache* cache = nullptr, RetryPolicy retry = {}, Sleeper sleeper = {});

  const QueryParams& params() const { return params_; }

  // Blocking; safe to call from several threads.
  ModelResponse complete(const Conversation& conversation, std::string prompt_id) const;

  // One result per prompt, in input order. At most `parallelism` requests
  // are in flight. A failing prompt records its error and the batch goes on.
  std::vector<BatchResult> complete_batch(std::span<const PromptRecord> prompts,
                                          std::size_t parallelism) const;

  // Same pool for pre-built conversations (id, conversation).
  std::vector<BatchResult> complete_conversations(
      std::span<const std::pair<std::string, Conversation>> conversations,
      std::size_t parallelism) const;

 private:
  QueryParams params_;
  std::shared_ptr<Transport> transport_;
  ResponseCache* cache_;
  RetryPolicy retry_;
  Sleeper sleeper_;
  std::string api_key_;
};

void write_responses(const std::filesystem::path& path, std::span<const ModelResponse> responses);
std::vector<ModelResponse> read_responses(const std::filesystem::path& path);

// --- mock oracle ---------------------------------------------------------

// Test double with a planted knowledge bias. The chance of a correct answer
// is sigmoid(a_const + b_year * (year - base_year) + c_cov * covariate).
// A model that misses either hallucinates a wrong value or refuses.
struct OracleProfile {
  double a_const = 0.0;
  double b_year = 0.0;
  double c_cov = 0.0;
  // P(wrong value | not correct) at covariate 0.
  double hallucinate_given_known = 0.0;
  // Slope of the hallucination log-odds on the covariate.
  double h_cov = 0.0;
  std::uint64_t noise_seed = 0;
  int base_year = 2000;
  // Planted errors are uniform in [2, 10] x threshold (relative).
  double threshold = 0.10;
  // P(BUY | a BUY/SELL decision) in the recommendation dialogue.
  double buy_given_decision = 0.5;
  // Covariate the mock reads when driven from files.
  std::string covariate = "mcap_log10";

  double p_correct(int year, double covariate_value) const;
  double p_hallucinate(double covariate_value) const;
  void validate() const;
};

OracleProfile profile_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const OracleProfile& profile);

inline constexpr std::string_view kMockTimestamp = "1970-01-01T00:00:00Z";
inline constexpr std::string_view kMockModel = "mock-oracle";

// Deterministic per (noise_seed, prompt_id).
ModelResponse mock_complete(const OracleProfile& profile, const PromptRecord& prompt,
                            const ingest::FactRecord& truth, double covariate);

// Entity data the mock needs to answer one prompt or dialogue.
struct MockCase {
  std::string key;  // prompt_id or conversation id
  ingest::FactRecord truth;
  double covariate = 0.0;
  // Revenue history for the recommendation dialogue (year ascending).
  std::vector<ingest::FactRecord> history;
};

// Answers chat-completion requests in-process, in the real wire format.
// Single-prompt requests are matched by their user text; recommendation
// dialogues by their first user message.
class MockTransport final : public Transport {
 public:
  explicit MockTransport(OracleProfile profile);

  void add_prompt(const PromptRecord& prompt, const ingest::FactRecord& truth, double covariate);
  void add_dialogue(const std::string& first_user_message, MockCase c);

  HttpReply post(const std::string& url, const std::string& body,
                 const Headers& headers) override;

  std::size_t requests() const;

 private:
  OracleProfile profile_;
  std::unordered_map<std::string, std::pair<PromptRecord, MockCase>> prompts_;
  std::unordered_map<std::string, MockCase> dialogues_;
  mutable std::mutex mutex_;
  std::size_t requests_ = 0;
};

// Renders a value the way the mock phrases revenue amounts, e.g. "$12.5 million".
std::string format_millions(double value);

}  // namespace kgap::llmgate
