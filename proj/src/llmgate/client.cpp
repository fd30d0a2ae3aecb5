#include <httplib.h>
#include <fmt/format.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <thread>

#include "kgap/common/hash.hpp"
#include "kgap/common/jsonl.hpp"
#include "kgap/error.hpp"
#include "kgap/llmgate.hpp"

namespace kgap::llmgate {

void QueryParams::validate() const {
  if (model.empty()) throw ConfigError("query: model is empty");
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
    throw ConfigError("query: temperature must be >= 0");
  }
  if (max_tokens < 1) throw ConfigError("query: max_tokens must be >= 1");
  if (endpoint.empty()) throw ConfigError("query: endpoint is empty");
}

std::chrono::milliseconds RetryPolicy::delay_before(int attempt) const {
  // attempt is 1-based; no wait before the first.
  if (attempt <= 1) return std::chrono::milliseconds(0);
  const double ms =
      static_cast<double>(base_delay.count()) * std::pow(multiplier, attempt - 2);
  return std::chrono::milliseconds(
      static_cast<long long>(std::min(ms, static_cast<double>(max_delay.count()))));
}

std::string utc_timestamp_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::ordered_json request_body(const QueryParams& params, const Conversation& conversation) {
  auto messages = nlohmann::ordered_json::array();
  for (const auto& m : conversation.messages()) {
    messages.push_back({{"role", promptgen::to_string(m.role)}, {"content", m.content}});
  }
  return {{"model", params.model},
          {"messages", std::move(messages)},
          {"temperature", params.temperature},
          {"max_tokens", params.max_tokens}};
}

ParsedReply parse_reply(std::string_view body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(fmt::format("reply is not JSON: {}", e.what()));
  }
  if (!j.is_object() || !j.contains("choices") || !j["choices"].is_array() ||
      j["choices"].empty()) {
    throw ProtocolError("reply has no choices");
  }
  const auto& choice = j["choices"][0];
  if (!choice.is_object() || !choice.contains("message") || !choice["message"].is_object()) {
    throw ProtocolError("choices[0] has no message");
  }
  const auto& content = choice["message"].value("content", nlohmann::json());
  ParsedReply reply;
  if (content.is_string()) {
    reply.text = content.get<std::string>();
  } else if (!content.is_null()) {
    throw ProtocolError("choices[0].message.content is not a string");
  }
  if (choice.contains("finish_reason") && choice["finish_reason"].is_string()) {
    reply.finished = choice["finish_reason"].get<std::string>() != "length";
  }
  return reply;
}

std::string cache_key(const QueryParams& params, const Conversation& conversation) {
  nlohmann::ordered_json material{{"endpoint", params.endpoint}};
  const auto body = request_body(params, conversation);
  for (const auto& [k, v] : body.items()) material[k] = v;
  return sha256_hex(material.dump());
}

HttpTransport::HttpTransport(std::chrono::seconds timeout) : timeout_(timeout) {}

HttpReply HttpTransport::post(const std::string& url, const std::string& body,
                              const Headers& headers) {
  // Split "scheme://host[:port]" from the path.
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint is not a URL: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  const std::string origin = url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

  httplib::Client client(origin);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);

  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  auto res = client.Post(path, h, body, "application/json");
  if (!res) {
    throw TransportError(fmt::format("POST {} failed: {}", url, httplib::to_string(res.error())));
  }
  return {res->status, res->body};
}

ChatClient::ChatClient(QueryParams params, std::shared_ptr<Transport> transport,
                       ResponseCache* cache, RetryPolicy retry, Sleeper sleeper)
    : params_(std::move(params)),
      transport_(std::move(transport)),
      cache_(cache),
      retry_(retry),
      sleeper_(std::move(sleeper)) {
  params_.validate();
  if (!transport_) throw ConfigError("query: no transport");
  if (retry_.attempts < 1) throw ConfigError("query: retry attempts must be >= 1");
  if (!sleeper_) {
    sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
  if (!params_.api_key_env.empty()) {
    const char* key = std::getenv(params_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw ConfigError(
          fmt::format("environment variable {} is not set", params_.api_key_env));
    }
    api_key_ = key;
  }
}

ModelResponse ChatClient::complete(const Conversation& conversation,
                                   std::string prompt_id) const {
  const auto key = cache_key(params_, conversation);
  if (cache_) {
    if (auto hit = cache_->find(key)) {
      return {std::move(prompt_id), hit->raw_text, hit->model, hit->finished, true,
              hit->timestamp};
    }
  }

  const std::string body = request_body(params_, conversation).dump();
  Headers headers{{"Accept", "application/json"}};
  if (!api_key_.empty()) headers.emplace_back("Authorization", "Bearer " + api_key_);

  std::string last_error;
  for (int attempt = 1; attempt <= retry_.attempts; ++attempt) {
    if (attempt > 1) sleeper_(retry_.delay_before(attempt));
    HttpReply reply;
    try {
      reply = transport_->post(params_.endpoint, body, headers);
    } catch (const TransportError& e) {
      last_error = e.what();
      continue;
    }
    if (reply.status == 429 || reply.status >= 500) {
      last_error = fmt::format("HTTP {}", reply.status);
      continue;
    }
    if (reply.status < 200 || reply.status >= 300) {
      throw TransportError(fmt::format("HTTP {} from {}: {}", reply.status, params_.endpoint,
                                       reply.body.substr(0, 200)));
    }
    const auto parsed = parse_reply(reply.body);
    ModelResponse response{std::move(prompt_id), parsed.text, params_.model, parsed.finished,
                           false, utc_timestamp_now()};
    if (cache_) {
      cache_->store(key, {response.raw_text, response.model, response.finished,
                          response.timestamp});
    }
    return response;
  }
  throw TransportError(fmt::format("giving up after {} attempts: {}", retry_.attempts,
                                   last_error));
}

namespace {

template <typename Item, typename Fn>
std::vector<BatchResult> run_pool(std::span<const Item> items, std::size_t parallelism,
                                  Fn&& work) {
  if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
  std::vector<BatchResult> results(items.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (;;) {
      const auto i = next.fetch_add(1);
      if (i >= items.size()) return;
      auto& slot = results[i];
      try {
        auto [id, response] = work(items[i]);
        slot.prompt_id = std::move(id);
        slot.response = std::move(response);
      } catch (const std::exception& e) {
        slot.prompt_id = work.id_of(items[i]);
        slot.error = e.what();
      }
    }
  };

  const auto n_workers = std::min(parallelism, items.size());
  {
    std::vector<std::jthread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  return results;
}

}  // namespace

std::vector<BatchResult> ChatClient::complete_batch(std::span<const PromptRecord> prompts,
                                                    std::size_t parallelism) const {
  struct Work {
    const ChatClient* self;
    std::pair<std::string, ModelResponse> operator()(const PromptRecord& p) const {
      return {p.prompt_id, self->complete(Conversation::single_user(p.text), p.prompt_id)};
    }
    std::string id_of(const PromptRecord& p) const { return p.prompt_id; }
  };
  return run_pool(prompts, parallelism, Work{this});
}

std::vector<BatchResult> ChatClient::complete_conversations(
    std::span<const std::pair<std::string, Conversation>> conversations,
    std::size_t parallelism) const {
  using Item = std::pair<std::string, Conversation>;
  struct Work {
    const ChatClient* self;
    std::pair<std::string, ModelResponse> operator()(const Item& c) const {
      return {c.first, self->complete(c.second, c.first)};
    }
    std::string id_of(const Item& c) const { return c.first; }
  };
  return run_pool(conversations, parallelism, Work{this});
}

void write_responses(const std::filesystem::path& path,
                     std::span<const ModelResponse> responses) {
  std::vector<nlohmann::ordered_json> rows;
  rows.reserve(responses.size());
  for (const auto& r : responses) {
    rows.push_back({{"prompt_id", r.prompt_id},
                    {"model", r.model},
                    {"raw_text", r.raw_text},
                    {"finished", r.finished},
                    {"retrieved_from_cache", r.retrieved_from_cache},
                    {"timestamp", r.timestamp}});
  }
  jsonl::write(path, rows);
}

std::vector<ModelResponse> read_responses(const std::filesystem::path& path) {
  std::vector<ModelResponse> out;
  for (const auto& j : jsonl::read(path)) {
    try {
      out.push_back({j.at("prompt_id").get<std::string>(), j.at("raw_text").get<std::string>(),
                     j.at("model").get<std::string>(), j.at("finished").get<bool>(),
                     j.at("retrieved_from_cache").get<bool>(),
                     j.at("timestamp").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace kgap::llmgate
