#include <fmt/format.h>

#include <sstream>

#include "kgap/error.hpp"
#include "kgap/llmgate.hpp"

namespace kgap::llmgate {

ResponseCache::ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());

  if (std::filesystem::exists(path_)) {
    std::string text;
    {
      std::ifstream in(path_, std::ios::binary);
      if (!in) throw IoError("cannot read cache " + path_.string());
      std::ostringstream buf;
      buf << in.rdbuf();
      text = buf.str();
    }
    // Drop a torn final line left by an interrupted writer.
    const auto last_nl = text.rfind('\n');
    const std::size_t complete = last_nl == std::string::npos ? 0 : last_nl + 1;
    if (complete != text.size()) {
      std::filesystem::resize_file(path_, complete);
      text.resize(complete);
    }

    std::size_t pos = 0;
    std::size_t lineno = 0;
    while (pos < text.size()) {
      const auto nl = text.find('\n', pos);
      const std::string_view line(text.data() + pos, nl - pos);
      pos = nl + 1;
      ++lineno;
      if (line.empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        entries_[j.at("key").get<std::string>()] =
            CachedReply{j.at("raw_text").get<std::string>(), j.at("model").get<std::string>(),
                        j.at("finished").get<bool>(), j.at("timestamp").get<std::string>()};
      } catch (const nlohmann::json::exception& e) {
        throw DataError(fmt::format("{}:{}: corrupt cache entry: {}", path_.string(), lineno,
                                    e.what()));
      }
    }
  }

  out_.open(path_, std::ios::binary | std::ios::app);
  if (!out_) throw IoError("cannot open cache " + path_.string() + " for append");
}

std::optional<CachedReply> ResponseCache::find(const std::string& key) const {
  std::shared_lock lock(mutex_);
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ResponseCache::store(const std::string& key, const CachedReply& reply) {
  nlohmann::ordered_json j{{"key", key},
                           {"raw_text", reply.raw_text},
                           {"model", reply.model},
                           {"finished", reply.finished},
                           {"timestamp", reply.timestamp}};
  const std::string line = j.dump() + "\n";

  std::unique_lock lock(mutex_);
  if (entries_.contains(key)) return;
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  out_.flush();
  if (!out_) throw IoError("cache write failed for " + path_.string());
  entries_.emplace(key, reply);
}

std::size_t ResponseCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

}  // namespace kgap::llmgate
