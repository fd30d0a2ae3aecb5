#include "kgap/extract.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <regex>

#include "kgap/common/jsonl.hpp"
#include "kgap/error.hpp"

namespace kgap::extract {

namespace {

// Groups: 1 sign, 2 currency, 3 integer part, 4 fraction, 5 magnitude,
// 6 dollars/usd suffix.
const std::regex& money_regex() {
  static const std::regex re(
      R"((-|\xE2\x88\x92)?(US\$|USD|\$)?\s*(\d{1,3}(?:,\d{3})+(?!\d)|\d+)(\.\d+)?)"
      R"((?:\s*(?:-|\xE2\x80\x93|\xE2\x80\x94|to)\s*\$?\s*(?:\d{1,3}(?:,\d{3})+(?!\d)|\d+)(?:\.\d+)?)?)"
      R"((?:\s*(thousand|million|billion|trillion|bn|mn|mm|tn|k|m|b|t)s?\b)?)"
      R"((?:\s*(dollars|dollar|usd)\b)?)",
      std::regex::ECMAScript | std::regex::icase | std::regex::optimize);
  return re;
}

const std::regex& season_join_regex() {
  static const std::regex re(
      R"(\b(?:19|20)\d{2}\s*(?:-|\xE2\x80\x93|\xE2\x80\x94|/)\s*\d{2,4}\b)",
      std::regex::ECMAScript | std::regex::optimize);
  return re;
}

const std::regex& season_year_regex() {
  static const std::regex re(
      R"(\b(?:19|20)\d{2}\b(?=(?:\s+[^\s\d.,;:!?]+){0,3}\s+seasons?\b))",
      std::regex::ECMAScript | std::regex::icase | std::regex::optimize);
  return re;
}

const std::regex& plain_number_regex() {
  static const std::regex re(R"((\d{1,3}(?:,\d{3})+(?!\d)|\d+)(\.\d+)?(\s*(?:points?|pts)\b)?)",
                             std::regex::ECMAScript | std::regex::icase | std::regex::optimize);
  return re;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

double parse_number(std::string_view integer, std::string_view fraction) {
  std::string digits;
  digits.reserve(integer.size() + fraction.size());
  for (char c : integer) {
    if (c != ',') digits.push_back(c);
  }
  digits.append(fraction);
  double v = 0.0;
  std::from_chars(digits.data(), digits.data() + digits.size(), v);
  return v;
}

bool ends_with_any(std::string_view text, std::initializer_list<std::string_view> suffixes) {
  for (auto s : suffixes) {
    if (text.ends_with(s)) return true;
  }
  return false;
}

// Another currency written just before position `at` (after trimming blanks).
bool foreign_prefix(std::string_view text, std::size_t at) {
  std::string_view before = text.substr(0, at);
  while (!before.empty() && (before.back() == ' ' || before.back() == '\t')) {
    before.remove_suffix(1);
  }
  if (ends_with_any(before, {"\xE2\x82\xAC", "\xC2\xA3", "\xC2\xA5", "\xE2\x82\xB9"})) {
    return true;
  }
  const auto tail = lower(before.substr(before.size() >= 3 ? before.size() - 3 : 0));
  if (tail.size() == 3 && (before.size() == 3 || !is_alpha(before[before.size() - 4]))) {
    for (std::string_view code : {"eur", "gbp", "jpy", "cny", "rmb", "inr", "chf"}) {
      if (tail == code) return true;
    }
  }
  return false;
}

bool foreign_suffix(std::string_view text, std::size_t at) {
  std::string_view after = text.substr(at);
  while (!after.empty() && (after.front() == ' ' || after.front() == '\t')) {
    after.remove_prefix(1);
  }
  const auto head = lower(after.substr(0, 8));
  for (std::string_view word : {"euro", "pound", "yen", "yuan", "rupee", "eur", "gbp", "jpy",
                                "cny", "rmb", "franc"}) {
    if (head.starts_with(word)) {
      const auto n = word.size();
      if (word.size() >= 4 || head.size() == n || !is_alpha(head[n])) return true;
    }
  }
  return false;
}

double magnitude_scale_millions(std::string_view magnitude, double value) {
  const auto m = lower(magnitude);
  if (m.empty()) return value / 1e6;
  if (m == "thousand" || m == "k") return value / 1000.0;
  if (m == "million" || m == "m" || m == "mn" || m == "mm") return value;
  if (m == "billion" || m == "b" || m == "bn") return value * 1000.0;
  if (m == "trillion" || m == "t" || m == "tn") return value * 1e6;
  return value;
}

struct Located {
  double value = 0.0;
  Span span;
};

std::optional<Located> find_money(std::string_view text) {
  const auto& re = money_regex();
  const char* base = text.data();
  for (std::cregex_iterator it(base, base + text.size(), re), end; it != end; ++it) {
    const auto& m = *it;
    const bool has_currency = m[2].matched;
    const std::string_view magnitude =
        m[5].matched ? std::string_view(m[5].first, m[5].length()) : std::string_view{};
    const bool word_magnitude = magnitude.size() >= 7;  // thousand/million/billion/trillion
    const bool dollars = m[6].matched;
    if (!has_currency && !word_magnitude && !dollars) continue;

    std::size_t begin = static_cast<std::size_t>(m.position(0));
    const std::size_t stop = begin + static_cast<std::size_t>(m.length(0));
    while (begin < stop && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;

    if (has_currency) {
      const auto cur = static_cast<std::size_t>(m.position(2));
      // "HK$", "A$", "C$" and friends.
      if (std::string_view(m[2].first, m[2].length()) == "$" && cur > 0 && is_alpha(text[cur - 1])) {
        continue;
      }
    }
    if (foreign_prefix(text, begin) || foreign_suffix(text, stop)) continue;

    double value = parse_number(std::string_view(m[3].first, m[3].length()),
                                m[4].matched ? std::string_view(m[4].first, m[4].length())
                                             : std::string_view{});
    value = magnitude_scale_millions(magnitude, value);
    if (m[1].matched) value = -value;
    return Located{value, {begin, stop}};
  }
  return std::nullopt;
}

}  // namespace

ExtractedAnswer extract_money(std::string_view raw_text) {
  ExtractedAnswer out;
  if (auto hit = find_money(raw_text)) {
    out.value = hit->value;
    out.matched_span = hit->span;
    out.refusal = false;
  }
  return out;
}

bool detect_refusal(std::string_view raw_text) { return !extract_money(raw_text).value; }

std::optional<std::string_view> refusal_phrase(std::string_view raw_text) {
  static constexpr std::array<std::string_view, 12> kPhrases{
      "i don't have",  "i do not have", "i cannot",         "i can't",
      "i'm sorry",     "i am sorry",    "unable to",        "not available",
      "i don't know",  "i do not know", "no information",   "not publicly available"};
  const auto text = lower(raw_text);
  std::optional<std::string_view> best;
  std::size_t best_pos = std::string::npos;
  for (auto phrase : kPhrases) {
    const auto pos = text.find(phrase);
    if (pos < best_pos) {
      best_pos = pos;
      best = phrase;
    }
  }
  return best;
}

std::string_view to_string(Recommendation r) {
  switch (r) {
    case Recommendation::buy: return "BUY";
    case Recommendation::sell: return "SELL";
    case Recommendation::dnk: return "DNK";
  }
  return "DNK";
}

Recommendation parse_recommendation(std::string_view raw_text) {
  std::size_t i = 0;
  while (i < raw_text.size()) {
    if (!is_alpha(raw_text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < raw_text.size() && is_alpha(raw_text[j])) ++j;
    const auto word = lower(raw_text.substr(i, j - i));
    if (word == "buy") return Recommendation::buy;
    if (word == "sell") return Recommendation::sell;
    if (word == "dnk") return Recommendation::dnk;
    i = j;
  }
  throw ParseError(fmt::format("unparseable recommendation: '{}'", raw_text.substr(0, 80)));
}

namespace {

std::optional<Located> find_plain_number(std::string_view raw_text) {
  std::string masked(raw_text);
  auto mask = [&](const std::regex& re) {
    const char* base = masked.data();
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (std::cregex_iterator it(base, base + masked.size(), re), end; it != end; ++it) {
      ranges.emplace_back(static_cast<std::size_t>(it->position(0)),
                          static_cast<std::size_t>(it->length(0)));
    }
    for (auto [pos, len] : ranges) {
      std::fill_n(masked.begin() + static_cast<std::ptrdiff_t>(pos), len, ' ');
    }
  };
  mask(season_join_regex());
  mask(season_year_regex());

  const auto& re = plain_number_regex();
  const char* base = masked.data();
  std::optional<Located> first;
  for (std::cregex_iterator it(base, base + masked.size(), re), end; it != end; ++it) {
    const auto& m = *it;
    const double v = parse_number(std::string_view(m[1].first, m[1].length()),
                                  m[2].matched ? std::string_view(m[2].first, m[2].length())
                                               : std::string_view{});
    const auto begin = static_cast<std::size_t>(m.position(0));
    const Located hit{v, {begin, begin + static_cast<std::size_t>(m.length(0))}};
    if (m[3].matched) return hit;
    if (!first) first = hit;
  }
  return first;
}

}  // namespace

std::optional<double> extract_plain_number(std::string_view raw_text) {
  if (auto hit = find_plain_number(raw_text)) return hit->value;
  return std::nullopt;
}

ExtractedAnswer extract_points(std::string_view raw_text) {
  ExtractedAnswer out;
  if (auto hit = find_plain_number(raw_text)) {
    out.value = hit->value;
    out.matched_span = hit->span;
    out.refusal = false;
  }
  return out;
}

std::vector<ExtractedAnswer> extract_all(std::span<const ResponseText> responses, Mode mode) {
  std::vector<ExtractedAnswer> out;
  out.reserve(responses.size());
  for (const auto& r : responses) {
    auto a = mode == Mode::money ? extract_money(r.raw_text) : extract_points(r.raw_text);
    a.prompt_id = r.prompt_id;
    out.push_back(std::move(a));
  }
  return out;
}

void write_answers(const std::filesystem::path& path, std::span<const ExtractedAnswer> answers) {
  std::vector<nlohmann::ordered_json> rows;
  rows.reserve(answers.size());
  for (const auto& a : answers) {
    nlohmann::ordered_json j{{"prompt_id", a.prompt_id}};
    j["value"] = a.value ? nlohmann::ordered_json(*a.value) : nlohmann::ordered_json(nullptr);
    j["matched_span"] = a.matched_span
                            ? nlohmann::ordered_json::array({a.matched_span->begin,
                                                             a.matched_span->end})
                            : nlohmann::ordered_json(nullptr);
    j["refusal"] = a.refusal;
    rows.push_back(std::move(j));
  }
  jsonl::write(path, rows);
}

std::vector<ExtractedAnswer> read_answers(const std::filesystem::path& path) {
  std::vector<ExtractedAnswer> out;
  for (const auto& j : jsonl::read(path)) {
    try {
      ExtractedAnswer a;
      a.prompt_id = j.at("prompt_id").get<std::string>();
      if (!j.at("value").is_null()) a.value = j.at("value").get<double>();
      if (!j.at("matched_span").is_null()) {
        const auto& s = j.at("matched_span");
        a.matched_span = Span{s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()};
      }
      a.refusal = j.at("refusal").get<bool>();
      if (a.value.has_value() != a.matched_span.has_value() || a.refusal == a.value.has_value()) {
        throw DataError("inconsistent answer record for " + a.prompt_id);
      }
      out.push_back(std::move(a));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace kgap::extract
