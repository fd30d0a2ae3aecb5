#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace kgap::extract {

struct Span {
  std::size_t begin = 0;  // byte offsets, half-open
  std::size_t end = 0;

  friend bool operator==(const Span&, const Span&) = default;
};

// value and matched_span are both set or both empty; refusal == !value.
struct ExtractedAnswer {
  std::string prompt_id;
  std::optional<double> value;
  std::optional<Span> matched_span;
  bool refusal = true;
};

// First US-dollar amount in the text, in millions of USD.
//
// Accepted: an optional sign, an optional "$" / "US$" / "USD", a number with
// optional thousands separators and decimals, an optional range tail
// ("$1.2-1.4 billion" keeps the first endpoint), an optional magnitude
// (thousand/million/billion/trillion or k/m/mn/mm/b/bn/t/tn) and an optional
// "dollars"/"USD" suffix. A candidate counts as money when it carries a
// currency marker, a spelled-out magnitude word or a "dollars" suffix, so
// bare numbers such as years are skipped. Amounts marked with another
// currency are rejected. With no magnitude the number is taken as dollars.
ExtractedAnswer extract_money(std::string_view raw_text);

// True iff extract_money finds nothing.
bool detect_refusal(std::string_view raw_text);

// Diagnostic only: the first stock refusal phrase found, if any.
std::optional<std::string_view> refusal_phrase(std::string_view raw_text);

enum class Recommendation { buy, sell, dnk };

std::string_view to_string(Recommendation r);

// Earliest whole-word, case-insensitive BUY / SELL / DNK. ParseError when
// none occurs.
Recommendation parse_recommendation(std::string_view raw_text);

// First bare number, unscaled, for point totals. Season references are
// masked first: a year 1900-2099 joined to another number by "-", en dash,
// em dash or "/" ("1995-96"), and a year followed by "season" within a few
// words ("the 1995 La Liga season"). A number directly followed by
// "points"/"pts" wins over earlier numbers.
std::optional<double> extract_plain_number(std::string_view raw_text);

ExtractedAnswer extract_points(std::string_view raw_text);

enum class Mode { money, points };

struct ResponseText {
  std::string prompt_id;
  std::string raw_text;
};

std::vector<ExtractedAnswer> extract_all(std::span<const ResponseText> responses, Mode mode);

void write_answers(const std::filesystem::path& path, std::span<const ExtractedAnswer> answers);
std::vector<ExtractedAnswer> read_answers(const std::filesystem::path& path);

}  // namespace kgap::extract
