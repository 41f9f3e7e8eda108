#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sqg {

// Linear-time regular expressions (Thompson NFA simulated as a Pike VM).
//
// Dialect, over UTF-8 code points:
//   literals, '.', [...] / [^...] classes with ranges, \d \w \s and negations,
//   ^ $ (anchor to the text being matched), ( ) and (?: ) grouping, |,
//   * + ? {n} {n,} {n,m} with an optional trailing '?' for lazy repetition,
//   and a leading (?i) for ASCII case-insensitive matching.
// Not supported (rejected at compile time): backreferences, lookaround,
// word boundaries, named groups.
//
// \w matches [0-9A-Za-z_] plus Hangul syllables and jamo.
// Search semantics are leftmost-first, the same as Perl/ECMAScript engines.
class Regex {
 public:
  struct Match {
    std::size_t begin = 0;  // byte offsets into the searched text
    std::size_t end = 0;
  };

  // Throws Error(kInvalidPattern) with the reason.
  static Regex compile(std::string_view pattern);

  std::optional<Match> search(std::string_view text) const;
  bool matches(std::string_view text) const { return search(text).has_value(); }

  const std::string& pattern() const { return pattern_; }
  std::size_t program_size() const { return program_.size(); }

  struct Range {
    char32_t lo;
    char32_t hi;
  };
  enum class Op : std::uint8_t { kClass, kAny, kSplit, kJmp, kBol, kEol, kMatch };
  struct Inst {
    Op op;
    bool negated = false;
    int x = 0;  // kSplit: preferred branch; kJmp: target; kClass: first range
    int y = 0;  // kSplit: other branch;     kClass: range count
  };

 private:
  std::string pattern_;
  std::vector<Inst> program_;
  std::vector<Range> ranges_;
};

// Escapes every metacharacter so the result matches `literal` verbatim.
std::string regex_escape(std::string_view literal);

// Decodes one code point at `pos`; invalid bytes decode as themselves with length 1.
char32_t decode_utf8(std::string_view text, std::size_t pos, std::size_t* length);

}  // namespace sqg
