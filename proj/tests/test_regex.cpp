#include <doctest.h>

#include <chrono>
#include <regex>
#include <string>

#include "sqg/error.hpp"
#include "sqg/random.hpp"
#include "sqg/regex.hpp"

using namespace sqg;

namespace {

std::optional<std::pair<std::size_t, std::size_t>> span_of(const Regex& re, std::string_view text) {
  const auto m = re.search(text);
  if (!m) return std::nullopt;
  return std::make_pair(m->begin, m->end);
}

// Random patterns in the dialect subset that ECMAScript interprets identically.
// Groups are only quantified when their body cannot match the empty string:
// libstdc++ both mis-handles empty loop iterations and backtracks exponentially
// on them, so those shapes are covered by hand-derived cases instead.
class PatternGen {
 public:
  explicit PatternGen(Rng& rng) : rng_(rng) {}

  std::string pattern() {
    std::string p;
    if (rng_.below(6) == 0) p += '^';
    p += alternation(2).text;
    if (rng_.below(6) == 0) p += '$';
    return p;
  }

 private:
  struct Piece {
    std::string text;
    bool nullable;
  };

  Piece alternation(int depth) {
    Piece s = sequence(depth);
    while (rng_.below(4) == 0) {
      const Piece t = sequence(depth);
      s = {s.text + "|" + t.text, s.nullable || t.nullable};
    }
    return s;
  }
  Piece sequence(int depth) {
    Piece s{"", true};
    const auto n = 1 + rng_.below(3);
    for (std::uint64_t i = 0; i < n; ++i) {
      const Piece q = quantified(depth);
      s = {s.text + q.text, s.nullable && q.nullable};
    }
    return s;
  }
  Piece quantified(int depth) {
    Piece a;
    if (depth > 0 && rng_.below(4) == 0) {
      const Piece body = alternation(depth - 1);
      a = {"(?:" + body.text + ")", body.nullable};
    } else {
      a = atom();
    }
    static const char* quants[] = {"", "", "", "*", "+", "?", "{2}", "{1,2}", "{0,3}", "{2,}"};
    std::string q = a.nullable ? "" : quants[rng_.below(10)];
    if (!q.empty() && rng_.below(3) == 0) q += '?';
    const bool can_skip = q.rfind('*', 0) == 0 || q.rfind('?', 0) == 0 || q.rfind("{0", 0) == 0;
    return {a.text + q, a.nullable || can_skip};
  }
  Piece atom() {
    switch (rng_.below(6)) {
      case 0: case 1: case 2: return {std::string(1, "abc"[rng_.below(3)]), false};
      case 3: return {".", false};
      case 4: {
        static const char* classes[] = {"[ab]", "[^a]", "[a-c]", "\\d", "\\w", "\\s", "\\D", "[^\\d ]"};
        return {classes[rng_.below(8)], false};
      }
      default: return {"1", false};
    }
  }

  Rng& rng_;
};

}  // namespace

TEST_CASE("literal and class matching") {
  const auto re = Regex::compile("ab+c");
  CHECK(span_of(re, "xxabbbcyy") == std::make_pair<std::size_t, std::size_t>(2, 7));
  CHECK_FALSE(re.matches("ac"));
  CHECK(Regex::compile("[^0-9]+").search("12ab3")->begin == 2);
  CHECK(Regex::compile("\\d{3}-\\d{4}").matches("call 555-1234 now"));
}

TEST_CASE("anchors apply to the whole searched text") {
  CHECK(Regex::compile("^abc$").matches("abc"));
  CHECK_FALSE(Regex::compile("^abc$").matches("abcd"));
  CHECK(Regex::compile("c$").search("abc")->begin == 2);
  const auto empty_end = Regex::compile("$").search("abc");
  REQUIRE(empty_end);
  CHECK(empty_end->begin == 3);
  CHECK(empty_end->end == 3);
}

TEST_CASE("case-insensitive flag folds ASCII") {
  const auto re = Regex::compile("(?i)drug");
  CHECK(re.matches("DRUG deal"));
  CHECK(re.matches("Drug"));
  CHECK_FALSE(Regex::compile("drug").matches("DRUG"));
}

TEST_CASE("Hangul is matched by code point") {
  const auto re = Regex::compile("마약.");
  const std::string text = "오늘 마약류 뉴스";
  const auto m = re.search(text);
  REQUIRE(m);
  CHECK(text.substr(m->begin, m->end - m->begin) == "마약류");
  CHECK(Regex::compile("^\\w+$").matches("자살"));
  CHECK(Regex::compile("^[가-힣]{2}$").matches("정치"));
  CHECK_FALSE(Regex::compile("^[가-힣]{2}$").matches("정치x"));
}

TEST_CASE("lazy repetition prefers the shortest match") {
  CHECK(span_of(Regex::compile("a+?"), "aaa") == std::make_pair<std::size_t, std::size_t>(0, 1));
  CHECK(span_of(Regex::compile("a+"), "aaa") == std::make_pair<std::size_t, std::size_t>(0, 3));
  CHECK(span_of(Regex::compile("a|ab"), "ab") == std::make_pair<std::size_t, std::size_t>(0, 1));
}

TEST_CASE("unsupported or malformed patterns are rejected") {
  for (const char* bad : {"(a", "a)", "[abc", "*a", "a**", "(?=a)", "(?<n>a)", "\\1", "\\bword",
                          "a{3,2}", "^*", "\\q", "a{1001}", "[z-a]", "[]", "x\\"}) {
    try {
      Regex::compile(bad);
      FAIL("accepted " << bad);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kInvalidPattern);
    }
  }
}

TEST_CASE("escape produces a verbatim literal") {
  const std::string literal = "1+1=2? (yes) [a-z] {3} ^$ | \\ . * 마약";
  const auto re = Regex::compile(regex_escape(literal));
  const std::string text = "prefix " + literal + " suffix";
  const auto m = re.search(text);
  REQUIRE(m);
  CHECK(m->begin == 7);
  CHECK(m->end == 7 + literal.size());
}

TEST_CASE("matching time is linear on adversarial input") {
  // Exponential for backtracking engines.
  const auto re = Regex::compile("(?:a|a)*(?:a|a)*b");
  const std::string text(3000, 'a');
  const auto t0 = std::chrono::steady_clock::now();
  CHECK_FALSE(re.matches(text));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(secs < 2.0);
}

TEST_CASE("loops whose body can match empty follow ECMAScript iteration rules") {
  // An optional iteration that consumes nothing is rejected, so the lazy
  // body is forced to take a character on every extra iteration.
  CHECK(span_of(Regex::compile("1+?(?:.??|1{2}?)+"), "a1c 111") ==
        std::make_pair<std::size_t, std::size_t>(1, 7));
  CHECK(span_of(Regex::compile("(?:1{0,3}|(?:a*c?)+b*?)+"), "b") ==
        std::make_pair<std::size_t, std::size_t>(0, 1));
  CHECK(span_of(Regex::compile("(?:a?)+"), "aab") == std::make_pair<std::size_t, std::size_t>(0, 2));
  CHECK(span_of(Regex::compile("(?:a*)*b"), "aab") == std::make_pair<std::size_t, std::size_t>(0, 3));
  CHECK(span_of(Regex::compile("(?:)*x"), "x") == std::make_pair<std::size_t, std::size_t>(0, 1));
}

TEST_CASE("differential against std::regex ECMAScript on random patterns") {
  Rng rng(20240101);
  PatternGen gen(rng);
  int compared = 0;
  for (int i = 0; i < 3000; ++i) {
    const std::string pattern = gen.pattern();
    const std::regex reference(pattern, std::regex::ECMAScript);
    const auto ours = Regex::compile(pattern);
    for (int t = 0; t < 8; ++t) {
      std::string text;
      const auto len = rng.below(10);
      for (std::uint64_t k = 0; k < len; ++k) text += "abc1 _\n"[rng.below(7)];
      std::smatch m;
      const bool found = std::regex_search(text, m, reference);
      const auto got = span_of(ours, text);
      INFO("pattern=" << pattern << " text=" << text);
      REQUIRE(found == got.has_value());
      if (found) {
        CHECK(got->first == static_cast<std::size_t>(m.position(0)));
        CHECK(got->second == static_cast<std::size_t>(m.position(0) + m.length(0)));
      }
      ++compared;
    }
  }
  CHECK(compared == 24000);
}
