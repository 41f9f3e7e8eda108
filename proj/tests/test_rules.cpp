#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "sqg/error.hpp"
#include "sqg/random.hpp"
#include "sqg/rules.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace sqg;

namespace {

Rule blacklist(std::string id, std::string pattern, Label category) {
  Rule r;
  r.id = std::move(id);
  r.kind = RuleKind::kBlacklist;
  r.pattern = std::move(pattern);
  r.category = category;
  return r;
}

Rule whitelist(std::string id, std::string pattern) {
  Rule r;
  r.id = std::move(id);
  r.kind = RuleKind::kWhitelist;
  r.pattern = std::move(pattern);
  return r;
}

ErrorCode compile_error(const std::vector<Rule>& rules) {
  try {
    compile_rules(rules, 1);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("compiled without error");
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST_CASE("sentence splitting keeps terminators and drops blanks") {
  const SentenceSplitter s;
  const auto parts = s.split("  마약 어디서 사?? 그냥 궁금해… 정말!\n\n끝 ");
  REQUIRE(parts.size() == 4);
  CHECK(parts[0] == "마약 어디서 사??");
  CHECK(parts[1] == "그냥 궁금해…");
  CHECK(parts[2] == "정말!");
  CHECK(parts[3] == "끝");
  CHECK(s.split("no terminator at all").size() == 1);
  CHECK(s.split("   ").empty());
  const SentenceSplitter semicolons(";");
  CHECK(semicolons.split("a. b; c").size() == 2);
}

TEST_CASE("compile validates the whole batch") {
  CHECK(compile_rules(std::vector<Rule>{whitelist("w", "뜻")}, 3).size() == 1);
  CHECK(compile_error({whitelist("w", "(")}) == ErrorCode::kInvalidPattern);
  CHECK(compile_error({whitelist("x", "a"), blacklist("x", "b", Label::kPrivacy)}) ==
        ErrorCode::kDuplicateRuleId);
  Rule no_category = blacklist("b", "x", Label::kPrivacy);
  no_category.category.reset();
  CHECK(compile_error({no_category}) == ErrorCode::kCategoryMissing);
  CHECK(compile_error({blacklist("b", "x", Label::kSafe)}) == ErrorCode::kCategoryMissing);
  Rule wl_with_category = whitelist("w", "x");
  wl_with_category.category = Label::kPrivacy;
  CHECK(compile_error({wl_with_category}) == ErrorCode::kInvalidArgument);
  // one bad rule among good ones still fails everything
  CHECK(compile_error({whitelist("a", "ok"), whitelist("b", "[")}) == ErrorCode::kInvalidPattern);
}

TEST_CASE("disabled rules are ignored entirely") {
  Rule off = blacklist("off", "(", Label::kPrivacy);  // invalid, but disabled
  off.enabled = false;
  const auto set = compile_rules(std::vector<Rule>{off, whitelist("on", "x")}, 1);
  CHECK(set.size() == 1);
  CHECK(set.source_ids() == std::vector<std::string>{"on"});
}

TEST_CASE("matches are reported per sentence") {
  const auto set = compile_rules(std::vector<Rule>{blacklist("drug", "마약", Label::kFelonyCrimes)}, 1);
  CHECK(match_rules(CompiledRuleSet{}, "마약").empty());
  const auto one = match_rules(set, "오늘 날씨 어때? 마약 구매 방법");
  REQUIRE(one.size() == 1);
  CHECK(one[0].sentence_index == 1);
  CHECK(one[0].begin == 0);
  CHECK(one[0].end == std::string("마약").size());
  CHECK(match_rules(set, "마약 뜻? 마약 처벌.").size() == 2);

  // Anchors bind to a sentence, not the whole query.
  const auto anchored = compile_rules(std::vector<Rule>{whitelist("w", "^뜻")}, 1);
  CHECK(match_rules(anchored, "마약. 뜻 알려줘").size() == 1);
  CHECK(match_rules(anchored, "마약 뜻").empty());
}

TEST_CASE("concatenated sentences match as the union of their parts") {
  const auto set = compile_rules(
      std::vector<Rule>{whitelist("a", "^a"), blacklist("b", "b\\.$", Label::kProfanity), whitelist("c", "c")}, 1);
  const std::vector<std::string> sentences = {"a b.", "b c.", "c a.", "ab."};
  for (const auto& x : sentences) {
    for (const auto& y : sentences) {
      const auto joined = match_rules(set, x + " " + y);
      const auto left = match_rules(set, x);
      auto right = match_rules(set, y);
      for (auto& m : right) m.sentence_index += 1;
      RuleMatches expected = left;
      expected.insert(expected.end(), right.begin(), right.end());
      CHECK(joined == expected);
    }
  }
}

TEST_CASE("adjustment precedence examples") {
  const RuleMatch wl{"w", RuleKind::kWhitelist, std::nullopt, 0, 0, 1};
  const RuleMatch felony{"f", RuleKind::kBlacklist, Label::kFelonyCrimes, 0, 0, 1};
  const RuleMatch privacy{"p", RuleKind::kBlacklist, Label::kPrivacy, 0, 0, 1};
  CHECK(apply_adjustment(Label::kSafe, {}) == Adjustment{Label::kSafe, DecisionSource::kModel});
  CHECK(apply_adjustment(Label::kDiscrimination, {wl}) ==
        Adjustment{Label::kSafe, DecisionSource::kWhitelistOverride});
  CHECK(apply_adjustment(Label::kSafe, {wl, felony}) ==
        Adjustment{Label::kFelonyCrimes, DecisionSource::kBlacklistOverride});
  CHECK(apply_adjustment(Label::kSafe, {privacy, felony}) ==
        Adjustment{Label::kFelonyCrimes, DecisionSource::kBlacklistOverride});
  CHECK(apply_adjustment(Label::kSafe, {wl}) == Adjustment{Label::kSafe, DecisionSource::kModel});
}

TEST_CASE("rule pipeline agrees with a brute-force precedence oracle") {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto t = testing::run_precedence_trial(rng);
    INFO("trial " << trial << " text=" << t.text);
    CHECK(t.match_count_ok);
    CHECK(t.adjustment_ok);
    CHECK(t.disabled_equals_deleted);
  }
}

TEST_CASE("training export from rule exemplars") {
  Rule wl = whitelist("w", "마약 뜻");
  wl.exemplars = {"마약 뜻"};
  Rule bl = blacklist("b", "마약", Label::kFelonyCrimes);
  bl.exemplars = {"마약 구매", "마약 판매", "마약 가격"};
  const Rule bare = whitelist("bare", "x");
  const auto out = export_training_from_rules(std::vector<Rule>{wl, bl, bare});
  REQUIRE(out.examples.size() == 4);
  CHECK(out.examples[0] == LabeledExample{"마약 뜻", Label::kSafe, ExampleOrigin::kRuleDerived});
  for (std::size_t i = 1; i < 4; ++i) {
    CHECK(out.examples[i].label == Label::kFelonyCrimes);
    CHECK(out.examples[i].origin == ExampleOrigin::kRuleDerived);
  }
  CHECK(out.skipped_rule_ids == std::vector<std::string>{"bare"});
}

TEST_CASE("rule files round trip with a versioned header") {
  testing::TempDir dir;
  Rule bl = blacklist("b", "마약|대마", Label::kFelonyCrimes);
  bl.exemplars = {"대마 구매"};
  bl.author = "ops";
  bl.created_at = parse_timestamp("2024-03-01T09:30:00Z");
  Rule wl = whitelist("w", "^뜻");
  wl.enabled = false;
  write_rule_file(dir.file("rules.json"), std::vector<Rule>{bl, wl});
  const auto doc = nlohmann::json::parse(testing::read_file(dir.file("rules.json")));
  CHECK(doc["format"] == "sqg-rules");
  CHECK(doc["version"] == 1);
  const auto back = read_rule_file(dir.file("rules.json"));
  REQUIRE(back.size() == 2);
  CHECK(back[0].pattern == bl.pattern);
  CHECK(back[0].category == Label::kFelonyCrimes);
  CHECK(back[0].exemplars == bl.exemplars);
  CHECK(back[0].created_at == bl.created_at);
  CHECK_FALSE(back[1].enabled);
  CHECK_FALSE(back[1].category.has_value());

  CHECK_THROWS_AS(rules_from_document(nlohmann::json{{"rules", nlohmann::json::array()}}), Error);
}

TEST_CASE("rule book swaps atomically and keeps the old set on error") {
  RuleBook book;
  CHECK(book.version() == 0);
  book.compile(std::vector<Rule>{whitelist("a", "x")});
  CHECK(book.version() == 1);
  CHECK_THROWS_AS(book.compile(std::vector<Rule>{whitelist("a", "(")}), Error);
  CHECK(book.version() == 1);
  CHECK(book.active()->source_ids() == std::vector<std::string>{"a"});

  // Readers racing compiles always observe a set whose contents match its version.
  CHECK(testing::rulebook_stress(300) == 0);
}
