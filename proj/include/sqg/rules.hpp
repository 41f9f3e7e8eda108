#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sqg/classifier.hpp"
#include "sqg/regex.hpp"
#include "sqg/taxonomy.hpp"
#include "sqg/time.hpp"

namespace sqg {

enum class RuleKind { kWhitelist, kBlacklist };
std::string_view rule_kind_name(RuleKind kind);
RuleKind parse_rule_kind(std::string_view name);

struct Rule {
  std::string id;
  RuleKind kind = RuleKind::kBlacklist;
  std::string pattern;
  std::optional<Label> category;  // blacklist only, never safe
  std::vector<std::string> exemplars;
  bool enabled = true;
  std::string author;
  Timestamp created_at{};
};

struct CompiledRule {
  std::string id;
  RuleKind kind;
  std::optional<Label> category;
  Regex regex;
};

// Immutable once built; only enabled rules are present.
class CompiledRuleSet {
 public:
  CompiledRuleSet() = default;
  CompiledRuleSet(std::uint64_t version, std::vector<CompiledRule> rules)
      : version_(version), rules_(std::move(rules)) {}

  std::uint64_t version() const { return version_; }
  std::span<const CompiledRule> rules() const { return rules_; }
  std::size_t size() const { return rules_.size(); }
  std::vector<std::string> source_ids() const;

 private:
  std::uint64_t version_ = 0;
  std::vector<CompiledRule> rules_;
};

// Validates and compiles every enabled rule; disabled rules are ignored entirely.
// Atomic: the first problem throws kInvalidPattern, kDuplicateRuleId,
// kCategoryMissing or kInvalidArgument and nothing is produced.
CompiledRuleSet compile_rules(std::span<const Rule> rules, std::uint64_t version);

// Splits after runs of terminator characters (default . ! ? … and newline).
// Sentences keep their terminators and are trimmed of surrounding whitespace;
// blank sentences are dropped.
class SentenceSplitter {
 public:
  static constexpr std::string_view kDefaultTerminators = ".!?\xE2\x80\xA6\n";

  explicit SentenceSplitter(std::string_view terminators = kDefaultTerminators);

  std::vector<std::string_view> split(std::string_view text) const;
  const std::string& terminators() const { return terminators_utf8_; }

 private:
  bool is_terminator(char32_t c) const;

  std::string terminators_utf8_;
  std::vector<char32_t> terminators_;
};

struct RuleMatch {
  std::string rule_id;
  RuleKind kind;
  std::optional<Label> category;
  std::size_t sentence_index;
  std::size_t begin;  // byte span within the trimmed sentence
  std::size_t end;

  friend bool operator==(const RuleMatch&, const RuleMatch&) = default;
};

using RuleMatches = std::vector<RuleMatch>;

// One entry per (rule, sentence) pair that matches, ordered by sentence then rule.
RuleMatches match_rules(const CompiledRuleSet& ruleset, std::string_view text,
                        const SentenceSplitter& splitter = SentenceSplitter());

enum class DecisionSource { kModel, kWhitelistOverride, kBlacklistOverride };
std::string_view source_name(DecisionSource source);
DecisionSource parse_source(std::string_view name);

struct Adjustment {
  Label label;
  DecisionSource source;

  friend bool operator==(const Adjustment&, const Adjustment&) = default;
};

// Blacklist beats whitelist; among blacklist hits the lowest ordinal wins.
// A whitelist hit only changes a sensitive prediction.
Adjustment apply_adjustment(Label predicted, const RuleMatches& matches);
inline Adjustment apply_adjustment(const Prediction& prediction, const RuleMatches& matches) {
  return apply_adjustment(prediction.label, matches);
}

struct RuleTrainingExport {
  std::vector<LabeledExample> examples;
  std::vector<std::string> skipped_rule_ids;  // rules with no exemplars
};

RuleTrainingExport export_training_from_rules(std::span<const Rule> rules);

nlohmann::json rule_to_json(const Rule& rule);
Rule rule_from_json(const nlohmann::json& j);

// {"format": "sqg-rules", "version": 1, "rules": [...]}
inline constexpr int kRuleFileVersion = 1;
std::vector<Rule> read_rule_file(const std::string& path);
void write_rule_file(const std::string& path, std::span<const Rule> rules);
nlohmann::json rules_document(std::span<const Rule> rules);
std::vector<Rule> rules_from_document(const nlohmann::json& doc);

// Holder for the active ruleset with versioned, all-or-nothing replacement.
class RuleBook {
 public:
  // Compiles with the next version; on error the active set and version are unchanged.
  std::shared_ptr<const CompiledRuleSet> compile(std::span<const Rule> rules);
  std::shared_ptr<const CompiledRuleSet> active() const;
  std::uint64_t version() const;

 private:
  std::mutex compile_mu_;
  mutable std::mutex mu_;
  std::shared_ptr<const CompiledRuleSet> active_ = std::make_shared<const CompiledRuleSet>();
};

}  // namespace sqg
