#include "sqg/rules.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "sqg/error.hpp"

namespace sqg {

std::string_view rule_kind_name(RuleKind kind) {
  return kind == RuleKind::kWhitelist ? "whitelist" : "blacklist";
}

RuleKind parse_rule_kind(std::string_view name) {
  if (name == "whitelist") return RuleKind::kWhitelist;
  if (name == "blacklist") return RuleKind::kBlacklist;
  throw Error(ErrorCode::kInvalidArgument, "unknown rule kind '" + std::string(name) + "'");
}

std::vector<std::string> CompiledRuleSet::source_ids() const {
  std::vector<std::string> ids;
  ids.reserve(rules_.size());
  for (const auto& r : rules_) ids.push_back(r.id);
  return ids;
}

CompiledRuleSet compile_rules(std::span<const Rule> rules, std::uint64_t version) {
  std::vector<CompiledRule> compiled;
  std::set<std::string, std::less<>> seen;
  for (const Rule& rule : rules) {
    if (!rule.enabled) continue;
    if (rule.id.empty()) throw Error(ErrorCode::kInvalidArgument, "rule with empty id");
    if (!seen.insert(rule.id).second) throw Error(ErrorCode::kDuplicateRuleId, rule.id);
    if (rule.kind == RuleKind::kBlacklist) {
      if (!rule.category) throw Error(ErrorCode::kCategoryMissing, rule.id);
      if (!is_sensitive(*rule.category)) {
        throw Error(ErrorCode::kCategoryMissing, rule.id + ": blacklist category must be sensitive");
      }
    } else if (rule.category) {
      throw Error(ErrorCode::kInvalidArgument, rule.id + ": whitelist rules carry no category");
    }
    try {
      compiled.push_back({rule.id, rule.kind, rule.category, Regex::compile(rule.pattern)});
    } catch (const Error& e) {
      throw Error(ErrorCode::kInvalidPattern, rule.id + ": " + e.what());
    }
  }
  return CompiledRuleSet(version, std::move(compiled));
}

SentenceSplitter::SentenceSplitter(std::string_view terminators)
    : terminators_utf8_(terminators) {
  for (std::size_t i = 0; i < terminators.size();) {
    std::size_t len = 1;
    terminators_.push_back(decode_utf8(terminators, i, &len));
    i += len;
  }
}

bool SentenceSplitter::is_terminator(char32_t c) const {
  return std::find(terminators_.begin(), terminators_.end(), c) != terminators_.end();
}

namespace {

bool is_space(char c) { return c == ' ' || (c >= '\t' && c <= '\r'); }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

}  // namespace

std::vector<std::string_view> SentenceSplitter::split(std::string_view text) const {
  std::vector<std::string_view> out;
  auto emit = [&](std::size_t from, std::size_t to) {
    const auto s = trim(text.substr(from, to - from));
    if (!s.empty()) out.push_back(s);
  };
  std::size_t start = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t len = 1;
    if (!is_terminator(decode_utf8(text, i, &len))) {
      i += len;
      continue;
    }
    i += len;
    while (i < text.size()) {
      std::size_t next = 1;
      if (!is_terminator(decode_utf8(text, i, &next))) break;
      i += next;
    }
    emit(start, i);
    start = i;
  }
  emit(start, text.size());
  return out;
}

RuleMatches match_rules(const CompiledRuleSet& ruleset, std::string_view text,
                        const SentenceSplitter& splitter) {
  RuleMatches matches;
  if (ruleset.size() == 0) return matches;
  const auto sentences = splitter.split(text);
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    for (const CompiledRule& rule : ruleset.rules()) {
      if (auto m = rule.regex.search(sentences[s])) {
        matches.push_back({rule.id, rule.kind, rule.category, s, m->begin, m->end});
      }
    }
  }
  return matches;
}

std::string_view source_name(DecisionSource source) {
  switch (source) {
    case DecisionSource::kModel: return "model";
    case DecisionSource::kWhitelistOverride: return "whitelist_override";
    case DecisionSource::kBlacklistOverride: return "blacklist_override";
  }
  return "model";
}

DecisionSource parse_source(std::string_view name) {
  if (name == "model") return DecisionSource::kModel;
  if (name == "whitelist_override") return DecisionSource::kWhitelistOverride;
  if (name == "blacklist_override") return DecisionSource::kBlacklistOverride;
  throw Error(ErrorCode::kInvalidArgument, "unknown decision source '" + std::string(name) + "'");
}

Adjustment apply_adjustment(Label predicted, const RuleMatches& matches) {
  std::optional<Label> blacklisted;
  bool whitelisted = false;
  for (const RuleMatch& m : matches) {
    if (m.kind == RuleKind::kBlacklist && m.category) {
      if (!blacklisted || ordinal(*m.category) < ordinal(*blacklisted)) blacklisted = m.category;
    } else if (m.kind == RuleKind::kWhitelist) {
      whitelisted = true;
    }
  }
  if (blacklisted) return {*blacklisted, DecisionSource::kBlacklistOverride};
  if (whitelisted && is_sensitive(predicted)) {
    return {Label::kSafe, DecisionSource::kWhitelistOverride};
  }
  return {predicted, DecisionSource::kModel};
}

RuleTrainingExport export_training_from_rules(std::span<const Rule> rules) {
  RuleTrainingExport out;
  for (const Rule& rule : rules) {
    if (rule.exemplars.empty()) {
      out.skipped_rule_ids.push_back(rule.id);
      continue;
    }
    const Label label = rule.kind == RuleKind::kWhitelist ? Label::kSafe
                                                          : rule.category.value_or(Label::kSafe);
    if (rule.kind == RuleKind::kBlacklist && !rule.category) {
      out.skipped_rule_ids.push_back(rule.id);
      continue;
    }
    for (const auto& text : rule.exemplars) {
      if (text.empty()) continue;
      out.examples.push_back({text, label, ExampleOrigin::kRuleDerived});
    }
  }
  return out;
}

nlohmann::json rule_to_json(const Rule& rule) {
  nlohmann::json j = {
      {"id", rule.id},
      {"kind", rule_kind_name(rule.kind)},
      {"pattern", rule.pattern},
      {"exemplars", rule.exemplars},
      {"enabled", rule.enabled},
      {"author", rule.author},
      {"created_at", format_timestamp(rule.created_at)},
  };
  if (rule.category) j["category"] = category_id(*rule.category);
  return j;
}

Rule rule_from_json(const nlohmann::json& j) {
  Rule r;
  r.id = j.at("id").get<std::string>();
  r.kind = parse_rule_kind(j.at("kind").get<std::string>());
  r.pattern = j.at("pattern").get<std::string>();
  if (j.contains("category") && !j.at("category").is_null()) {
    r.category = parse_label(j.at("category").get<std::string>());
  }
  if (j.contains("exemplars")) r.exemplars = j.at("exemplars").get<std::vector<std::string>>();
  r.enabled = j.value("enabled", true);
  r.author = j.value("author", std::string());
  if (j.contains("created_at")) r.created_at = parse_timestamp(j.at("created_at").get<std::string>());
  return r;
}

nlohmann::json rules_document(std::span<const Rule> rules) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rules) arr.push_back(rule_to_json(r));
  return {{"format", "sqg-rules"}, {"version", kRuleFileVersion}, {"rules", std::move(arr)}};
}

std::vector<Rule> rules_from_document(const nlohmann::json& doc) {
  if (doc.value("format", std::string()) != "sqg-rules") {
    throw Error(ErrorCode::kInvalidConfig, "rule file: missing 'sqg-rules' header");
  }
  if (doc.value("version", 0) != kRuleFileVersion) {
    throw Error(ErrorCode::kInvalidConfig, "rule file: unsupported version");
  }
  std::vector<Rule> rules;
  for (const auto& j : doc.at("rules")) rules.push_back(rule_from_json(j));
  return rules;
}

std::vector<Rule> read_rule_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidConfig, "cannot open rule file " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
    return rules_from_document(doc);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, path + ": " + e.what());
  }
}

void write_rule_file(const std::string& path, std::span<const Rule> rules) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << rules_document(rules).dump(2) << '\n';
    if (!out) throw Error(ErrorCode::kStorageFailure, "cannot write " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw Error(ErrorCode::kStorageFailure, "cannot rename " + tmp);
  }
}

std::shared_ptr<const CompiledRuleSet> RuleBook::compile(std::span<const Rule> rules) {
  std::lock_guard writer(compile_mu_);
  // Readers only contend with the pointer swap, not with compilation.
  auto next = std::make_shared<const CompiledRuleSet>(compile_rules(rules, version() + 1));
  std::lock_guard lock(mu_);
  active_ = next;
  return next;
}

std::shared_ptr<const CompiledRuleSet> RuleBook::active() const {
  std::lock_guard lock(mu_);
  return active_;
}

std::uint64_t RuleBook::version() const { return active()->version(); }

}  // namespace sqg
