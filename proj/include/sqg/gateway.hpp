#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "sqg/classifier.hpp"
#include "sqg/decision_log.hpp"
#include "sqg/features.hpp"
#include "sqg/rules.hpp"
#include "sqg/time.hpp"

namespace sqg {

struct QueryRecord {
  std::string query_id;  // empty: the gateway assigns one
  std::string text;
  Timestamp received_at{};
  std::string user_pseudonym;  // opaque, never decoded, never persisted
};

enum class ReportType { kOverBlocked, kUnderBlocked, kOther };
std::string_view report_type_name(ReportType type);
ReportType parse_report_type(std::string_view name);

struct FeedbackReport {
  std::string query_id;
  ReportType report_type = ReportType::kOther;
  std::string note;
  Timestamp submitted_at{};
};

nlohmann::json feedback_to_json(const FeedbackReport& r);
FeedbackReport feedback_from_json(const nlohmann::json& j);

struct FeedbackAck {
  bool accepted = true;
  std::size_t queue_length = 0;
};

struct ActiveVersions {
  std::string model_version;
  std::uint64_t model_generation = 0;
  std::uint64_t ruleset_version = 0;
};

struct GatewayOptions {
  std::string sentence_terminators = std::string(SentenceSplitter::kDefaultTerminators);
  // Per-category replacements for the catalog's block-reason templates.
  std::map<Label, std::string> block_reason_overrides;
  // Stamps decided_at; defaults to the wall clock.
  std::function<Timestamp()> clock;
  // Optional append-only file for user feedback reports.
  std::string feedback_log_path;
};

// classify -> rule adjustment -> durable log -> answer.
//
// Model and ruleset form one immutable snapshot. decide() holds a shared lock
// for its whole duration and reload() swaps under an exclusive lock, so each
// decision sees exactly one (model, ruleset) pair and versions in the log
// never go backwards.
class Gateway {
 public:
  Gateway(std::shared_ptr<const Featurizer> featurizer, DecisionSink& log,
          GatewayOptions options = {});

  // Throws kNotReady, kInvalidArgument (blank text), kStorageFailure.
  Decision decide(const QueryRecord& query);

  // Throws kUnknownQueryId.
  FeedbackAck record_feedback(const FeedbackReport& report);

  // Atomic swap of whichever parts are given; nothing changes on error.
  ActiveVersions reload(std::optional<ModelWeights> model, std::optional<std::vector<Rule>> rules);

  ActiveVersions versions() const;
  bool ready() const;
  std::vector<Rule> active_rules() const;
  std::vector<FeedbackReport> review_queue() const;
  std::vector<Decision> decisions() const;
  std::optional<Decision> find_decision(const std::string& query_id) const;
  const SentenceSplitter& splitter() const { return splitter_; }
  std::string block_reason(Label label) const;

 private:
  struct Snapshot {
    std::shared_ptr<const ModelWeights> model;
    std::uint64_t model_generation = 0;
    std::shared_ptr<const CompiledRuleSet> ruleset;
    std::vector<Rule> rules;
  };

  std::shared_ptr<const Featurizer> featurizer_;
  DecisionSink& log_;
  GatewayOptions options_;
  SentenceSplitter splitter_;

  mutable std::shared_mutex swap_mu_;
  // Turnstile: a pending reload holds it so new decides queue behind the
  // swap instead of starving it (the shared mutex favours readers).
  std::mutex turnstile_mu_;
  std::mutex reload_mu_;
  std::shared_ptr<const Snapshot> snapshot_;

  mutable std::mutex records_mu_;
  std::vector<Decision> records_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<FeedbackReport> reports_;
  std::atomic<std::uint64_t> next_query_id_{1};
};

}  // namespace sqg
