#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sqg/classifier.hpp"
#include "sqg/decision_log.hpp"
#include "sqg/rules.hpp"
#include "sqg/time.hpp"

namespace sqg {

enum class Verdict { kMustSafe, kLookSafe, kHarm, kCannotDecide };
std::string_view verdict_name(Verdict v);
// Accepts exactly "MustSafe", "LookSafe", "Harm", "CannotDecide".
Verdict parse_verdict(std::string_view name);

enum class SampleStatus { kPending, kLabeled, kSkipped };
std::string_view sample_status_name(SampleStatus s);

struct ReviewSample {
  std::string sample_id;
  std::string query_id;
  std::string text;
  Decision decision;
  Date sampled_for_date{};
  SampleStatus status = SampleStatus::kPending;
};

struct ReviewRecord {
  std::string sample_id;
  std::string query_id;
  Verdict verdict = Verdict::kCannotDecide;
  std::string reviewer;
  Timestamp labeled_at{};
  Date sampled_for_date{};
};

inline constexpr std::size_t kDefaultDailySample = 50;

// Uniform without replacement among the date's sensitive decisions (all of them
// when fewer than n). `stratified` splits n across categories in proportion to
// their counts instead.
std::vector<ReviewSample> sample_for_review(std::span<const Decision> decisions, Date date,
                                            std::size_t n, std::uint64_t seed,
                                            bool stratified = false);

struct VerdictCounts {
  std::int64_t must_safe = 0;
  std::int64_t look_safe = 0;
  std::int64_t harm = 0;
  std::int64_t cannot_decide = 0;
};

VerdictCounts tally(std::span<const ReviewRecord> records);

// 100 * Harm / (MustSafe + LookSafe + Harm); CannotDecide is left out entirely.
// Throws kUndefined when the denominator is zero.
double harm_precision(const VerdictCounts& counts);
double harm_precision(std::span<const ReviewRecord> records);
std::optional<double> try_harm_precision(const VerdictCounts& counts);

struct PeriodPrecision {
  std::string period;
  VerdictCounts counts;
  std::optional<double> precision;  // nullopt marks an undefined period
};

using GroupedRecords = std::vector<std::pair<std::string, std::vector<ReviewRecord>>>;

std::vector<PeriodPrecision> precision_timeline(const GroupedRecords& grouped);

enum class PeriodGrouping { kDay, kWeek };
PeriodGrouping parse_grouping(std::string_view name);
// Keys are the sampled date ("YYYY-MM-DD") or the Monday of its ISO week.
GroupedRecords group_records(std::span<const ReviewRecord> records, PeriodGrouping grouping);

struct CorrectionProposals {
  std::vector<Rule> rules;  // disabled drafts awaiting operator activation
  std::vector<LabeledExample> examples;
};

// MustSafe -> whitelist draft (escaped literal query) + safe example;
// Harm -> example labeled with the decision's category; others -> nothing.
// One proposal per (query, verdict) and one whitelist draft per distinct text.
// Throws kUnknownQueryId.
CorrectionProposals promote_corrections(std::span<const ReviewRecord> records,
                                        std::span<const Decision> decisions);

nlohmann::json to_json(const ReviewSample& s);
nlohmann::json to_json(const ReviewRecord& r);
std::string verdicts_csv(std::span<const ReviewRecord> records);
// Inverse of verdicts_csv; throws kCorruptRecord naming the line.
std::vector<ReviewRecord> parse_verdicts_csv(std::string_view csv);

// Samples and verdicts with per-sample serialized writes.
class ReviewStore {
 public:
  // Samples whose id already exists are ignored.
  void add_samples(std::span<const ReviewSample> samples);
  bool has_samples_for(Date date) const;
  std::vector<ReviewSample> samples_for(Date date) const;
  std::vector<ReviewSample> samples() const;

  // Throws kUnknownSample; kAlreadyLabeled when this reviewer already gave a verdict.
  ReviewRecord record_verdict(const std::string& sample_id, Verdict verdict,
                              const std::string& reviewer, Timestamp labeled_at);
  // Throws kUnknownSample.
  void mark_skipped(const std::string& sample_id);

  std::vector<ReviewRecord> records() const;

 private:
  mutable std::mutex mu_;
  std::vector<ReviewSample> samples_;
  std::map<std::string, std::size_t> by_id_;
  std::vector<ReviewRecord> records_;
};

}  // namespace sqg
