#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "sqg/decision_log.hpp"
#include "sqg/taxonomy.hpp"
#include "sqg/time.hpp"

namespace sqg {

using SensitiveCounts = std::array<std::int64_t, kNumSensitive>;
using SensitiveShares = std::array<double, kNumSensitive>;

// Per UTC calendar day, counted from final (post-adjustment) labels.
struct DailyBucket {
  Date date{};
  std::int64_t total_queries = 0;
  std::int64_t sensitive_queries = 0;
  SensitiveCounts per_category{};

  int weekday() const { return iso_weekday(date); }
  friend bool operator==(const DailyBucket&, const DailyBucket&) = default;
};

// Buckets by received_at, ascending by date.
std::vector<DailyBucket> bucketize(std::span<const Decision> decisions);
// Streams a decision log; throws kCorruptRecord naming the line.
std::vector<DailyBucket> bucketize_log(std::istream& log);
// Sum of two bucket lists (bucketize is additive over log concatenation).
std::vector<DailyBucket> merge_buckets(std::span<const DailyBucket> a,
                                       std::span<const DailyBucket> b);

struct DatedValue {
  Date date{};
  std::optional<double> value;  // nullopt: undefined for that date
};

// total / max total. Only the earliest date with the maximum total reports exactly 1.0;
// later dates tied with it report the largest double below 1. Throws kEmptyInput.
std::vector<DatedValue> daily_volume_ratio(std::span<const DailyBucket> buckets);
// Percentage of sensitive queries per date; undefined for zero-total dates.
std::vector<DatedValue> sensitive_ratio(std::span<const DailyBucket> buckets);

struct Scope {
  enum class Kind { kDay, kCumulative, kOverall, kEventWindow };
  Kind kind = Kind::kOverall;
  Date from{};  // inclusive
  Date to{};    // inclusive

  static Scope day(Date d) { return {Kind::kDay, d, d}; }
  static Scope cumulative(Date upto) { return {Kind::kCumulative, Date::min(), upto}; }
  static Scope overall() { return {Kind::kOverall, Date::min(), Date::max()}; }
  static Scope window(Date start, int days) {
    return {Kind::kEventWindow, start, start + std::chrono::days{days - 1}};
  }
  bool contains(Date d) const { return d >= from && d <= to; }
};

struct DistributionSnapshot {
  Scope scope;
  std::int64_t sensitive_queries = 0;
  SensitiveCounts counts{};
  SensitiveShares share_pct{};  // sums to 100 when sensitive_queries > 0
};

// Throws kEmptyScope when the scope holds no sensitive queries.
DistributionSnapshot distribution(std::span<const DailyBucket> buckets, const Scope& scope);

struct EventWindowReport {
  DistributionSnapshot window;
  DistributionSnapshot overall;
  SensitiveShares delta_pp{};  // window share minus overall share, percentage points
};

inline constexpr int kDefaultEventWindowDays = 3;

EventWindowReport event_window(std::span<const DailyBucket> buckets, Date start,
                               int days = kDefaultEventWindowDays);

enum class CorrelationBasis { kCounts, kShares };

// Pearson coefficients between the categories' daily series. Entries are NaN
// where a series has zero variance (undefined, never reported as 0).
struct CorrelationMatrix {
  Eigen::Matrix<double, static_cast<int>(kNumSensitive), static_cast<int>(kNumSensitive)>
      coefficients;

  std::optional<double> at(std::size_t i, std::size_t j) const;
  std::optional<double> at(Label a, Label b) const {
    return at(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
  }
};

// Throws kInsufficientData with fewer than two dates.
CorrelationMatrix category_correlation(std::span<const DailyBucket> buckets,
                                       CorrelationBasis basis = CorrelationBasis::kCounts);

// Word splitter used by the keyword study; a noun tagger can be plugged in instead.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<std::string> tokens(std::string_view text) const = 0;
};

// Splits on whitespace and punctuation; ASCII is lowercased.
class SplitTokenizer final : public Tokenizer {
 public:
  std::vector<std::string> tokens(std::string_view text) const override;
};

// General search words excluded from keyword reports by default.
std::set<std::string, std::less<>> default_stoplist();

struct KeywordReport {
  Label category = Label::kSafe;
  std::vector<std::pair<std::string, std::int64_t>> ranked;  // count desc, then term asc
  std::optional<Date> max_day;  // date of the category's largest daily share
  std::set<std::string> new_on_max_day;
};

// Top-k terms among queries whose final label is `category`. new_on_max_day
// holds max-day top-k terms absent from every earlier day's top-k.
KeywordReport extract_keywords(std::span<const Decision> decisions, Label category,
                               const std::set<std::string, std::less<>>& stoplist, std::size_t k,
                               const Tokenizer& tokenizer = SplitTokenizer());
KeywordReport extract_keywords(std::span<const Decision> decisions, std::string_view category_id,
                               const std::set<std::string, std::less<>>& stoplist, std::size_t k,
                               const Tokenizer& tokenizer = SplitTokenizer());

// Structured and comma-separated exports.
nlohmann::json to_json(std::span<const DailyBucket> buckets);
nlohmann::json to_json(const DistributionSnapshot& snapshot);
nlohmann::json to_json(const EventWindowReport& report);
nlohmann::json to_json(const CorrelationMatrix& matrix);
nlohmann::json to_json(const KeywordReport& report);
nlohmann::json to_json(std::span<const DatedValue> series);

std::string buckets_csv(std::span<const DailyBucket> buckets);
std::string snapshot_csv(std::span<const DistributionSnapshot> snapshots);
std::string correlation_csv(const CorrelationMatrix& matrix);
std::string keywords_csv(const KeywordReport& report);
std::string series_csv(std::span<const DatedValue> series, std::string_view value_name);

// Figure-style SVG renderings of the series above.
std::string volume_chart_svg(std::span<const DailyBucket> buckets);
std::string distribution_chart_svg(std::span<const DistributionSnapshot> snapshots,
                                   std::string_view title);
std::string correlation_heatmap_svg(const CorrelationMatrix& matrix);

}  // namespace sqg
