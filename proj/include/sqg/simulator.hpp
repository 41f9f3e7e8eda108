#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sqg/classifier.hpp"
#include "sqg/decision_log.hpp"
#include "sqg/gateway.hpp"
#include "sqg/taxonomy.hpp"
#include "sqg/time.hpp"

namespace sqg {

struct EventSpec {
  int start_day = 1;  // 1-based day of the stream
  int duration = 3;
  std::map<Label, double> multipliers;
  std::string label;
  // Terms mixed into texts of the multiplied categories while the event runs.
  std::vector<std::string> extra_terms;
};

struct StreamConfig {
  int days = 70;
  std::int64_t peak_volume = 10000;
  int launch_days = 3;  // days carrying the peak volume
  double ratio_lo = 0.50;
  double ratio_hi = 0.85;
  // Position within the ratio band is scaled by these (both in (0,1]).
  double weekday_multiplier = 1.0;
  double weekend_multiplier = 0.6;
  double sensitive_lo = 0.03;
  double sensitive_hi = 0.04;
  // Percentages over the 12 sensitive categories; the safe entry is ignored.
  CategoryShares distribution = reference_distribution().avg;
  std::vector<EventSpec> events;
  std::uint64_t seed = 1;
  Date start_date = parse_date("2024-01-01");
  std::int64_t users = 5000;
};

// Throws kInvalidConfig with the offending field path in the message.
void validate(const StreamConfig& config);

// Throws kWindowOutOfRange or kInvalidConfig (bad factor).
StreamConfig inject_event(StreamConfig config, EventSpec event);

// Category weights for a 1-based day after event adjustment; sums to 1 over
// the sensitive categories, safe stays 0.
CategoryShares day_weights(const StreamConfig& config, int day);

struct SimulatedQuery {
  QueryRecord record;
  Label planted = Label::kSafe;
};

std::vector<SimulatedQuery> generate_stream(const StreamConfig& config);

// The signature token embedded in every query of a sensitive category.
std::string_view signature_token(Label label);
std::span<const std::string_view> category_terms(Label label);

// Reads the signature token back; safe when none is present.
Label oracle_label(std::string_view text);
Predictor oracle_predictor();
// Decision a perfect classifier would log for this query (no rules applied).
Decision oracle_decision(const QueryRecord& query);
std::vector<Decision> oracle_decisions(std::span<const SimulatedQuery> stream);

nlohmann::json stream_config_to_json(const StreamConfig& config);
StreamConfig stream_config_from_json(const nlohmann::json& j);

// Stream file: one query per line. Sidecar: one {"query_id","planted"} per line.
std::string stream_jsonl(std::span<const SimulatedQuery> stream);
std::string sidecar_jsonl(std::span<const SimulatedQuery> stream);
void write_stream(const std::string& stream_path, const std::string& sidecar_path,
                  std::span<const SimulatedQuery> stream);
// Joins the two files back; throws kCorruptRecord on malformed or unmatched lines.
std::vector<SimulatedQuery> read_stream(const std::string& stream_path,
                                        const std::string& sidecar_path);

}  // namespace sqg
