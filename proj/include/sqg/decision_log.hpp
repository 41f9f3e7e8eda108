#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sqg/classifier.hpp"
#include "sqg/rules.hpp"
#include "sqg/time.hpp"

namespace sqg {

// Final verdict for one query. The user pseudonym is deliberately absent:
// nothing downstream of the gateway ever sees it.
struct Decision {
  std::string query_id;
  std::string text;
  Timestamp received_at{};
  Label label = Label::kSafe;        // after rule adjustment
  Label model_label = Label::kSafe;  // 1-best from the classifier
  DecisionSource source = DecisionSource::kModel;
  ScoreVector scores = ScoreVector::Zero();
  std::string cue_prefix;
  bool blocked = false;
  std::string block_reason;
  std::string model_version;
  std::uint64_t model_generation = 0;
  std::uint64_t ruleset_version = 0;
  Timestamp decided_at{};
};

// "[CATEGORY:<id>]"
std::string cue_prefix_for(Label label);

inline constexpr int kDecisionLogFormat = 1;

// One JSON object per line, carrying "v": kDecisionLogFormat.
nlohmann::json decision_to_json(const Decision& d);
Decision decision_from_json(const nlohmann::json& j);
std::string decision_to_line(const Decision& d);

// Throws Error(kCorruptRecord) naming the 1-based line number.
std::vector<Decision> parse_decision_log(std::istream& in);
std::vector<Decision> read_decision_log(const std::string& path);

// Append-only sink. append() either makes the record durable or throws kStorageFailure.
class DecisionSink {
 public:
  virtual ~DecisionSink() = default;
  virtual void append(const Decision& d) = 0;
};

class FileDecisionLog final : public DecisionSink {
 public:
  // sync: fsync after every record (otherwise flush to the OS only).
  explicit FileDecisionLog(std::string path, bool sync = false);
  ~FileDecisionLog() override;

  void append(const Decision& d) override;
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  bool sync_;
  int fd_ = -1;
  std::mutex mu_;
};

class MemoryDecisionLog final : public DecisionSink {
 public:
  void append(const Decision& d) override;
  std::vector<std::string> lines() const;
  std::string contents() const;
  std::vector<Decision> decisions() const;
  // Subsequent appends throw kStorageFailure (for exercising fail-closed paths).
  void set_failing(bool failing);

 private:
  mutable std::mutex mu_;
  std::vector<std::string> lines_;
  bool failing_ = false;
};

}  // namespace sqg
