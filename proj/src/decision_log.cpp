#include "sqg/decision_log.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sqg/error.hpp"

namespace sqg {

std::string cue_prefix_for(Label label) {
  return "[CATEGORY:" + std::string(category_id(label)) + "]";
}

nlohmann::json decision_to_json(const Decision& d) {
  std::vector<double> scores(d.scores.data(), d.scores.data() + d.scores.size());
  nlohmann::json j = {
      {"v", kDecisionLogFormat},
      {"query_id", d.query_id},
      {"text", d.text},
      {"received_at", format_timestamp(d.received_at)},
      {"label", category_id(d.label)},
      {"model_label", category_id(d.model_label)},
      {"source", source_name(d.source)},
      {"scores", scores},
      {"cue_prefix", d.cue_prefix},
      {"blocked", d.blocked},
      {"model_version", d.model_version},
      {"model_generation", d.model_generation},
      {"ruleset_version", d.ruleset_version},
      {"decided_at", format_timestamp(d.decided_at)},
  };
  if (d.blocked) j["block_reason"] = d.block_reason;
  return j;
}

Decision decision_from_json(const nlohmann::json& j) {
  if (j.at("v").get<int>() != kDecisionLogFormat) {
    throw Error(ErrorCode::kInvalidArgument, "unsupported decision log format");
  }
  Decision d;
  d.query_id = j.at("query_id").get<std::string>();
  d.text = j.at("text").get<std::string>();
  d.received_at = parse_timestamp(j.at("received_at").get<std::string>());
  d.label = parse_label(j.at("label").get<std::string>());
  d.model_label = parse_label(j.at("model_label").get<std::string>());
  d.source = parse_source(j.at("source").get<std::string>());
  const auto scores = j.at("scores").get<std::vector<double>>();
  if (scores.size() != kNumCategories) {
    throw Error(ErrorCode::kInvalidArgument, "scores must have 13 entries");
  }
  for (int i = 0; i < kHeadRows; ++i) d.scores(i) = scores[i];
  d.cue_prefix = j.at("cue_prefix").get<std::string>();
  d.blocked = j.at("blocked").get<bool>();
  d.block_reason = j.value("block_reason", std::string());
  d.model_version = j.at("model_version").get<std::string>();
  d.model_generation = j.at("model_generation").get<std::uint64_t>();
  d.ruleset_version = j.at("ruleset_version").get<std::uint64_t>();
  d.decided_at = parse_timestamp(j.at("decided_at").get<std::string>());
  if (d.blocked != is_sensitive(d.label)) {
    throw Error(ErrorCode::kInvalidArgument, "blocked flag disagrees with label");
  }
  return d;
}

std::string decision_to_line(const Decision& d) { return decision_to_json(d).dump() + "\n"; }

std::vector<Decision> parse_decision_log(std::istream& in) {
  std::vector<Decision> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(decision_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kCorruptRecord, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Decision> read_decision_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot open decision log " + path);
  return parse_decision_log(in);
}

FileDecisionLog::FileDecisionLog(std::string path, bool sync)
    : path_(std::move(path)), sync_(sync) {
  fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) {
    throw Error(ErrorCode::kStorageFailure, path_ + ": " + std::strerror(errno));
  }
}

FileDecisionLog::~FileDecisionLog() {
  if (fd_ >= 0) ::close(fd_);
}

void FileDecisionLog::append(const Decision& d) {
  const std::string line = decision_to_line(d);
  std::lock_guard lock(mu_);
  const off_t start = ::lseek(fd_, 0, SEEK_END);
  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = ::write(fd_, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      const int err = errno;
      // Drop a torn record so the log stays parseable.
      if (start >= 0) {
        [[maybe_unused]] const int rc = ::ftruncate(fd_, start);
      }
      throw Error(ErrorCode::kStorageFailure, path_ + ": " + std::strerror(err));
    }
    written += static_cast<std::size_t>(n);
  }
  if (sync_ && ::fdatasync(fd_) != 0) {
    throw Error(ErrorCode::kStorageFailure, path_ + ": " + std::strerror(errno));
  }
}

void MemoryDecisionLog::append(const Decision& d) {
  std::string line = decision_to_line(d);
  std::lock_guard lock(mu_);
  if (failing_) throw Error(ErrorCode::kStorageFailure, "memory log set to fail");
  lines_.push_back(std::move(line));
}

std::vector<std::string> MemoryDecisionLog::lines() const {
  std::lock_guard lock(mu_);
  return lines_;
}

std::string MemoryDecisionLog::contents() const {
  std::lock_guard lock(mu_);
  std::string out;
  for (const auto& l : lines_) out += l;
  return out;
}

std::vector<Decision> MemoryDecisionLog::decisions() const {
  std::istringstream in(contents());
  return parse_decision_log(in);
}

void MemoryDecisionLog::set_failing(bool failing) {
  std::lock_guard lock(mu_);
  failing_ = failing;
}

}  // namespace sqg
