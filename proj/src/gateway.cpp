#include "sqg/gateway.hpp"

#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "sqg/error.hpp"

namespace sqg {

std::string_view report_type_name(ReportType type) {
  switch (type) {
    case ReportType::kOverBlocked: return "over_blocked";
    case ReportType::kUnderBlocked: return "under_blocked";
    case ReportType::kOther: return "other";
  }
  return "other";
}

ReportType parse_report_type(std::string_view name) {
  if (name == "over_blocked") return ReportType::kOverBlocked;
  if (name == "under_blocked") return ReportType::kUnderBlocked;
  if (name == "other") return ReportType::kOther;
  throw Error(ErrorCode::kInvalidArgument, "unknown report type '" + std::string(name) + "'");
}

nlohmann::json feedback_to_json(const FeedbackReport& r) {
  return {{"query_id", r.query_id},
          {"report_type", report_type_name(r.report_type)},
          {"note", r.note},
          {"submitted_at", format_timestamp(r.submitted_at)}};
}

FeedbackReport feedback_from_json(const nlohmann::json& j) {
  FeedbackReport r;
  r.query_id = j.at("query_id").get<std::string>();
  r.report_type = parse_report_type(j.at("report_type").get<std::string>());
  r.note = j.value("note", std::string());
  if (j.contains("submitted_at")) {
    r.submitted_at = parse_timestamp(j.at("submitted_at").get<std::string>());
  }
  return r;
}

namespace {

bool blank(std::string_view s) {
  for (const char c : s) {
    if (!(c == ' ' || (c >= '\t' && c <= '\r'))) return false;
  }
  return true;
}

}  // namespace

Gateway::Gateway(std::shared_ptr<const Featurizer> featurizer, DecisionSink& log,
                 GatewayOptions options)
    : featurizer_(std::move(featurizer)),
      log_(log),
      options_(std::move(options)),
      splitter_(options_.sentence_terminators) {
  if (!featurizer_) throw Error(ErrorCode::kInvalidConfig, "gateway needs a featurizer");
  if (!options_.clock) options_.clock = now_utc;
  auto empty = std::make_shared<Snapshot>();
  empty->ruleset = std::make_shared<const CompiledRuleSet>();
  snapshot_ = std::move(empty);
}

std::string Gateway::block_reason(Label label) const {
  if (auto it = options_.block_reason_overrides.find(label);
      it != options_.block_reason_overrides.end()) {
    return it->second;
  }
  return std::string(category(label).block_reason_template);
}

Decision Gateway::decide(const QueryRecord& query) {
  if (blank(query.text)) throw Error(ErrorCode::kInvalidArgument, "query text is blank");
  std::unique_lock turnstile(turnstile_mu_);
  std::shared_lock lock(swap_mu_);
  turnstile.unlock();
  const std::shared_ptr<const Snapshot> snap = snapshot_;
  if (!snap->model) throw Error(ErrorCode::kNotReady, "no model loaded");

  const Prediction prediction = predict(*snap->model, *featurizer_, query.text);
  const RuleMatches matches = match_rules(*snap->ruleset, query.text, splitter_);
  const Adjustment adjusted = apply_adjustment(prediction, matches);

  Decision d;
  d.query_id = query.query_id;
  if (d.query_id.empty()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "q%010llu",
                  static_cast<unsigned long long>(next_query_id_.fetch_add(1)));
    d.query_id = buf;
  }
  d.text = query.text;
  d.received_at = query.received_at;
  d.label = adjusted.label;
  d.model_label = prediction.label;
  d.source = adjusted.source;
  d.scores = prediction.scores;
  d.cue_prefix = cue_prefix_for(d.label);
  d.blocked = is_sensitive(d.label);
  if (d.blocked) d.block_reason = block_reason(d.label);
  d.model_version = snap->model->model_version;
  d.model_generation = snap->model_generation;
  d.ruleset_version = snap->ruleset->version();
  d.decided_at = options_.clock();

  // Write-ahead: throws before anything is returned. Holding records_mu_ keeps
  // the in-memory mirror in the same order as the log.
  std::lock_guard records_lock(records_mu_);
  log_.append(d);
  index_[d.query_id] = records_.size();
  records_.push_back(d);
  return d;
}

FeedbackAck Gateway::record_feedback(const FeedbackReport& report) {
  std::lock_guard lock(records_mu_);
  if (!index_.contains(report.query_id)) {
    throw Error(ErrorCode::kUnknownQueryId, report.query_id);
  }
  FeedbackReport stored = report;
  if (stored.submitted_at == Timestamp{}) stored.submitted_at = options_.clock();
  if (!options_.feedback_log_path.empty()) {
    std::ofstream out(options_.feedback_log_path, std::ios::app);
    out << feedback_to_json(stored).dump() << '\n';
    out.flush();
    if (!out) throw Error(ErrorCode::kStorageFailure, options_.feedback_log_path);
  }
  reports_.push_back(std::move(stored));
  return {true, reports_.size()};
}

ActiveVersions Gateway::reload(std::optional<ModelWeights> model,
                               std::optional<std::vector<Rule>> rules) {
  if (!model && !rules) throw Error(ErrorCode::kInvalidArgument, "reload needs a model or rules");
  std::lock_guard reload_lock(reload_mu_);
  std::shared_ptr<const Snapshot> current;
  {
    std::shared_lock lock(swap_mu_);
    current = snapshot_;
  }
  auto next = std::make_shared<Snapshot>(*current);
  if (model) {
    if (model->dimension() != featurizer_->dimension()) {
      throw Error(ErrorCode::kDimensionMismatch, "model D=" + std::to_string(model->dimension()) +
                                                     ", featurizer D=" +
                                                     std::to_string(featurizer_->dimension()));
    }
    if (model->featurizer_config_hash != featurizer_->config_hash()) {
      throw Error(ErrorCode::kInvalidConfig, "model was trained on a different featurizer");
    }
    next->model = std::make_shared<const ModelWeights>(std::move(*model));
    next->model_generation = current->model_generation + 1;
  }
  if (rules) {
    // Compiled before taking the exclusive lock; requests keep flowing meanwhile.
    next->ruleset = std::make_shared<const CompiledRuleSet>(
        compile_rules(*rules, current->ruleset->version() + 1));
    next->rules = std::move(*rules);
  }
  std::lock_guard turnstile(turnstile_mu_);
  std::unique_lock lock(swap_mu_);
  snapshot_ = next;
  return {next->model ? next->model->model_version : std::string(), next->model_generation,
          next->ruleset->version()};
}

ActiveVersions Gateway::versions() const {
  std::shared_lock lock(swap_mu_);
  return {snapshot_->model ? snapshot_->model->model_version : std::string(),
          snapshot_->model_generation, snapshot_->ruleset->version()};
}

bool Gateway::ready() const {
  std::shared_lock lock(swap_mu_);
  return snapshot_->model != nullptr;
}

std::vector<Rule> Gateway::active_rules() const {
  std::shared_lock lock(swap_mu_);
  return snapshot_->rules;
}

std::vector<FeedbackReport> Gateway::review_queue() const {
  std::lock_guard lock(records_mu_);
  return reports_;
}

std::vector<Decision> Gateway::decisions() const {
  std::lock_guard lock(records_mu_);
  return records_;
}

std::optional<Decision> Gateway::find_decision(const std::string& query_id) const {
  std::lock_guard lock(records_mu_);
  if (auto it = index_.find(query_id); it != index_.end()) return records_[it->second];
  return std::nullopt;
}

}  // namespace sqg
