#include "sqg/service.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "sqg/analytics.hpp"
#include "sqg/error.hpp"

namespace sqg {
namespace {

using nlohmann::json;

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kInvalidPattern:
    case ErrorCode::kCategoryMissing:
    case ErrorCode::kInvalidConfig:
    case ErrorCode::kUnknownCategory:
    case ErrorCode::kCorruptRecord:
      return 400;
    case ErrorCode::kUnknownQueryId:
    case ErrorCode::kUnknownSample:
      return 404;
    case ErrorCode::kDuplicateRuleId:
    case ErrorCode::kAlreadyLabeled:
      return 409;
    case ErrorCode::kEmptyInput:
    case ErrorCode::kEmptyScope:
    case ErrorCode::kInsufficientData:
    case ErrorCode::kUndefined:
    case ErrorCode::kWindowOutOfRange:
    case ErrorCode::kDimensionMismatch:
      return 422;
    case ErrorCode::kNotReady:
    case ErrorCode::kRemoteFeaturizerUnavailable:
      return 503;
    default:
      return 500;
  }
}

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& msg) {
  send_json(res, {{"error", code}, {"message", msg}}, status);
}

std::string param(const httplib::Request& req, const char* name, std::string fallback = {}) {
  return req.has_param(name) ? req.get_param_value(name) : fallback;
}

json decision_view(const Decision& d) {
  json j = {{"query_id", d.query_id},
            {"label", category_id(d.label)},
            {"source", source_name(d.source)},
            {"blocked", d.blocked},
            {"cue_prefix", d.cue_prefix},
            {"model_version", d.model_version},
            {"model_generation", d.model_generation},
            {"ruleset_version", d.ruleset_version}};
  if (d.blocked) j["block_reason"] = d.block_reason;
  return j;
}

json versions_view(const ActiveVersions& v) {
  return {{"model_version", v.model_version},
          {"model_generation", v.model_generation},
          {"ruleset_version", v.ruleset_version}};
}

json precision_view(const std::optional<double>& p) { return p ? json(*p) : json(nullptr); }

json counts_view(const VerdictCounts& c) {
  return {{"MustSafe", c.must_safe},
          {"LookSafe", c.look_safe},
          {"Harm", c.harm},
          {"CannotDecide", c.cannot_decide}};
}

std::shared_ptr<const Featurizer> make_featurizer(const ServiceConfig& c) {
  if (!c.remote_featurizer_url.empty()) {
    return std::make_shared<RemoteFeaturizer>(c.remote_featurizer_url, "/featurize",
                                              c.featurizer.dimension, c.remote_featurizer_hash);
  }
  return std::make_shared<HashedNgramFeaturizer>(c.featurizer);
}

GatewayOptions gateway_options(const ServiceConfig& c) {
  GatewayOptions o;
  o.sentence_terminators = c.sentence_terminators;
  o.block_reason_overrides = c.block_reasons;
  o.feedback_log_path = c.feedback_log_path;
  return o;
}

}  // namespace

struct Service::Impl {
  explicit Impl(ServiceConfig c)
      : config(std::move(c)),
        featurizer(make_featurizer(config)),
        log(config.log_path, config.sync_log),
        gateway(featurizer, log, gateway_options(config)) {
    std::optional<ModelWeights> model;
    std::optional<std::vector<Rule>> rules;
    if (!config.model_path.empty() && std::filesystem::exists(config.model_path)) {
      model = load_model(config.model_path);
    }
    if (!config.rules_path.empty() && std::filesystem::exists(config.rules_path)) {
      rules = read_rule_file(config.rules_path);
      staged = *rules;
    }
    if (model || rules) gateway.reload(std::move(model), std::move(rules));
    routes();
  }

  ServiceConfig config;
  std::shared_ptr<const Featurizer> featurizer;
  FileDecisionLog log;
  Gateway gateway;
  ReviewStore reviews;
  std::mutex staged_mu;
  std::vector<Rule> staged;
  std::mutex sample_mu;
  httplib::Server server;
  std::thread thread;

  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  Handler guarded(Handler h, bool operator_only) {
    return [this, h = std::move(h), operator_only](const httplib::Request& req,
                                                   httplib::Response& res) {
      if (operator_only && !config.operator_token.empty() &&
          req.get_header_value("Authorization") != "Bearer " + config.operator_token) {
        send_error(res, 401, "Unauthorized", "operator token required");
        return;
      }
      try {
        h(req, res);
      } catch (const Error& e) {
        send_error(res, http_status(e.code()), error_code_name(e.code()), e.what());
      } catch (const json::exception& e) {
        send_error(res, 400, "InvalidArgument", e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "Internal", e.what());
      }
    };
  }

  std::vector<Decision> logged() const {
    if (!std::filesystem::exists(config.log_path)) return {};
    return read_decision_log(config.log_path);
  }

  std::vector<DailyBucket> buckets() const {
    std::ifstream in(config.log_path);
    if (!in) return {};
    return bucketize_log(in);
  }

  static json body_of(const httplib::Request& req) {
    json j = json::parse(req.body.empty() ? "{}" : req.body);
    if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "body must be an object");
    return j;
  }

  void routes() {
    server.Post("/v1/decide", guarded([this](const auto& req, auto& res) {
      const json body = body_of(req);
      QueryRecord q;
      q.query_id = body.value("query_id", std::string());
      q.text = body.at("text").get<std::string>();
      q.received_at = body.contains("received_at")
                          ? parse_timestamp(body["received_at"].get<std::string>())
                          : now_utc();
      q.user_pseudonym = body.value("user_pseudonym", std::string());
      send_json(res, decision_view(gateway.decide(q)));
    }, false));

    server.Post("/v1/feedback", guarded([this](const auto& req, auto& res) {
      json body = body_of(req);
      if (!body.contains("submitted_at")) body["submitted_at"] = format_timestamp(now_utc());
      const FeedbackAck ack = gateway.record_feedback(feedback_from_json(body));
      send_json(res, {{"accepted", ack.accepted}, {"queue_length", ack.queue_length}});
    }, false));

    server.Get("/v1/healthz", guarded([this](const auto&, auto& res) {
      json j = versions_view(gateway.versions());
      j["ready"] = gateway.ready();
      send_json(res, j, gateway.ready() ? 200 : 503);
    }, false));

    server.Get("/v1/rules", guarded([this](const auto&, auto& res) {
      std::lock_guard lock(staged_mu);
      const auto active = gateway.active_rules();
      send_json(res, {{"ruleset_version", gateway.versions().ruleset_version},
                      {"active", rules_document(active)},
                      {"staged", rules_document(staged)}});
    }, false));

    server.Post("/v1/rules", guarded([this](const auto& req, auto& res) {
      const json body = body_of(req);
      std::vector<Rule> incoming;
      if (body.contains("rules")) {
        incoming = rules_from_document(body);
      } else {
        incoming.push_back(rule_from_json(body));
      }
      std::lock_guard lock(staged_mu);
      std::vector<Rule> next = staged;
      for (auto& rule : incoming) {
        if (rule.created_at == Timestamp{}) rule.created_at = now_utc();
        if (std::any_of(next.begin(), next.end(), [&](const Rule& r) { return r.id == rule.id; })) {
          throw Error(ErrorCode::kDuplicateRuleId, rule.id);
        }
        next.push_back(std::move(rule));
      }
      compile_rules(next, 0);  // validation only
      staged = std::move(next);
      send_json(res, {{"staged", rules_document(staged)}}, 201);
    }, true));

    server.Delete(R"(/v1/rules/([^/]+))", guarded([this](const auto& req, auto& res) {
      const std::string id = req.matches[1];
      std::lock_guard lock(staged_mu);
      const auto it = std::find_if(staged.begin(), staged.end(),
                                   [&](const Rule& r) { return r.id == id; });
      if (it == staged.end()) {
        send_error(res, 404, "UnknownRule", id);
        return;
      }
      staged.erase(it);
      send_json(res, {{"staged", rules_document(staged)}});
    }, true));

    server.Post("/v1/reload", guarded([this](const auto& req, auto& res) {
      const json body = body_of(req);
      std::optional<ModelWeights> model;
      if (body.value("model", !gateway.ready())) {
        if (config.model_path.empty()) {
          throw Error(ErrorCode::kInvalidConfig, "model_path is not configured");
        }
        model = load_model(config.model_path);
      }
      std::lock_guard lock(staged_mu);
      const ActiveVersions v = gateway.reload(std::move(model), staged);
      if (!config.rules_path.empty()) write_rule_file(config.rules_path, staged);
      send_json(res, versions_view(v));
    }, true));

    analytics_routes();
    review_routes();
  }

  void analytics_routes() {
    server.Get("/v1/analytics/daily", guarded([this](const auto& req, auto& res) {
      const auto b = buckets();
      if (!req.has_param("date")) {
        json j = to_json(std::span<const DailyBucket>(b));
        const auto volume = b.empty() ? std::vector<DatedValue>{} : daily_volume_ratio(b);
        const auto sensitive = sensitive_ratio(b);
        send_json(res, {{"buckets", j},
                        {"volume_ratio", to_json(std::span<const DatedValue>(volume))},
                        {"sensitive_ratio", to_json(std::span<const DatedValue>(sensitive))}});
        return;
      }
      send_json(res, to_json(distribution(b, Scope::day(parse_date(param(req, "date"))))));
    }, false));

    server.Get("/v1/analytics/cumulative", guarded([this](const auto& req, auto& res) {
      const auto b = buckets();
      if (b.empty()) throw Error(ErrorCode::kEmptyScope, "no decisions logged");
      const Date upto = req.has_param("upto") ? parse_date(param(req, "upto")) : b.back().date;
      send_json(res, to_json(distribution(b, Scope::cumulative(upto))));
    }, false));

    server.Get("/v1/analytics/overall", guarded([this](const auto&, auto& res) {
      send_json(res, to_json(distribution(buckets(), Scope::overall())));
    }, false));

    server.Get("/v1/analytics/events", guarded([this](const auto& req, auto& res) {
      const Date start = parse_date(param(req, "start"));
      const int days = std::stoi(param(req, "days", std::to_string(kDefaultEventWindowDays)));
      send_json(res, to_json(event_window(buckets(), start, days)));
    }, false));

    server.Get("/v1/analytics/correlation", guarded([this](const auto& req, auto& res) {
      const std::string basis = param(req, "basis", "counts");
      if (basis != "counts" && basis != "shares") {
        throw Error(ErrorCode::kInvalidArgument, "basis must be 'counts' or 'shares'");
      }
      send_json(res, to_json(category_correlation(
                         buckets(), basis == "shares" ? CorrelationBasis::kShares
                                                      : CorrelationBasis::kCounts)));
    }, false));

    server.Get("/v1/analytics/keywords", guarded([this](const auto& req, auto& res) {
      const std::string category = param(req, "category");
      const auto k = static_cast<std::size_t>(std::stoul(param(req, "k", "10")));
      const auto decisions = logged();
      send_json(res, to_json(extract_keywords(decisions, category, default_stoplist(), k)));
    }, false));
  }

  void review_routes() {
    server.Get("/v1/review/samples", guarded([this](const auto& req, auto& res) {
      const Date date = parse_date(param(req, "date"));
      {
        std::lock_guard lock(sample_mu);
        if (!reviews.has_samples_for(date)) {
          const auto decisions = logged();
          const auto seed =
              config.sample_seed + static_cast<std::uint64_t>(date.time_since_epoch().count());
          reviews.add_samples(sample_for_review(decisions, date, config.sample_size, seed));
        }
      }
      json out = json::array();
      for (const auto& s : reviews.samples_for(date)) out.push_back(to_json(s));
      send_json(res, {{"date", format_date(date)}, {"samples", out}});
    }, false));

    server.Post("/v1/review/verdicts", guarded([this](const auto& req, auto& res) {
      const json body = body_of(req);
      const ReviewRecord r = reviews.record_verdict(
          body.at("sample_id").get<std::string>(),
          parse_verdict(body.at("verdict").get<std::string>()),
          body.value("reviewer", std::string("anonymous")), now_utc());
      send_json(res, to_json(r), 201);
    }, true));

    server.Get("/v1/metrics/precision", guarded([this](const auto& req, auto& res) {
      const PeriodGrouping grouping = parse_grouping(param(req, "group", "day"));
      const auto records = reviews.records();
      json timeline = json::array();
      for (const auto& p : precision_timeline(group_records(records, grouping))) {
        timeline.push_back({{"period", p.period},
                            {"precision", precision_view(p.precision)},
                            {"counts", counts_view(p.counts)}});
      }
      const VerdictCounts all = tally(records);
      send_json(res, {{"group", grouping == PeriodGrouping::kDay ? "day" : "week"},
                      {"precision", precision_view(try_harm_precision(all))},
                      {"counts", counts_view(all)},
                      {"timeline", timeline}});
    }, false));

    server.Get("/v1/review/verdicts", guarded([this](const auto& req, auto& res) {
      const auto records = reviews.records();
      if (param(req, "format") == "csv") {
        res.set_content(verdicts_csv(records), "text/csv");
        return;
      }
      json out = json::array();
      for (const auto& r : records) out.push_back(to_json(r));
      send_json(res, {{"verdicts", out}});
    }, false));

    server.Get("/v1/review/proposals", guarded([this](const auto&, auto& res) {
      const auto records = reviews.records();
      const auto decisions = logged();
      const CorrectionProposals p = promote_corrections(records, decisions);
      std::set<std::string> known;
      {
        std::lock_guard lock(staged_mu);
        for (const auto& r : staged) known.insert(r.id);
      }
      for (const auto& r : gateway.active_rules()) known.insert(r.id);
      json rules = json::array();
      for (const auto& r : p.rules) {
        if (!known.contains(r.id)) rules.push_back(rule_to_json(r));
      }
      json examples = json::array();
      for (const auto& e : p.examples) {
        examples.push_back(
            {{"text", e.text}, {"label", category_id(e.label)}, {"origin", origin_name(e.origin)}});
      }
      send_json(res, {{"rules", rules}, {"examples", examples}});
    }, false));
  }
};

Service::Service(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Service::~Service() { stop(); }

int Service::start() {
  const std::string host = impl_->config.host();
  const int wanted = impl_->config.port();
  const int port = wanted == 0 ? impl_->server.bind_to_any_port(host)
                               : (impl_->server.bind_to_port(host, wanted) ? wanted : -1);
  if (port < 0) throw Error(ErrorCode::kInvalidConfig, "cannot bind " + impl_->config.listen);
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void Service::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

void Service::run() {
  if (!impl_->server.listen(impl_->config.host(), impl_->config.port())) {
    throw Error(ErrorCode::kInvalidConfig, "cannot listen on " + impl_->config.listen);
  }
}

Gateway& Service::gateway() { return impl_->gateway; }
ReviewStore& Service::reviews() { return impl_->reviews; }
const ServiceConfig& Service::config() const { return impl_->config; }

}  // namespace sqg
