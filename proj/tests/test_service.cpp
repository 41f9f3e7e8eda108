#include <doctest.h>

#include <map>

#include <nlohmann/json.hpp>

#include "sqg/error.hpp"
#include "sqg/service.hpp"
#include "support.hpp"

// Must follow the Eigen-based headers above.
#include <httplib.h>

using namespace sqg;
using json = nlohmann::json;

namespace {

constexpr const char* kToken = "s3cret";

ServiceConfig test_config(const testing::TempDir& dir, bool with_model = true) {
  ServiceConfig c;
  c.listen = "127.0.0.1:0";
  c.log_path = dir.file("decisions.jsonl");
  c.model_path = dir.file("model.bin");
  c.rules_path = dir.file("rules.json");
  c.operator_token = kToken;
  c.sync_log = false;
  c.featurizer.dimension = 128;
  if (with_model) {
    const HashedNgramFeaturizer f(c.featurizer);
    ModelWeights m;
    m.head = LinearHead<double>(f.dimension());
    m.head.bias(ordinal(Label::kSafe)) = 5.0;
    m.model_version = "svc-model";
    m.featurizer_config_hash = f.config_hash();
    save_model(c.model_path, m);
  }
  return c;
}

struct Client {
  explicit Client(int port) : http("127.0.0.1", port) {}

  std::pair<int, json> call(const std::string& method, const std::string& path,
                            const json& body = nullptr, bool auth = false) {
    httplib::Headers headers;
    if (auth) headers.emplace("Authorization", std::string("Bearer ") + kToken);
    httplib::Result r;
    const std::string payload = body.is_null() ? "" : body.dump();
    if (method == "GET") r = http.Get(path, headers);
    if (method == "POST") r = http.Post(path, headers, payload, "application/json");
    if (method == "DELETE") r = http.Delete(path, headers);
    REQUIRE(r);
    json parsed = r->body.empty() ? json() : json::parse(r->body, nullptr, false);
    return {r->status, parsed};
  }

  std::string raw(const std::string& path) {
    auto r = http.Get(path);
    REQUIRE(r);
    return r->body;
  }

  httplib::Client http;
};

}  // namespace

TEST_CASE("service config from JSON and environment") {
  const auto c = config_from_json(json{{"listen", "0.0.0.0:9000"},
                                       {"sample_size", 20},
                                       {"featurizer", {{"dimension", 1024}}},
                                       {"block_reasons", {{"privacy", "개인정보"}}}});
  CHECK(c.host() == "0.0.0.0");
  CHECK(c.port() == 9000);
  CHECK(c.sample_size == 20);
  CHECK(c.featurizer.dimension == 1024);
  CHECK(c.block_reasons.at(Label::kPrivacy) == "개인정보");

  try {
    config_from_json(json{{"sample_size", "many"}});
    FAIL("accepted a string sample size");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidConfig);
    CHECK(std::string(e.what()).find("sample_size") != std::string::npos);
  }
  CHECK_THROWS_AS(config_from_json(json{{"block_reasons", {{"nope", "x"}}}}), Error);
  CHECK_THROWS_AS(config_from_json(json{{"sample_size", 0}}), Error);

  std::map<std::string, std::string> env = {{"SQG_LISTEN", "127.0.0.1:7001"},
                                            {"SQG_SAMPLE_SIZE", "12"},
                                            {"SQG_OPERATOR_TOKEN", "t"},
                                            {"SQG_SENTENCE_TERMINATORS", ";"}};
  const EnvLookup lookup = [&](const char* name) -> std::optional<std::string> {
    if (auto it = env.find(name); it != env.end()) return it->second;
    return std::nullopt;
  };
  ServiceConfig d;
  apply_env_overrides(d, lookup);
  CHECK(d.port() == 7001);
  CHECK(d.sample_size == 12);
  CHECK(d.operator_token == "t");
  CHECK(d.sentence_terminators == ";");

  env["SQG_SAMPLE_SIZE"] = "-3";
  CHECK_THROWS_AS(apply_env_overrides(d, lookup), Error);
  env["SQG_SAMPLE_SIZE"] = "12x";
  CHECK_THROWS_AS(apply_env_overrides(d, lookup), Error);

  testing::TempDir dir;
  {
    std::ofstream out(dir.file("svc.json"));
    out << R"({"log_path": "from-file.jsonl", "sample_size": 7})";
  }
  env.erase("SQG_SAMPLE_SIZE");
  env["SQG_LOG_PATH"] = "from-env.jsonl";
  const auto loaded = load_service_config(dir.file("svc.json"), lookup);
  CHECK(loaded.sample_size == 7);
  CHECK(loaded.log_path == "from-env.jsonl");
  CHECK_THROWS_AS(load_service_config(dir.file("missing.json"), lookup), Error);
}

TEST_CASE("service without a model reports not ready") {
  testing::TempDir dir;
  Service svc(test_config(dir, false));
  Client c(svc.start());
  CHECK(c.call("GET", "/v1/healthz").first == 503);
  const auto [status, body] = c.call("POST", "/v1/decide", {{"text", "안녕"}});
  CHECK(status == 503);
  CHECK(body.at("error") == "NotReady");
  svc.stop();
}

TEST_CASE("decision, rule and reload endpoints") {
  testing::TempDir dir;
  const ServiceConfig cfg = test_config(dir);
  Service svc(cfg);
  Client c(svc.start());

  auto [hs, health] = c.call("GET", "/v1/healthz");
  CHECK(hs == 200);
  CHECK(health.at("ready") == true);
  CHECK(health.at("model_version") == "svc-model");

  auto [ds, decision] = c.call("POST", "/v1/decide",
                               {{"query_id", "q1"},
                                {"text", "마약 어디서 사?"},
                                {"received_at", "2024-01-01T10:00:00Z"},
                                {"user_pseudonym", "pseudo-xyz"}});
  CHECK(ds == 200);
  CHECK(decision.at("query_id") == "q1");
  CHECK(decision.at("label") == "safe");
  CHECK(decision.at("blocked") == false);
  CHECK(decision.at("source") == "model");
  CHECK(decision.at("ruleset_version") == 0);
  CHECK_FALSE(decision.contains("block_reason"));

  CHECK(c.call("POST", "/v1/decide", {{"text", "   "}}).first == 400);
  CHECK(c.call("POST", "/v1/decide", json::array()).first == 400);
  CHECK(c.call("POST", "/v1/feedback", {{"query_id", "zz"}, {"report_type", "other"}}).first == 404);
  auto [fs, fb] = c.call("POST", "/v1/feedback", {{"query_id", "q1"}, {"report_type", "under_blocked"}});
  CHECK(fs == 200);
  CHECK(fb.at("queue_length") == 1);

  const json rule = {{"id", "drugs"},
                     {"kind", "blacklist"},
                     {"pattern", "마약"},
                     {"category", "felony_crimes"},
                     {"exemplars", {"마약 구매"}}};
  CHECK(c.call("POST", "/v1/rules", rule).first == 401);
  CHECK(c.call("POST", "/v1/rules", rule, true).first == 201);
  CHECK(c.call("POST", "/v1/rules", rule, true).first == 409);
  json bad = rule;
  bad["id"] = "broken";
  bad["pattern"] = "(";
  CHECK(c.call("POST", "/v1/rules", bad, true).first == 400);

  auto [rs, rules] = c.call("GET", "/v1/rules");
  CHECK(rs == 200);
  CHECK(rules.at("staged").at("rules").size() == 1);
  CHECK(rules.at("active").at("rules").empty());

  CHECK(c.call("POST", "/v1/reload", json::object()).first == 401);
  auto [ls, versions] = c.call("POST", "/v1/reload", json::object(), true);
  CHECK(ls == 200);
  CHECK(versions.at("ruleset_version") == 1);
  CHECK(versions.at("model_generation") == 1);
  CHECK(read_rule_file(cfg.rules_path).size() == 1);

  auto [bs, blocked] = c.call("POST", "/v1/decide",
                              {{"query_id", "q2"}, {"text", "안녕. 마약 어디서 사?"},
                               {"received_at", "2024-01-01T11:00:00Z"}});
  CHECK(bs == 200);
  CHECK(blocked.at("label") == "felony_crimes");
  CHECK(blocked.at("source") == "blacklist_override");
  CHECK(blocked.at("blocked") == true);
  CHECK(blocked.at("block_reason").get<std::string>().size() > 0);
  CHECK(blocked.at("ruleset_version") == 1);

  CHECK(c.call("DELETE", "/v1/rules/nope", nullptr, true).first == 404);
  CHECK(c.call("DELETE", "/v1/rules/drugs").first == 401);
  CHECK(c.call("DELETE", "/v1/rules/drugs", nullptr, true).first == 200);
  auto [l2, v2] = c.call("POST", "/v1/reload", {{"model", true}}, true);
  CHECK(l2 == 200);
  CHECK(v2.at("ruleset_version") == 2);
  CHECK(v2.at("model_generation") == 2);

  const std::string log = testing::read_file(cfg.log_path);
  CHECK(log.find("pseudo-xyz") == std::string::npos);
  svc.stop();
}

TEST_CASE("analytics and review endpoints") {
  testing::TempDir dir;
  ServiceConfig cfg = test_config(dir);
  cfg.sample_size = 2;
  {
    // Seed the log with a blacklist rule so sensitive decisions exist.
    const Rule r = rule_from_json({{"id", "addr"}, {"kind", "blacklist"}, {"pattern", "주소"},
                                   {"category", "privacy"}});
    write_rule_file(cfg.rules_path, std::vector<Rule>{r});
  }
  Service svc(cfg);
  Client c(svc.start());
  const char* days[] = {"2024-01-01", "2024-01-02", "2024-01-03"};
  int n = 0;
  for (const char* d : days) {
    for (int i = 0; i < 3; ++i) {
      const std::string id = "q" + std::to_string(n++);
      c.call("POST", "/v1/decide", {{"query_id", id}, {"text", "집 주소 " + id},
                                    {"received_at", std::string(d) + "T08:00:00Z"}});
      c.call("POST", "/v1/decide", {{"query_id", id + "s"}, {"text", "날씨 " + id},
                                    {"received_at", std::string(d) + "T09:00:00Z"}});
    }
  }

  auto [ds, daily] = c.call("GET", "/v1/analytics/daily");
  CHECK(ds == 200);
  CHECK(daily.at("buckets").size() == 3);
  CHECK(daily.at("volume_ratio").size() == 3);
  CHECK(c.call("GET", "/v1/analytics/daily?date=2024-01-02").first == 200);
  CHECK(c.call("GET", "/v1/analytics/daily?date=2024-02-02").first == 422);
  CHECK(c.call("GET", "/v1/analytics/daily?date=junk").first == 400);
  CHECK(c.call("GET", "/v1/analytics/overall").first == 200);
  CHECK(c.call("GET", "/v1/analytics/cumulative?upto=2024-01-02").first == 200);
  CHECK(c.call("GET", "/v1/analytics/events?start=2024-01-01&days=3").first == 200);
  CHECK(c.call("GET", "/v1/analytics/events?start=2024-01-02&days=3").first == 422);
  CHECK(c.call("GET", "/v1/analytics/correlation").first == 200);
  CHECK(c.call("GET", "/v1/analytics/correlation?basis=odd").first == 400);
  auto [ks, kw] = c.call("GET", "/v1/analytics/keywords?category=privacy&k=3");
  CHECK(ks == 200);
  CHECK(kw.dump().find("주소") != std::string::npos);

  auto [ss, samples] = c.call("GET", "/v1/review/samples?date=2024-01-01");
  CHECK(ss == 200);
  REQUIRE(samples.at("samples").size() == 2);
  auto [ss2, again] = c.call("GET", "/v1/review/samples?date=2024-01-01");
  CHECK(again == samples);
  const std::string sid0 = samples["samples"][0].at("sample_id");
  const std::string sid1 = samples["samples"][1].at("sample_id");

  const json verdict = {{"sample_id", sid0}, {"verdict", "Harm"}, {"reviewer", "kim"}};
  CHECK(c.call("POST", "/v1/review/verdicts", verdict).first == 401);
  CHECK(c.call("POST", "/v1/review/verdicts", verdict, true).first == 201);
  CHECK(c.call("POST", "/v1/review/verdicts", verdict, true).first == 409);
  CHECK(c.call("POST", "/v1/review/verdicts",
               {{"sample_id", "1999-01-01#0"}, {"verdict", "Harm"}, {"reviewer", "kim"}}, true)
            .first == 404);
  CHECK(c.call("POST", "/v1/review/verdicts", {{"sample_id", sid1}, {"verdict", "harm"}}, true).first ==
        400);
  CHECK(c.call("POST", "/v1/review/verdicts",
               {{"sample_id", sid1}, {"verdict", "MustSafe"}, {"reviewer", "kim"}}, true)
            .first == 201);

  auto [ps, precision] = c.call("GET", "/v1/metrics/precision?group=day");
  CHECK(ps == 200);
  CHECK(precision.at("precision").get<double>() == doctest::Approx(50.0));
  CHECK(precision.at("timeline").size() == 1);
  CHECK(c.call("GET", "/v1/metrics/precision?group=year").first == 400);

  const std::string csv = c.raw("/v1/review/verdicts?format=csv");
  CHECK(parse_verdicts_csv(csv).size() == 2);

  auto [pr, proposals] = c.call("GET", "/v1/review/proposals");
  CHECK(pr == 200);
  CHECK(proposals.at("rules").size() == 1);
  CHECK(proposals.at("rules")[0].at("enabled") == false);
  CHECK(proposals.at("examples").size() == 2);
  svc.stop();
}
