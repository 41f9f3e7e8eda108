#include <doctest.h>

#include <cmath>
#include <map>

#include <nlohmann/json.hpp>

#include "sqg/error.hpp"
#include "sqg/simulator.hpp"
#include "support.hpp"

using namespace sqg;

namespace {

StreamConfig small_config(std::uint64_t seed = 5) {
  StreamConfig c;
  c.days = 14;
  c.peak_volume = 2000;
  c.seed = seed;
  return c;
}

std::map<Date, std::vector<const SimulatedQuery*>> by_day(const std::vector<SimulatedQuery>& s) {
  std::map<Date, std::vector<const SimulatedQuery*>> out;
  for (const auto& q : s) out[date_of(q.record.received_at)].push_back(&q);
  return out;
}

std::string invalid_field(const StreamConfig& c) {
  try {
    validate(c);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidConfig);
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("streams are deterministic per seed") {
  const auto a = generate_stream(small_config(5));
  const auto b = generate_stream(small_config(5));
  const auto c = generate_stream(small_config(6));
  CHECK(stream_jsonl(a) == stream_jsonl(b));
  CHECK(sidecar_jsonl(a) == sidecar_jsonl(b));
  CHECK(stream_jsonl(a) != stream_jsonl(c));
}

TEST_CASE("daily volume follows the launch peak and the ratio band") {
  const StreamConfig cfg = small_config();
  const auto stream = generate_stream(cfg);
  const auto days = by_day(stream);
  REQUIRE(days.size() == static_cast<std::size_t>(cfg.days));
  int d = 1;
  for (const auto& [date, queries] : days) {
    CHECK(date == cfg.start_date + std::chrono::days(d - 1));
    const auto n = static_cast<std::int64_t>(queries.size());
    if (d <= cfg.launch_days) {
      CHECK(n == cfg.peak_volume);
    } else {
      CHECK(n >= static_cast<std::int64_t>(std::ceil(cfg.peak_volume * cfg.ratio_lo)));
      CHECK(n <= static_cast<std::int64_t>(std::floor(cfg.peak_volume * cfg.ratio_hi)));
    }
    std::int64_t sensitive = 0;
    for (const auto* q : queries) sensitive += is_sensitive(q->planted);
    const double rate = static_cast<double>(sensitive) / static_cast<double>(n);
    const double slack = 0.5 / static_cast<double>(n);
    CHECK(rate >= cfg.sensitive_lo - slack);
    CHECK(rate <= cfg.sensitive_hi + slack);
    // Timestamps are ordered within the day and ids are unique.
    for (std::size_t i = 1; i < queries.size(); ++i) {
      CHECK(queries[i - 1]->record.received_at <= queries[i]->record.received_at);
      CHECK(queries[i - 1]->record.query_id < queries[i]->record.query_id);
    }
    ++d;
  }
}

TEST_CASE("weekends sit lower in the band") {
  StreamConfig cfg = small_config();
  cfg.days = 63;
  cfg.weekend_multiplier = 0.2;
  const auto days = by_day(generate_stream(cfg));
  double weekday = 0, weekend = 0;
  int nwd = 0, nwe = 0;
  int d = 1;
  for (const auto& [date, queries] : days) {
    if (d++ <= cfg.launch_days) continue;
    if (iso_weekday(date) >= 5) {
      weekend += static_cast<double>(queries.size());
      ++nwe;
    } else {
      weekday += static_cast<double>(queries.size());
      ++nwd;
    }
  }
  CHECK(weekend / nwe < weekday / nwd);
}

TEST_CASE("category mix converges to the configured distribution") {
  StreamConfig cfg;
  cfg.days = 12;
  cfg.peak_volume = 20000;
  cfg.sensitive_lo = 0.6;
  cfg.sensitive_hi = 0.6;
  cfg.seed = 9;
  const auto stream = generate_stream(cfg);
  std::array<std::int64_t, kNumSensitive> counts{};
  std::int64_t sensitive = 0;
  for (const auto& q : stream) {
    if (!is_sensitive(q.planted)) continue;
    ++counts[static_cast<std::size_t>(q.planted)];
    ++sensitive;
  }
  REQUIRE(sensitive >= 100000);
  double total_share = 0;
  for (std::size_t c = 0; c < kNumSensitive; ++c) total_share += cfg.distribution[c];
  for (std::size_t c = 0; c < kNumSensitive; ++c) {
    const double observed = 100.0 * static_cast<double>(counts[c]) / static_cast<double>(sensitive);
    const double expected = 100.0 * cfg.distribution[c] / total_share;
    CHECK_MESSAGE(std::abs(observed - expected) < 1.0, category_id(label_from_ordinal(static_cast<int>(c))));
  }
}

TEST_CASE("event weights apply inside the window only") {
  StreamConfig base = small_config();
  EventSpec ev;
  ev.start_day = 5;
  ev.duration = 3;
  ev.multipliers[Label::kFelonyCrimes] = 3.0;
  const StreamConfig cfg = inject_event(base, ev);

  const auto plain = day_weights(base, 6);
  const auto w = day_weights(cfg, 6);
  const double f = plain[0];
  // Oracle: scale felony by 3 and renormalize.
  CHECK(w[0] == doctest::Approx(3 * f / (3 * f + (1 - f))));
  for (std::size_t c = 1; c < kNumSensitive; ++c) CHECK(w[c] == doctest::Approx(plain[c] / (3 * f + (1 - f))));
  CHECK(w[static_cast<std::size_t>(Label::kSafe)] == 0.0);
  for (int d : {4, 8, 14}) {
    const auto out = day_weights(cfg, d);
    for (std::size_t c = 0; c < kNumCategories; ++c) CHECK(out[c] == plain[c]);
  }
  double sum = 0;
  for (double x : w) sum += x;
  CHECK(sum == doctest::Approx(1.0));

  // A multiplier of 1 leaves the stream byte-identical.
  EventSpec noop = ev;
  noop.multipliers[Label::kFelonyCrimes] = 1.0;
  CHECK(stream_jsonl(generate_stream(inject_event(base, noop))) == stream_jsonl(generate_stream(base)));
}

TEST_CASE("overlapping events compose multiplicatively") {
  StreamConfig cfg = small_config();
  EventSpec a;
  a.start_day = 4;
  a.duration = 4;
  a.multipliers[Label::kFelonyCrimes] = 2.0;
  a.multipliers[Label::kPrivacy] = 2.0;
  EventSpec b;
  b.start_day = 6;
  b.duration = 3;
  b.multipliers[Label::kFelonyCrimes] = 1.5;
  cfg = inject_event(inject_event(cfg, a), b);

  CategoryShares raw{};
  for (std::size_t c = 0; c < kNumSensitive; ++c) raw[c] = cfg.distribution[c];
  raw[0] *= 3.0;
  raw[2] *= 2.0;
  double s = 0;
  for (std::size_t c = 0; c < kNumSensitive; ++c) s += raw[c];
  const auto w = day_weights(cfg, 6);
  for (std::size_t c = 0; c < kNumSensitive; ++c) CHECK(w[c] == doctest::Approx(raw[c] / s));
}

TEST_CASE("event terms appear only in the boosted category during the event") {
  StreamConfig cfg = small_config();
  EventSpec ev;
  ev.start_day = 5;
  ev.duration = 2;
  ev.multipliers[Label::kFelonyCrimes] = 3.0;
  ev.extra_terms = {"테러사건"};
  cfg = inject_event(cfg, ev);
  int inside = 0;
  for (const auto& q : generate_stream(cfg)) {
    if (q.record.text.find("테러사건") == std::string::npos) continue;
    const auto day = (date_of(q.record.received_at) - cfg.start_date).count() + 1;
    CHECK(q.planted == Label::kFelonyCrimes);
    CHECK(day >= 5);
    CHECK(day <= 6);
    ++inside;
  }
  CHECK(inside > 0);
}

TEST_CASE("configuration validation names the field") {
  StreamConfig c = small_config();
  CHECK(invalid_field(c).empty());

  c = small_config();
  c.ratio_lo = 0.9;
  CHECK(invalid_field(c).find("ratio_band") != std::string::npos);
  c = small_config();
  c.sensitive_hi = 1.5;
  CHECK(invalid_field(c).find("sensitive_band[1]") != std::string::npos);
  c = small_config();
  c.distribution[3] = -1;
  CHECK(invalid_field(c).find("distribution.") != std::string::npos);
  c = small_config();
  c.days = 0;
  CHECK(invalid_field(c).find("days") != std::string::npos);
  c = small_config();
  c.events.push_back({20, 3, {{Label::kPrivacy, 2.0}}, "", {}});
  CHECK(invalid_field(c).find("events[0].start_day") != std::string::npos);
  c = small_config();
  c.events.push_back({2, 3, {{Label::kPrivacy, 0.0}}, "", {}});
  CHECK(invalid_field(c).find("events[0].multipliers") != std::string::npos);

  EventSpec late;
  late.start_day = 13;
  late.duration = 3;
  try {
    inject_event(small_config(), late);
    FAIL("out-of-range event accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kWindowOutOfRange);
  }
  late.start_day = 12;
  CHECK_NOTHROW(inject_event(small_config(), late));
}

TEST_CASE("the oracle recovers every planted label") {
  const auto stream = generate_stream(small_config());
  std::int64_t sensitive = 0;
  for (const auto& q : stream) {
    CHECK(oracle_label(q.record.text) == q.planted);
    sensitive += is_sensitive(q.planted);
  }
  CHECK(sensitive > 0);
  const auto ds = oracle_decisions(stream);
  REQUIRE(ds.size() == stream.size());
  CHECK(ds[0].query_id == stream[0].record.query_id);
  CHECK(ds[0].model_version == "oracle");
  const auto predictor = oracle_predictor();
  CHECK(predictor(stream[0].record.text) == stream[0].planted);
  for (std::size_t c = 0; c < kNumSensitive; ++c) {
    const Label l = label_from_ordinal(static_cast<int>(c));
    CHECK(oracle_label(std::string("뭐 ") + std::string(signature_token(l)) + "?") == l);
    CHECK(category_terms(l).size() >= 2);
  }
  CHECK(oracle_label("평범한 질문") == Label::kSafe);
}

TEST_CASE("stream files round trip and keep labels out of the stream") {
  testing::TempDir dir;
  const auto stream = generate_stream(small_config());
  write_stream(dir.file("s.jsonl"), dir.file("p.jsonl"), stream);
  const auto back = read_stream(dir.file("s.jsonl"), dir.file("p.jsonl"));
  REQUIRE(back.size() == stream.size());
  for (std::size_t i = 0; i < stream.size(); ++i) {
    CHECK(back[i].record.query_id == stream[i].record.query_id);
    CHECK(back[i].record.text == stream[i].record.text);
    CHECK(back[i].record.received_at == stream[i].record.received_at);
    CHECK(back[i].record.user_pseudonym == stream[i].record.user_pseudonym);
    CHECK(back[i].planted == stream[i].planted);
  }
  CHECK(testing::read_file(dir.file("s.jsonl")).find("planted") == std::string::npos);

  const auto unlabeled = read_stream(dir.file("s.jsonl"), "");
  CHECK(unlabeled.size() == stream.size());

  {
    std::ofstream out(dir.file("bad.jsonl"));
    out << "{\"query_id\":\"nope\",\"planted\":\"privacy\"}\n";
  }
  CHECK_THROWS_AS(read_stream(dir.file("s.jsonl"), dir.file("bad.jsonl")), Error);
}

TEST_CASE("stream config JSON round trip") {
  StreamConfig cfg = small_config(77);
  EventSpec ev;
  ev.start_day = 3;
  ev.duration = 2;
  ev.label = "incident";
  ev.multipliers[Label::kPrivacy] = 2.5;
  ev.extra_terms = {"유출"};
  cfg = inject_event(cfg, ev);
  const auto back = stream_config_from_json(stream_config_to_json(cfg));
  CHECK(stream_jsonl(generate_stream(back)) == stream_jsonl(generate_stream(cfg)));
  CHECK(back.events.size() == 1);
  CHECK(back.events[0].label == "incident");

  auto j = stream_config_to_json(cfg);
  j["events"][0]["start_day"] = 40;
  CHECK_THROWS_AS(stream_config_from_json(j), Error);
}
