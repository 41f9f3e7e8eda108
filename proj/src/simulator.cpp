#include "sqg/simulator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "sqg/error.hpp"
#include "sqg/random.hpp"

namespace sqg {
namespace {

using Terms = std::vector<std::string_view>;

constexpr std::array<std::string_view, kNumSensitive> kSignatures = {
    "범죄", "섹스", "주소", "다운로드", "성차별", "자살",
    "비속어", "대화", "민원", "전망", "정치", "멸망"};

const std::array<Terms, kNumSensitive>& term_table() {
  static const std::array<Terms, kNumSensitive> table = {
      Terms{"마약", "사이트", "사건", "번호"},
      Terms{"사진", "여자", "친구", "남자"},
      Terms{"번호", "정보", "집", "마약", "비밀", "아이디", "개인"},
      Terms{"사이트", "무료", "사진", "소설", "영화"},
      Terms{"남자", "여자", "이유", "친구", "문제"},
      Terms{"고통", "우울", "엄마", "죽음"},
      Terms{"욕", "단어", "뜻", "표현", "친구", "사용", "반말"},
      Terms{"친구", "사진", "여자", "이름", "대통령"},
      Terms{"학부모", "표", "사례", "위치", "악성", "극단"},
      Terms{"주식", "가능", "투자", "주가", "가격", "시장", "비트"},
      Terms{"대통령", "땅", "나라", "문제", "법", "이유"},
      Terms{"꿈", "삼촌", "인간", "인공지능", "지배", "세계", "지구"},
  };
  return table;
}

constexpr std::array<std::string_view, 7> kNoise = {"방법", "사람", "생각", "추천",
                                                    "말",   "알려줘", "궁금해"};
constexpr std::array<std::string_view, 16> kSafeSubjects = {
    "날씨", "맛집", "여행지", "레시피", "노트북", "운동", "영어공부", "캠핑",
    "커피", "강아지", "자전거", "도서관", "수영", "요가", "김치찌개", "기차"};
constexpr std::array<std::string_view, 6> kSafeAsks = {"추천", "방법", "정리", "비교", "후기", "순위"};
constexpr std::array<std::string_view, 5> kSafePlaces = {"서울", "부산", "제주", "대전", "광주"};

[[noreturn]] void bad(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::kInvalidConfig, field + ": " + why);
}

bool in_unit_interval(double x) { return std::isfinite(x) && x > 0.0 && x <= 1.0; }

bool is_weekend(Date d) { return iso_weekday(d) >= 5; }

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

std::string pick(std::span<const std::string_view> items, Rng& rng) {
  return std::string(items[rng.below(items.size())]);
}

std::string sensitive_text(Label label, const std::vector<std::string>& event_terms, Rng& rng) {
  const auto& terms = term_table()[static_cast<std::size_t>(label)];
  std::vector<std::string> words{std::string(signature_token(label))};
  const std::size_t first = rng.below(terms.size());
  std::size_t second = rng.below(terms.size() - 1);
  if (second >= first) ++second;
  words.emplace_back(terms[first]);
  words.emplace_back(terms[second]);
  if (!event_terms.empty() && rng.below(2) == 0) {
    words.push_back(event_terms[rng.below(event_terms.size())]);
  }
  if (rng.below(2) == 0) words.push_back(pick(kNoise, rng));
  rng.shuffle(std::span(words));
  return join(words) + "?";
}

std::string safe_text(Rng& rng) {
  std::vector<std::string> words{pick(kSafePlaces, rng), pick(kSafeSubjects, rng),
                                 pick(kSafeAsks, rng)};
  return join(words);
}

}  // namespace

std::string_view signature_token(Label label) {
  if (!is_sensitive(label)) return {};
  return kSignatures[static_cast<std::size_t>(label)];
}

std::span<const std::string_view> category_terms(Label label) {
  if (!is_sensitive(label)) return {};
  return term_table()[static_cast<std::size_t>(label)];
}

void validate(const StreamConfig& c) {
  if (c.days < 1) bad("days", "must be >= 1");
  if (c.peak_volume < 1) bad("peak_volume", "must be >= 1");
  if (c.launch_days < 1 || c.launch_days > c.days) bad("launch_days", "must be in [1, days]");
  if (!in_unit_interval(c.ratio_lo)) bad("ratio_band[0]", "must be in (0,1]");
  if (!in_unit_interval(c.ratio_hi)) bad("ratio_band[1]", "must be in (0,1]");
  if (c.ratio_lo > c.ratio_hi) bad("ratio_band", "lower bound exceeds upper bound");
  if (!in_unit_interval(c.weekday_multiplier)) bad("weekday_multiplier", "must be in (0,1]");
  if (!in_unit_interval(c.weekend_multiplier)) bad("weekend_multiplier", "must be in (0,1]");
  if (!in_unit_interval(c.sensitive_lo)) bad("sensitive_band[0]", "must be in (0,1]");
  if (!in_unit_interval(c.sensitive_hi)) bad("sensitive_band[1]", "must be in (0,1]");
  if (c.sensitive_lo > c.sensitive_hi) bad("sensitive_band", "lower bound exceeds upper bound");
  if (c.users < 1) bad("users", "must be >= 1");
  double sum = 0;
  for (std::size_t i = 0; i < kNumSensitive; ++i) {
    const double s = c.distribution[i];
    if (!std::isfinite(s) || s < 0) {
      bad("distribution." + std::string(category_id(label_from_ordinal(i))), "must be finite and >= 0");
    }
    sum += s;
  }
  if (std::abs(sum - 100.0) > 1.0) bad("distribution", "shares must sum to ~100");
  for (std::size_t e = 0; e < c.events.size(); ++e) {
    const EventSpec& ev = c.events[e];
    const std::string path = "events[" + std::to_string(e) + "]";
    if (ev.duration < 1) bad(path + ".duration", "must be >= 1");
    if (ev.start_day < 1 || ev.start_day + ev.duration - 1 > c.days) {
      bad(path + ".start_day", "window outside the stream");
    }
    for (const auto& [label, factor] : ev.multipliers) {
      if (!is_sensitive(label)) bad(path + ".multipliers.safe", "safe cannot be multiplied");
      if (!std::isfinite(factor) || factor <= 0) {
        bad(path + ".multipliers." + std::string(category_id(label)), "must be finite and > 0");
      }
    }
  }
}

StreamConfig inject_event(StreamConfig config, EventSpec event) {
  if (event.duration < 1 || event.start_day < 1 ||
      event.start_day + event.duration - 1 > config.days) {
    throw Error(ErrorCode::kWindowOutOfRange,
                "event window [" + std::to_string(event.start_day) + ", +" +
                    std::to_string(event.duration) + ") outside " + std::to_string(config.days) +
                    " days");
  }
  config.events.push_back(std::move(event));
  validate(config);
  return config;
}

CategoryShares day_weights(const StreamConfig& config, int day) {
  CategoryShares w{};
  for (std::size_t i = 0; i < kNumSensitive; ++i) w[i] = config.distribution[i];
  for (const EventSpec& ev : config.events) {
    if (day < ev.start_day || day >= ev.start_day + ev.duration) continue;
    for (const auto& [label, factor] : ev.multipliers) w[static_cast<std::size_t>(label)] *= factor;
  }
  double sum = 0;
  for (std::size_t i = 0; i < kNumSensitive; ++i) sum += w[i];
  for (std::size_t i = 0; i < kNumSensitive; ++i) w[i] = sum > 0 ? w[i] / sum : 0;
  w[static_cast<std::size_t>(Label::kSafe)] = 0;
  return w;
}

std::vector<SimulatedQuery> generate_stream(const StreamConfig& config) {
  validate(config);
  Rng rng(config.seed);
  const auto peak = static_cast<double>(config.peak_volume);
  const auto min_count = static_cast<std::int64_t>(std::ceil(peak * config.ratio_lo));
  const auto max_count =
      std::min(static_cast<std::int64_t>(std::floor(peak * config.ratio_hi)), config.peak_volume);

  std::vector<SimulatedQuery> out;
  for (int day = 1; day <= config.days; ++day) {
    const Date date = config.start_date + std::chrono::days(day - 1);
    std::int64_t total = config.peak_volume;
    if (day > config.launch_days) {
      const double mult = is_weekend(date) ? config.weekend_multiplier : config.weekday_multiplier;
      const double ratio = config.ratio_lo + (config.ratio_hi - config.ratio_lo) * rng.unit() * mult;
      total = std::clamp(static_cast<std::int64_t>(std::llround(ratio * peak)), min_count,
                         std::max(min_count, max_count));
    }
    const double rate = rng.uniform(config.sensitive_lo, config.sensitive_hi);
    const auto n = static_cast<std::size_t>(total);
    const auto n_sensitive =
        std::min(n, static_cast<std::size_t>(std::llround(rate * static_cast<double>(total))));

    // Which slots of the day are sensitive.
    std::vector<std::size_t> slots(n);
    for (std::size_t i = 0; i < n; ++i) slots[i] = i;
    for (std::size_t i = 0; i < n_sensitive; ++i) {
      std::swap(slots[i], slots[i + rng.below(n - i)]);
    }
    std::vector<bool> sensitive(n, false);
    for (std::size_t i = 0; i < n_sensitive; ++i) sensitive[slots[i]] = true;

    const CategoryShares weights = day_weights(config, day);
    std::array<std::vector<std::string>, kNumSensitive> event_terms;
    for (const EventSpec& ev : config.events) {
      if (day < ev.start_day || day >= ev.start_day + ev.duration) continue;
      for (const auto& [label, factor] : ev.multipliers) {
        auto& terms = event_terms[static_cast<std::size_t>(label)];
        terms.insert(terms.end(), ev.extra_terms.begin(), ev.extra_terms.end());
      }
    }

    std::vector<std::int64_t> seconds(n);
    for (auto& s : seconds) s = static_cast<std::int64_t>(rng.below(86400));
    std::sort(seconds.begin(), seconds.end());

    char id[48];
    const std::string compact = [&] {
      std::string s = format_date(date);
      s.erase(std::remove(s.begin(), s.end(), '-'), s.end());
      return s;
    }();
    for (std::size_t i = 0; i < n; ++i) {
      SimulatedQuery q;
      std::snprintf(id, sizeof id, "sim-%s-%06zu", compact.c_str(), i);
      q.record.query_id = id;
      q.record.received_at = Timestamp(date) + std::chrono::seconds(seconds[i]);
      std::snprintf(id, sizeof id, "u%08llx",
                    static_cast<unsigned long long>(rng.below(static_cast<std::uint64_t>(config.users))));
      q.record.user_pseudonym = id;
      if (sensitive[i]) {
        double u = rng.unit();
        std::size_t c = 0;
        for (; c + 1 < kNumSensitive; ++c) {
          if (u < weights[c]) break;
          u -= weights[c];
        }
        // Guard against rounding pushing the draw onto a zero-weight tail.
        while (weights[c] == 0 && c > 0) --c;
        q.planted = label_from_ordinal(c);
        q.record.text = sensitive_text(q.planted, event_terms[c], rng);
      } else {
        q.planted = Label::kSafe;
        q.record.text = safe_text(rng);
      }
      out.push_back(std::move(q));
    }
  }
  return out;
}

Label oracle_label(std::string_view text) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find(' ', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view token = text.substr(pos, end - pos);
    while (!token.empty() && (token.back() == '?' || token.back() == '.' || token.back() == '!')) {
      token.remove_suffix(1);
    }
    for (std::size_t c = 0; c < kNumSensitive; ++c) {
      if (token == kSignatures[c]) return label_from_ordinal(c);
    }
    pos = end + 1;
  }
  return Label::kSafe;
}

Predictor oracle_predictor() {
  return [](std::string_view text) { return oracle_label(text); };
}

Decision oracle_decision(const QueryRecord& query) {
  Decision d;
  d.query_id = query.query_id;
  d.text = query.text;
  d.received_at = query.received_at;
  d.label = oracle_label(query.text);
  d.model_label = d.label;
  d.source = DecisionSource::kModel;
  d.scores = ScoreVector::Zero();
  d.scores(static_cast<Eigen::Index>(d.label)) = 1.0;
  d.cue_prefix = cue_prefix_for(d.label);
  d.blocked = is_sensitive(d.label);
  if (d.blocked) d.block_reason = std::string(category(d.label).block_reason_template);
  d.model_version = "oracle";
  d.decided_at = query.received_at;
  return d;
}

std::vector<Decision> oracle_decisions(std::span<const SimulatedQuery> stream) {
  std::vector<Decision> out;
  out.reserve(stream.size());
  for (const auto& q : stream) out.push_back(oracle_decision(q.record));
  return out;
}

nlohmann::json stream_config_to_json(const StreamConfig& c) {
  nlohmann::json dist = nlohmann::json::object();
  for (std::size_t i = 0; i < kNumSensitive; ++i) {
    dist[std::string(category_id(label_from_ordinal(i)))] = c.distribution[i];
  }
  nlohmann::json events = nlohmann::json::array();
  for (const auto& ev : c.events) {
    nlohmann::json m = nlohmann::json::object();
    for (const auto& [label, factor] : ev.multipliers) m[std::string(category_id(label))] = factor;
    events.push_back({{"start_day", ev.start_day},
                      {"duration", ev.duration},
                      {"multipliers", m},
                      {"label", ev.label},
                      {"extra_terms", ev.extra_terms}});
  }
  return {{"days", c.days},
          {"peak_volume", c.peak_volume},
          {"launch_days", c.launch_days},
          {"ratio_band", {c.ratio_lo, c.ratio_hi}},
          {"weekday_multiplier", c.weekday_multiplier},
          {"weekend_multiplier", c.weekend_multiplier},
          {"sensitive_band", {c.sensitive_lo, c.sensitive_hi}},
          {"distribution", dist},
          {"events", events},
          {"seed", c.seed},
          {"start_date", format_date(c.start_date)},
          {"users", c.users}};
}

StreamConfig stream_config_from_json(const nlohmann::json& j) {
  StreamConfig c;
  const auto field = [&](const char* name) -> const nlohmann::json* {
    const auto it = j.find(name);
    return it == j.end() ? nullptr : &*it;
  };
  try {
    if (!j.is_object()) bad("$", "config must be an object");
    if (auto* v = field("days")) c.days = v->get<int>();
    if (auto* v = field("peak_volume")) c.peak_volume = v->get<std::int64_t>();
    if (auto* v = field("launch_days")) c.launch_days = v->get<int>();
    if (auto* v = field("ratio_band")) {
      c.ratio_lo = v->at(0).get<double>();
      c.ratio_hi = v->at(1).get<double>();
    }
    if (auto* v = field("weekday_multiplier")) c.weekday_multiplier = v->get<double>();
    if (auto* v = field("weekend_multiplier")) c.weekend_multiplier = v->get<double>();
    if (auto* v = field("sensitive_band")) {
      c.sensitive_lo = v->at(0).get<double>();
      c.sensitive_hi = v->at(1).get<double>();
    }
    if (auto* v = field("distribution")) {
      c.distribution = CategoryShares{};
      for (const auto& [id, share] : v->items()) {
        c.distribution[static_cast<std::size_t>(parse_label(id))] = share.get<double>();
      }
    }
    if (auto* v = field("events")) {
      for (const auto& e : *v) {
        EventSpec ev;
        ev.start_day = e.at("start_day").get<int>();
        ev.duration = e.value("duration", 3);
        ev.label = e.value("label", std::string());
        for (const auto& [id, factor] : e.at("multipliers").items()) {
          ev.multipliers[parse_label(id)] = factor.get<double>();
        }
        if (e.contains("extra_terms")) ev.extra_terms = e["extra_terms"].get<std::vector<std::string>>();
        c.events.push_back(std::move(ev));
      }
    }
    if (auto* v = field("seed")) c.seed = v->get<std::uint64_t>();
    if (auto* v = field("start_date")) c.start_date = parse_date(v->get<std::string>());
    if (auto* v = field("users")) c.users = v->get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    bad("$", e.what());
  }
  validate(c);
  return c;
}

std::string stream_jsonl(std::span<const SimulatedQuery> stream) {
  std::string out;
  for (const auto& q : stream) {
    out += nlohmann::json{{"query_id", q.record.query_id},
                          {"text", q.record.text},
                          {"received_at", format_timestamp(q.record.received_at)},
                          {"user_pseudonym", q.record.user_pseudonym}}
               .dump();
    out.push_back('\n');
  }
  return out;
}

std::string sidecar_jsonl(std::span<const SimulatedQuery> stream) {
  std::string out;
  for (const auto& q : stream) {
    out += nlohmann::json{{"query_id", q.record.query_id}, {"planted", category_id(q.planted)}}.dump();
    out.push_back('\n');
  }
  return out;
}

void write_stream(const std::string& stream_path, const std::string& sidecar_path,
                  std::span<const SimulatedQuery> stream) {
  const auto write = [](const std::string& path, const std::string& body) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f << body;
    if (!f) throw Error(ErrorCode::kStorageFailure, "cannot write " + path);
  };
  write(stream_path, stream_jsonl(stream));
  write(sidecar_path, sidecar_jsonl(stream));
}

std::vector<SimulatedQuery> read_stream(const std::string& stream_path,
                                        const std::string& sidecar_path) {
  const auto corrupt = [](const std::string& path, std::size_t line, const std::string& why) {
    return Error(ErrorCode::kCorruptRecord, path + ":" + std::to_string(line) + ": " + why);
  };
  std::ifstream sf(stream_path);
  if (!sf) throw Error(ErrorCode::kStorageFailure, "cannot open " + stream_path);
  std::vector<SimulatedQuery> out;
  std::unordered_map<std::string, std::size_t> index;
  std::string line;
  std::size_t n = 0;
  while (std::getline(sf, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      SimulatedQuery q;
      q.record.query_id = j.at("query_id").get<std::string>();
      q.record.text = j.at("text").get<std::string>();
      q.record.received_at = parse_timestamp(j.at("received_at").get<std::string>());
      q.record.user_pseudonym = j.value("user_pseudonym", std::string());
      index[q.record.query_id] = out.size();
      out.push_back(std::move(q));
    } catch (const std::exception& e) {
      throw corrupt(stream_path, n, e.what());
    }
  }
  if (sidecar_path.empty()) return out;
  std::ifstream pf(sidecar_path);
  if (!pf) throw Error(ErrorCode::kStorageFailure, "cannot open " + sidecar_path);
  n = 0;
  while (std::getline(pf, line)) {
    ++n;
    if (line.empty()) continue;
    std::string id;
    Label planted;
    try {
      const auto j = nlohmann::json::parse(line);
      id = j.at("query_id").get<std::string>();
      planted = parse_label(j.at("planted").get<std::string>());
    } catch (const std::exception& e) {
      throw corrupt(sidecar_path, n, e.what());
    }
    const auto it = index.find(id);
    if (it == index.end()) throw corrupt(sidecar_path, n, "unknown query id " + id);
    out[it->second].planted = planted;
  }
  return out;
}

}  // namespace sqg
