#include "sqg/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sqg/error.hpp"
#include "sqg/regex.hpp"

namespace sqg {

namespace {

constexpr int kSensitive = static_cast<int>(kNumSensitive);

void add_decision(std::map<Date, DailyBucket>& by_date, const Decision& d) {
  const Date day = date_of(d.received_at);
  DailyBucket& b = by_date[day];
  b.date = day;
  ++b.total_queries;
  if (is_sensitive(d.label)) {
    ++b.sensitive_queries;
    ++b.per_category[static_cast<std::size_t>(d.label)];
  }
}

std::vector<DailyBucket> flatten(std::map<Date, DailyBucket>& by_date) {
  std::vector<DailyBucket> out;
  out.reserve(by_date.size());
  for (auto& [date, bucket] : by_date) out.push_back(bucket);
  return out;
}

}  // namespace

std::vector<DailyBucket> bucketize(std::span<const Decision> decisions) {
  std::map<Date, DailyBucket> by_date;
  for (const Decision& d : decisions) add_decision(by_date, d);
  return flatten(by_date);
}

std::vector<DailyBucket> bucketize_log(std::istream& log) {
  std::map<Date, DailyBucket> by_date;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(log, line)) {
    ++line_no;
    if (line.empty()) continue;
    Decision d;
    try {
      d = decision_from_json(nlohmann::json::parse(line));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kCorruptRecord, "line " + std::to_string(line_no) + ": " + e.what());
    }
    add_decision(by_date, d);
  }
  return flatten(by_date);
}

std::vector<DailyBucket> merge_buckets(std::span<const DailyBucket> a,
                                       std::span<const DailyBucket> b) {
  std::map<Date, DailyBucket> by_date;
  for (const auto* list : {&a, &b}) {
    for (const DailyBucket& src : *list) {
      DailyBucket& dst = by_date[src.date];
      dst.date = src.date;
      dst.total_queries += src.total_queries;
      dst.sensitive_queries += src.sensitive_queries;
      for (std::size_t c = 0; c < kNumSensitive; ++c) dst.per_category[c] += src.per_category[c];
    }
  }
  return flatten(by_date);
}

std::vector<DatedValue> daily_volume_ratio(std::span<const DailyBucket> buckets) {
  if (buckets.empty()) throw Error(ErrorCode::kEmptyInput, "no buckets");
  // Earliest date wins ties, so only it gets exactly 1.0.
  std::size_t peak = 0;
  for (std::size_t i = 1; i < buckets.size(); ++i) {
    if (buckets[i].total_queries > buckets[peak].total_queries) peak = i;
  }
  const auto max_total = static_cast<double>(buckets[peak].total_queries);
  std::vector<DatedValue> out;
  for (std::size_t i = 0; i < buckets.size(); ++i) {
    double ratio = max_total > 0 ? static_cast<double>(buckets[i].total_queries) / max_total : 0;
    if (i != peak && ratio >= 1.0) ratio = std::nextafter(1.0, 0.0);
    out.push_back({buckets[i].date, ratio});
  }
  return out;
}

std::vector<DatedValue> sensitive_ratio(std::span<const DailyBucket> buckets) {
  std::vector<DatedValue> out;
  for (const DailyBucket& b : buckets) {
    DatedValue v{b.date, std::nullopt};
    if (b.total_queries > 0) {
      v.value = 100.0 * static_cast<double>(b.sensitive_queries) /
                static_cast<double>(b.total_queries);
    }
    out.push_back(v);
  }
  return out;
}

DistributionSnapshot distribution(std::span<const DailyBucket> buckets, const Scope& scope) {
  DistributionSnapshot s;
  s.scope = scope;
  for (const DailyBucket& b : buckets) {
    if (!scope.contains(b.date)) continue;
    s.sensitive_queries += b.sensitive_queries;
    for (std::size_t c = 0; c < kNumSensitive; ++c) s.counts[c] += b.per_category[c];
  }
  if (s.sensitive_queries == 0) {
    throw Error(ErrorCode::kEmptyScope, "no sensitive queries between " + format_date(scope.from) +
                                            " and " + format_date(scope.to));
  }
  for (std::size_t c = 0; c < kNumSensitive; ++c) {
    s.share_pct[c] =
        100.0 * static_cast<double>(s.counts[c]) / static_cast<double>(s.sensitive_queries);
  }
  return s;
}

EventWindowReport event_window(std::span<const DailyBucket> buckets, Date start, int days) {
  if (days < 1) throw Error(ErrorCode::kInvalidArgument, "window needs at least one day");
  if (buckets.empty() || start < buckets.front().date ||
      start + std::chrono::days{days - 1} > buckets.back().date) {
    throw Error(ErrorCode::kWindowOutOfRange, "window outside the logged date range");
  }
  EventWindowReport r;
  r.window = distribution(buckets, Scope::window(start, days));
  r.overall = distribution(buckets, Scope::overall());
  for (std::size_t c = 0; c < kNumSensitive; ++c) {
    r.delta_pp[c] = r.window.share_pct[c] - r.overall.share_pct[c];
  }
  return r;
}

std::optional<double> CorrelationMatrix::at(std::size_t i, std::size_t j) const {
  const double v = coefficients(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  if (std::isnan(v)) return std::nullopt;
  return v;
}

CorrelationMatrix category_correlation(std::span<const DailyBucket> buckets,
                                       CorrelationBasis basis) {
  if (buckets.size() < 2) throw Error(ErrorCode::kInsufficientData, "need at least two dates");
  Eigen::MatrixXd series(static_cast<Eigen::Index>(buckets.size()), kSensitive);
  for (std::size_t r = 0; r < buckets.size(); ++r) {
    const DailyBucket& b = buckets[r];
    for (int c = 0; c < kSensitive; ++c) {
      double v = static_cast<double>(b.per_category[c]);
      if (basis == CorrelationBasis::kShares) {
        v = b.sensitive_queries > 0 ? 100.0 * v / static_cast<double>(b.sensitive_queries) : 0.0;
      }
      series(static_cast<Eigen::Index>(r), c) = v;
    }
  }
  const Eigen::MatrixXd centered = series.rowwise() - series.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered;
  CorrelationMatrix m;
  for (int i = 0; i < kSensitive; ++i) {
    for (int j = i; j < kSensitive; ++j) {
      double v = std::numeric_limits<double>::quiet_NaN();
      if (cov(i, i) > 0 && cov(j, j) > 0) {
        v = i == j ? 1.0 : std::clamp(cov(i, j) / std::sqrt(cov(i, i) * cov(j, j)), -1.0, 1.0);
      }
      m.coefficients(i, j) = v;
      m.coefficients(j, i) = v;
    }
  }
  return m;
}

std::vector<std::string> SplitTokenizer::tokens(std::string_view text) const {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (std::size_t i = 0; i < text.size();) {
    std::size_t len = 1;
    const char32_t cp = decode_utf8(text, i, &len);
    const bool ascii_sep = cp < 0x80 && !(cp >= '0' && cp <= '9') && !(cp >= 'a' && cp <= 'z') &&
                           !(cp >= 'A' && cp <= 'Z') && cp != '_';
    const bool unicode_sep = (cp >= 0x2000 && cp <= 0x206F) || (cp >= 0x3000 && cp <= 0x303F) ||
                             (cp >= 0xFF01 && cp <= 0xFF0F);
    if (ascii_sep || unicode_sep) {
      flush();
    } else if (cp >= 'A' && cp <= 'Z') {
      current.push_back(static_cast<char>(cp + 32));
    } else {
      current.append(text.substr(i, len));
    }
    i += len;
  }
  flush();
  return out;
}

std::set<std::string, std::less<>> default_stoplist() {
  return {"방법", "사람", "생각", "추천", "말"};
}

namespace {

using TermCounts = std::map<std::string, std::int64_t, std::less<>>;

std::vector<std::pair<std::string, std::int64_t>> top_k(const TermCounts& counts, std::size_t k) {
  std::vector<std::pair<std::string, std::int64_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > k) ranked.resize(k);
  return ranked;
}

}  // namespace

KeywordReport extract_keywords(std::span<const Decision> decisions, Label category,
                               const std::set<std::string, std::less<>>& stoplist, std::size_t k,
                               const Tokenizer& tokenizer) {
  KeywordReport report;
  report.category = category;
  TermCounts all;
  std::map<Date, TermCounts> per_day;
  std::map<Date, std::pair<std::int64_t, std::int64_t>> share;  // (category, denominator)
  for (const Decision& d : decisions) {
    const Date day = date_of(d.received_at);
    const bool in_category = d.label == category;
    // Sensitive categories are shared out of sensitive queries; safe out of all queries.
    if (!is_sensitive(category) || is_sensitive(d.label)) {
      auto& s = share[day];
      if (in_category) ++s.first;
      ++s.second;
    }
    if (!in_category) continue;
    for (auto& term : tokenizer.tokens(d.text)) {
      if (stoplist.contains(term)) continue;
      ++per_day[day][term];
      ++all[term];
    }
  }
  report.ranked = top_k(all, k);
  if (per_day.empty()) return report;

  double best = -1.0;
  for (const auto& [day, s] : share) {
    if (s.first == 0) continue;
    const double v = static_cast<double>(s.first) / static_cast<double>(s.second);
    if (v > best) {
      best = v;
      report.max_day = day;
    }
  }
  std::set<std::string> earlier;
  for (const auto& [day, counts] : per_day) {
    if (day >= *report.max_day) break;
    for (auto& [term, n] : top_k(counts, k)) earlier.insert(term);
  }
  for (auto& [term, n] : top_k(per_day[*report.max_day], k)) {
    if (!earlier.contains(term)) report.new_on_max_day.insert(term);
  }
  return report;
}

KeywordReport extract_keywords(std::span<const Decision> decisions, std::string_view category_id,
                               const std::set<std::string, std::less<>>& stoplist, std::size_t k,
                               const Tokenizer& tokenizer) {
  return extract_keywords(decisions, parse_label(category_id), stoplist, k, tokenizer);
}

namespace {

nlohmann::json shares_json(const SensitiveShares& shares) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t c = 0; c < kNumSensitive; ++c) {
    j[std::string(category_id(static_cast<Label>(c)))] = shares[c];
  }
  return j;
}

std::string_view scope_name(Scope::Kind kind) {
  switch (kind) {
    case Scope::Kind::kDay: return "day";
    case Scope::Kind::kCumulative: return "cumulative";
    case Scope::Kind::kOverall: return "overall";
    case Scope::Kind::kEventWindow: return "event_window";
  }
  return "overall";
}

nlohmann::json optional_json(std::optional<double> v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::string csv_number(std::optional<double> v) {
  if (!v) return "";
  std::ostringstream ss;
  ss.precision(10);
  ss << *v;
  return ss.str();
}

std::string category_header() {
  std::string h;
  for (std::size_t c = 0; c < kNumSensitive; ++c) {
    h += ',';
    h += category_id(static_cast<Label>(c));
  }
  return h;
}

}  // namespace

nlohmann::json to_json(std::span<const DailyBucket> buckets) {
  nlohmann::json arr = nlohmann::json::array();
  for (const DailyBucket& b : buckets) {
    nlohmann::json counts = nlohmann::json::object();
    for (std::size_t c = 0; c < kNumSensitive; ++c) {
      counts[std::string(category_id(static_cast<Label>(c)))] = b.per_category[c];
    }
    arr.push_back({{"date", format_date(b.date)},
                   {"weekday", b.weekday()},
                   {"total_queries", b.total_queries},
                   {"sensitive_queries", b.sensitive_queries},
                   {"per_category", std::move(counts)}});
  }
  return arr;
}

nlohmann::json to_json(const DistributionSnapshot& s) {
  nlohmann::json j = {{"scope", scope_name(s.scope.kind)},
                      {"sensitive_queries", s.sensitive_queries},
                      {"share_pct", shares_json(s.share_pct)}};
  if (s.scope.kind != Scope::Kind::kOverall) {
    if (s.scope.kind != Scope::Kind::kCumulative) j["from"] = format_date(s.scope.from);
    j["to"] = format_date(s.scope.to);
  }
  return j;
}

nlohmann::json to_json(const EventWindowReport& r) {
  return {{"window", to_json(r.window)},
          {"overall", to_json(r.overall)},
          {"delta_pp", shares_json(r.delta_pp)}};
}

nlohmann::json to_json(const CorrelationMatrix& m) {
  nlohmann::json ids = nlohmann::json::array();
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < kNumSensitive; ++i) {
    ids.push_back(category_id(static_cast<Label>(i)));
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < kNumSensitive; ++j) row.push_back(optional_json(m.at(i, j)));
    rows.push_back(std::move(row));
  }
  return {{"categories", std::move(ids)}, {"pearson", std::move(rows)}};
}

nlohmann::json to_json(const KeywordReport& r) {
  nlohmann::json ranked = nlohmann::json::array();
  for (const auto& [term, n] : r.ranked) ranked.push_back({{"term", term}, {"count", n}});
  return {{"category", category_id(r.category)},
          {"ranked", std::move(ranked)},
          {"max_day", r.max_day ? nlohmann::json(format_date(*r.max_day)) : nlohmann::json()},
          {"new_on_max_day", r.new_on_max_day}};
}

nlohmann::json to_json(std::span<const DatedValue> series) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& v : series) {
    arr.push_back({{"date", format_date(v.date)}, {"value", optional_json(v.value)}});
  }
  return arr;
}

std::string buckets_csv(std::span<const DailyBucket> buckets) {
  std::string out = "date,weekday,total_queries,sensitive_queries" + category_header() + "\n";
  for (const DailyBucket& b : buckets) {
    out += format_date(b.date) + "," + std::to_string(b.weekday()) + "," +
           std::to_string(b.total_queries) + "," + std::to_string(b.sensitive_queries);
    for (const auto n : b.per_category) out += "," + std::to_string(n);
    out += "\n";
  }
  return out;
}

std::string snapshot_csv(std::span<const DistributionSnapshot> snapshots) {
  std::string out = "scope,from,to,sensitive_queries" + category_header() + "\n";
  for (const auto& s : snapshots) {
    const bool dated_from =
        s.scope.kind == Scope::Kind::kDay || s.scope.kind == Scope::Kind::kEventWindow;
    out += std::string(scope_name(s.scope.kind)) + "," +
           (dated_from ? format_date(s.scope.from) : "") + "," +
           (s.scope.kind != Scope::Kind::kOverall ? format_date(s.scope.to) : "") + "," +
           std::to_string(s.sensitive_queries);
    for (const double v : s.share_pct) out += "," + csv_number(v);
    out += "\n";
  }
  return out;
}

std::string correlation_csv(const CorrelationMatrix& m) {
  std::string out = "category" + category_header() + "\n";
  for (std::size_t i = 0; i < kNumSensitive; ++i) {
    out += category_id(static_cast<Label>(i));
    for (std::size_t j = 0; j < kNumSensitive; ++j) out += "," + csv_number(m.at(i, j));
    out += "\n";
  }
  return out;
}

std::string keywords_csv(const KeywordReport& r) {
  std::string out = "category,rank,term,count,new_on_max_day\n";
  std::size_t rank = 1;
  for (const auto& [term, n] : r.ranked) {
    out += std::string(category_id(r.category)) + "," + std::to_string(rank++) + "," + term + "," +
           std::to_string(n) + "," + (r.new_on_max_day.contains(term) ? "1" : "0") + "\n";
  }
  return out;
}

std::string series_csv(std::span<const DatedValue> series, std::string_view value_name) {
  std::string out = "date," + std::string(value_name) + "\n";
  for (const auto& v : series) out += format_date(v.date) + "," + csv_number(v.value) + "\n";
  return out;
}

}  // namespace sqg
