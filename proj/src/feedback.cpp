#include "sqg/feedback.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "sqg/error.hpp"
#include "sqg/random.hpp"

namespace sqg {

std::string_view verdict_name(Verdict v) {
  switch (v) {
    case Verdict::kMustSafe: return "MustSafe";
    case Verdict::kLookSafe: return "LookSafe";
    case Verdict::kHarm: return "Harm";
    case Verdict::kCannotDecide: return "CannotDecide";
  }
  return "CannotDecide";
}

Verdict parse_verdict(std::string_view name) {
  if (name == "MustSafe") return Verdict::kMustSafe;
  if (name == "LookSafe") return Verdict::kLookSafe;
  if (name == "Harm") return Verdict::kHarm;
  if (name == "CannotDecide") return Verdict::kCannotDecide;
  throw Error(ErrorCode::kInvalidArgument, "unknown verdict '" + std::string(name) + "'");
}

std::string_view sample_status_name(SampleStatus s) {
  switch (s) {
    case SampleStatus::kPending: return "pending";
    case SampleStatus::kLabeled: return "labeled";
    case SampleStatus::kSkipped: return "skipped";
  }
  return "pending";
}

namespace {

ReviewSample make_sample(const Decision& d, Date date, std::size_t index) {
  ReviewSample s;
  s.sample_id = format_date(date) + "#" + std::to_string(index);
  s.query_id = d.query_id;
  s.text = d.text;
  s.decision = d;
  s.sampled_for_date = date;
  return s;
}

// Moves a uniform sample of `n` items to the front of `pool`.
void partial_shuffle(std::vector<std::size_t>& pool, std::size_t n, Rng& rng) {
  for (std::size_t i = 0; i < n; ++i) {
    std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
  }
}

}  // namespace

std::vector<ReviewSample> sample_for_review(std::span<const Decision> decisions, Date date,
                                            std::size_t n, std::uint64_t seed, bool stratified) {
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    if (is_sensitive(decisions[i].label) && date_of(decisions[i].received_at) == date) {
      eligible.push_back(i);
    }
  }
  Rng rng(seed);
  std::vector<std::size_t> picked;
  if (eligible.size() <= n) {
    picked = eligible;
  } else if (!stratified) {
    partial_shuffle(eligible, n, rng);
    picked.assign(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(n));
  } else {
    std::array<std::vector<std::size_t>, kNumSensitive> strata;
    for (const std::size_t i : eligible) {
      strata[static_cast<std::size_t>(decisions[i].label)].push_back(i);
    }
    // Largest-remainder allocation of n across categories.
    std::array<std::size_t, kNumSensitive> quota{};
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < kNumSensitive; ++c) {
      const double exact = static_cast<double>(n) * static_cast<double>(strata[c].size()) /
                           static_cast<double>(eligible.size());
      quota[c] = static_cast<std::size_t>(exact);
      assigned += quota[c];
      remainders.emplace_back(exact - static_cast<double>(quota[c]), c);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < n && k < remainders.size(); ++k) {
      ++quota[remainders[k].second];
      ++assigned;
    }
    for (std::size_t c = 0; c < kNumSensitive; ++c) {
      partial_shuffle(strata[c], quota[c], rng);
      picked.insert(picked.end(), strata[c].begin(),
                    strata[c].begin() + static_cast<std::ptrdiff_t>(quota[c]));
    }
  }
  std::vector<ReviewSample> out;
  out.reserve(picked.size());
  for (std::size_t k = 0; k < picked.size(); ++k) {
    out.push_back(make_sample(decisions[picked[k]], date, k));
  }
  return out;
}

VerdictCounts tally(std::span<const ReviewRecord> records) {
  VerdictCounts c;
  for (const auto& r : records) {
    switch (r.verdict) {
      case Verdict::kMustSafe: ++c.must_safe; break;
      case Verdict::kLookSafe: ++c.look_safe; break;
      case Verdict::kHarm: ++c.harm; break;
      case Verdict::kCannotDecide: ++c.cannot_decide; break;
    }
  }
  return c;
}

std::optional<double> try_harm_precision(const VerdictCounts& c) {
  const std::int64_t decided = c.must_safe + c.look_safe + c.harm;
  if (decided == 0) return std::nullopt;
  return 100.0 * static_cast<double>(c.harm) / static_cast<double>(decided);
}

double harm_precision(const VerdictCounts& counts) {
  if (auto p = try_harm_precision(counts)) return *p;
  throw Error(ErrorCode::kUndefined, "no MustSafe/LookSafe/Harm verdicts");
}

double harm_precision(std::span<const ReviewRecord> records) {
  return harm_precision(tally(records));
}

std::vector<PeriodPrecision> precision_timeline(const GroupedRecords& grouped) {
  std::vector<PeriodPrecision> out;
  out.reserve(grouped.size());
  for (const auto& [period, records] : grouped) {
    const VerdictCounts counts = tally(records);
    out.push_back({period, counts, try_harm_precision(counts)});
  }
  return out;
}

PeriodGrouping parse_grouping(std::string_view name) {
  if (name == "day") return PeriodGrouping::kDay;
  if (name == "week") return PeriodGrouping::kWeek;
  throw Error(ErrorCode::kInvalidArgument, "group must be 'day' or 'week'");
}

GroupedRecords group_records(std::span<const ReviewRecord> records, PeriodGrouping grouping) {
  std::map<std::string, std::vector<ReviewRecord>> groups;
  for (const auto& r : records) {
    const std::string key = grouping == PeriodGrouping::kDay ? format_date(r.sampled_for_date)
                                                             : week_key(r.sampled_for_date);
    groups[key].push_back(r);
  }
  return {groups.begin(), groups.end()};
}

CorrectionProposals promote_corrections(std::span<const ReviewRecord> records,
                                        std::span<const Decision> decisions) {
  std::map<std::string, const Decision*, std::less<>> by_id;
  for (const Decision& d : decisions) by_id[d.query_id] = &d;
  CorrectionProposals out;
  std::set<std::pair<std::string, Verdict>> done;
  std::set<std::string> proposed_patterns;
  for (const ReviewRecord& r : records) {
    const auto it = by_id.find(r.query_id);
    if (it == by_id.end()) throw Error(ErrorCode::kUnknownQueryId, r.query_id);
    const Decision& d = *it->second;
    if (r.verdict != Verdict::kMustSafe && r.verdict != Verdict::kHarm) continue;
    if (!done.emplace(r.query_id, r.verdict).second) continue;
    if (r.verdict == Verdict::kMustSafe) {
      out.examples.push_back({d.text, Label::kSafe, ExampleOrigin::kInternalAnnotation});
      // One draft per distinct text; repeats of the same query text add nothing.
      if (!proposed_patterns.insert(regex_escape(d.text)).second) continue;
      Rule rule;
      rule.id = "proposal-wl-" + d.query_id;
      rule.kind = RuleKind::kWhitelist;
      rule.pattern = regex_escape(d.text);
      rule.exemplars = {d.text};
      rule.enabled = false;
      rule.author = "review:" + r.reviewer;
      rule.created_at = r.labeled_at;
      out.rules.push_back(std::move(rule));
    } else if (is_sensitive(d.label)) {
      out.examples.push_back({d.text, d.label, ExampleOrigin::kInternalAnnotation});
    }
  }
  return out;
}

nlohmann::json to_json(const ReviewSample& s) {
  std::vector<double> scores(s.decision.scores.data(),
                             s.decision.scores.data() + s.decision.scores.size());
  return {{"sample_id", s.sample_id},
          {"query_id", s.query_id},
          {"text", s.text},
          {"sampled_for_date", format_date(s.sampled_for_date)},
          {"status", sample_status_name(s.status)},
          {"decision",
           {{"label", category_id(s.decision.label)},
            {"source", source_name(s.decision.source)},
            {"scores", scores},
            {"model_version", s.decision.model_version},
            {"ruleset_version", s.decision.ruleset_version}}}};
}

nlohmann::json to_json(const ReviewRecord& r) {
  return {{"sample_id", r.sample_id},
          {"query_id", r.query_id},
          {"verdict", verdict_name(r.verdict)},
          {"reviewer", r.reviewer},
          {"labeled_at", format_timestamp(r.labeled_at)},
          {"sampled_for_date", format_date(r.sampled_for_date)}};
}

namespace {

// RFC 4180 quoting for fields holding a comma, quote or line break.
std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

std::string verdicts_csv(std::span<const ReviewRecord> records) {
  std::string out = "sample_id,query_id,sampled_for_date,verdict,reviewer,labeled_at\n";
  for (const auto& r : records) {
    out += csv_field(r.sample_id) + "," + csv_field(r.query_id) + "," +
           format_date(r.sampled_for_date) + "," + std::string(verdict_name(r.verdict)) + "," +
           csv_field(r.reviewer) + "," + format_timestamp(r.labeled_at) + "\n";
  }
  return out;
}

std::vector<ReviewRecord> parse_verdicts_csv(std::string_view csv) {
  std::vector<ReviewRecord> out;
  std::size_t line_no = 1;  // physical line where the current record starts
  std::size_t pos = 0;
  bool header = true;
  while (pos < csv.size()) {
    const std::size_t record_line = line_no;
    std::vector<std::string> f(1);
    bool quoted = false;
    bool malformed = false;
    for (; pos < csv.size(); ++pos) {
      const char c = csv[pos];
      if (quoted) {
        if (c == '"' && pos + 1 < csv.size() && csv[pos + 1] == '"') {
          f.back() += '"';
          ++pos;
        } else if (c == '"') {
          quoted = false;
        } else {
          if (c == '\n') ++line_no;
          f.back() += c;
        }
      } else if (c == '"') {
        if (!f.back().empty()) malformed = true;
        quoted = true;
      } else if (c == ',') {
        f.emplace_back();
      } else if (c == '\n') {
        ++line_no;
        ++pos;
        break;
      } else if (c != '\r') {
        f.back() += c;
      }
    }
    if (quoted) malformed = true;
    if (header) {
      header = false;
      continue;
    }
    if (f.size() == 1 && f[0].empty() && !malformed) continue;
    try {
      if (malformed) throw Error(ErrorCode::kCorruptRecord, "bad quoting");
      if (f.size() != 6) throw Error(ErrorCode::kCorruptRecord, "expected 6 fields");
      out.push_back({f[0], f[1], parse_verdict(f[3]), f[4], parse_timestamp(f[5]), parse_date(f[2])});
    } catch (const Error& e) {
      throw Error(ErrorCode::kCorruptRecord, "line " + std::to_string(record_line) + ": " + e.what());
    }
  }
  return out;
}

void ReviewStore::add_samples(std::span<const ReviewSample> samples) {
  std::lock_guard lock(mu_);
  for (const auto& s : samples) {
    if (by_id_.contains(s.sample_id)) continue;
    by_id_[s.sample_id] = samples_.size();
    samples_.push_back(s);
  }
}

bool ReviewStore::has_samples_for(Date date) const {
  std::lock_guard lock(mu_);
  return std::any_of(samples_.begin(), samples_.end(),
                     [&](const ReviewSample& s) { return s.sampled_for_date == date; });
}

std::vector<ReviewSample> ReviewStore::samples_for(Date date) const {
  std::lock_guard lock(mu_);
  std::vector<ReviewSample> out;
  for (const auto& s : samples_) {
    if (s.sampled_for_date == date) out.push_back(s);
  }
  return out;
}

std::vector<ReviewSample> ReviewStore::samples() const {
  std::lock_guard lock(mu_);
  return samples_;
}

ReviewRecord ReviewStore::record_verdict(const std::string& sample_id, Verdict verdict,
                                         const std::string& reviewer, Timestamp labeled_at) {
  std::lock_guard lock(mu_);
  const auto it = by_id_.find(sample_id);
  if (it == by_id_.end()) throw Error(ErrorCode::kUnknownSample, sample_id);
  for (const auto& r : records_) {
    if (r.sample_id == sample_id && r.reviewer == reviewer) {
      throw Error(ErrorCode::kAlreadyLabeled, reviewer);
    }
  }
  ReviewSample& sample = samples_[it->second];
  ReviewRecord record{sample_id, sample.query_id, verdict, reviewer, labeled_at,
                      sample.sampled_for_date};
  records_.push_back(record);
  sample.status = SampleStatus::kLabeled;
  return record;
}

void ReviewStore::mark_skipped(const std::string& sample_id) {
  std::lock_guard lock(mu_);
  const auto it = by_id_.find(sample_id);
  if (it == by_id_.end()) throw Error(ErrorCode::kUnknownSample, sample_id);
  if (samples_[it->second].status == SampleStatus::kPending) {
    samples_[it->second].status = SampleStatus::kSkipped;
  }
}

std::vector<ReviewRecord> ReviewStore::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

}  // namespace sqg
