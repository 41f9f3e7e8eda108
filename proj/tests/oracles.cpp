#include "oracles.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <set>
#include <thread>
#include <vector>

#include "sqg/classifier.hpp"
#include "sqg/rules.hpp"

namespace sqg::testing {

namespace {

SparseFeatureVector random_features(Rng& rng, std::int64_t d, std::size_t nnz) {
  std::vector<double> dense(static_cast<std::size_t>(d), 0.0);
  for (std::size_t k = 0; k < nnz; ++k) dense[rng.below(static_cast<std::uint64_t>(d))] = rng.uniform(-1, 1);
  SparseFeatureVector v{d, {}};
  for (std::int64_t i = 0; i < d; ++i) {
    if (dense[static_cast<std::size_t>(i)] != 0.0) v.entries.emplace_back(i, dense[static_cast<std::size_t>(i)]);
  }
  return v;
}

// Plain-loop objective: mean cross-entropy plus 0.5 * l2 * |W|^2 (bias not decayed).
double reference_loss(const std::vector<std::vector<double>>& w, const std::vector<double>& b,
                      const std::vector<SparseFeatureVector>& xs, const std::vector<Label>& ys,
                      double l2) {
  double total = 0;
  for (std::size_t n = 0; n < xs.size(); ++n) {
    std::vector<double> z(b);
    for (std::size_t r = 0; r < kNumCategories; ++r) {
      for (const auto& [i, v] : xs[n].entries) z[r] += w[r][static_cast<std::size_t>(i)] * v;
    }
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0;
    for (double zi : z) s += std::exp(zi - m);
    total += -(z[static_cast<std::size_t>(ordinal(ys[n]))] - m - std::log(s));
  }
  double sq = 0;
  for (const auto& row : w) {
    for (double v : row) sq += v * v;
  }
  return total / static_cast<double>(xs.size()) + 0.5 * l2 * sq;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)});
}

Rule make_rule(std::string id, RuleKind kind, std::string pattern, std::optional<Label> category) {
  Rule r;
  r.id = std::move(id);
  r.kind = kind;
  r.pattern = std::move(pattern);
  r.category = category;
  return r;
}

}  // namespace

GradientCheck check_gradient_instance(Rng& rng) {
  constexpr std::size_t kRows = kNumCategories;
  GradientCheck out;
  const std::int64_t d = 4 + static_cast<std::int64_t>(rng.below(61));
  out.dimension = d;
  const std::size_t n = 1 + rng.below(6);
  const double l2 = rng.uniform(0.0, 0.1);
  std::vector<SparseFeatureVector> xs;
  std::vector<Label> ys;
  for (std::size_t i = 0; i < n; ++i) {
    xs.push_back(random_features(rng, d, 1 + rng.below(6)));
    ys.push_back(label_from_ordinal(static_cast<int>(rng.below(kNumCategories))));
  }
  LinearHead<double> head(d);
  std::vector<std::vector<double>> w(kRows, std::vector<double>(static_cast<std::size_t>(d)));
  std::vector<double> b(kRows);
  for (std::size_t r = 0; r < kRows; ++r) {
    const auto er = static_cast<Eigen::Index>(r);
    b[r] = head.bias(er) = rng.uniform(-1, 1);
    for (std::int64_t c = 0; c < d; ++c) {
      w[r][static_cast<std::size_t>(c)] = head.weights(er, c) = rng.uniform(-1, 1);
    }
  }
  std::vector<TrainingRow> rows;
  for (std::size_t i = 0; i < n; ++i) rows.push_back({&xs[i], ys[i]});
  const auto g = loss_and_gradient(head, std::span<const TrainingRow>(rows), l2);
  out.loss_rel_err = rel_err(g.loss, reference_loss(w, b, xs, ys, l2));

  const double h = 1e-5;
  auto central = [&](double& slot) {
    const double saved = slot;
    slot = saved + h;
    const double up = reference_loss(w, b, xs, ys, l2);
    slot = saved - h;
    const double down = reference_loss(w, b, xs, ys, l2);
    slot = saved;
    return (up - down) / (2 * h);
  };
  for (int probe = 0; probe < 30; ++probe) {
    const auto r = static_cast<std::size_t>(rng.below(kRows));
    // Half the probes hit columns that carry features.
    std::size_t c;
    if (probe % 2 == 0) {
      const auto& x = xs[rng.below(n)];
      c = x.entries.empty() ? 0 : static_cast<std::size_t>(x.entries[rng.below(x.entries.size())].first);
    } else {
      c = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(d)));
    }
    const double numeric = central(w[r][c]);
    const double analytic = g.weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    if (std::abs(numeric) > 1e-7 || std::abs(analytic) > 1e-7) {
      out.worst_rel_err = std::max(out.worst_rel_err, rel_err(analytic, numeric));
    }
  }
  for (std::size_t r = 0; r < kRows; ++r) {
    const double numeric = central(b[r]);
    out.worst_rel_err =
        std::max(out.worst_rel_err, rel_err(g.bias(static_cast<Eigen::Index>(r)), numeric));
  }
  return out;
}

int separable_toy_correct(std::uint64_t seed) {
  // Class determined by which half of the 64 columns carries mass.
  Rng rng(seed);
  const std::int64_t d = 64;
  std::vector<SparseFeatureVector> xs;
  std::vector<Label> ys;
  for (int i = 0; i < 20; ++i) {
    const bool sensitive = i % 2 == 0;
    SparseFeatureVector v{d, {}};
    const std::int64_t base = sensitive ? 0 : 32;
    std::set<std::int64_t> idx;
    while (idx.size() < 4) idx.insert(base + static_cast<std::int64_t>(rng.below(32)));
    for (auto k : idx) v.entries.emplace_back(k, 0.5);
    xs.push_back(v);
    ys.push_back(sensitive ? Label::kFelonyCrimes : Label::kSafe);
  }
  TrainOptions opts;
  opts.epochs = 1000;
  opts.batch_size = 4;
  opts.seed = seed;
  const auto result = train_features(xs, ys, d, opts, "toy");
  int correct = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    correct += argmax_lowest(score(result.weights, xs[i])) == ordinal(ys[i]) ? 1 : 0;
  }
  return correct;
}

PrecedenceTrial run_precedence_trial(Rng& rng) {
  static const std::vector<std::string> vocab = {"마약", "뜻", "주소", "영화", "자살", "날씨", "욕", "친구"};
  // Sentences of vocabulary words, so the split is known ahead of time.
  std::vector<std::vector<std::string>> sentences(1 + rng.below(3));
  PrecedenceTrial out;
  for (auto& s : sentences) {
    const auto n = 1 + rng.below(4);
    for (std::uint64_t k = 0; k < n; ++k) s.push_back(vocab[rng.below(vocab.size())]);
    for (std::size_t k = 0; k < s.size(); ++k) out.text += (k ? " " : "") + s[k];
    out.text += std::string(1, ".!?"[rng.below(3)]) + " ";
  }
  struct Spec {
    std::string word;
    bool anchored;
    bool black;
    Label category;
    bool enabled;
  };
  std::vector<Spec> specs;
  std::vector<Rule> rules;
  const auto n_rules = rng.below(6);
  for (std::uint64_t r = 0; r < n_rules; ++r) {
    Spec s{vocab[rng.below(vocab.size())], rng.below(4) == 0, rng.below(2) == 0,
           label_from_ordinal(static_cast<int>(rng.below(kNumSensitive))), rng.below(5) != 0};
    specs.push_back(s);
    const std::string pattern = (s.anchored ? "^" : "") + s.word;
    Rule rule = s.black ? make_rule("r" + std::to_string(r), RuleKind::kBlacklist, pattern, s.category)
                        : make_rule("r" + std::to_string(r), RuleKind::kWhitelist, pattern, std::nullopt);
    rule.enabled = s.enabled;
    rules.push_back(rule);
  }
  const Label predicted = label_from_ordinal(static_cast<int>(rng.below(kNumCategories)));

  std::size_t expected_matches = 0;
  std::set<int> black_hits;
  bool white_hit = false;
  for (const auto& spec : specs) {
    if (!spec.enabled) continue;
    for (const auto& s : sentences) {
      const bool hit = spec.anchored ? s.front() == spec.word
                                     : std::find(s.begin(), s.end(), spec.word) != s.end();
      if (!hit) continue;
      ++expected_matches;
      if (spec.black) {
        black_hits.insert(ordinal(spec.category));
      } else {
        white_hit = true;
      }
    }
  }
  Adjustment expected{predicted, DecisionSource::kModel};
  if (!black_hits.empty()) {
    expected = {label_from_ordinal(*black_hits.begin()), DecisionSource::kBlacklistOverride};
  } else if (white_hit && is_sensitive(predicted)) {
    expected = {Label::kSafe, DecisionSource::kWhitelistOverride};
  }

  const auto matches = match_rules(compile_rules(rules, 1), out.text);
  out.match_count_ok = matches.size() == expected_matches;
  out.adjustment_ok = apply_adjustment(predicted, matches) == expected;
  std::vector<Rule> kept;
  for (const auto& r : rules) {
    if (r.enabled) kept.push_back(r);
  }
  out.disabled_equals_deleted = match_rules(compile_rules(kept, 1), out.text) == matches;
  return out;
}

int rulebook_stress(int compiles) {
  RuleBook book;
  auto single = [](int v) {
    return std::vector<Rule>{make_rule("v" + std::to_string(v), RuleKind::kWhitelist, "x", std::nullopt)};
  };
  book.compile(single(1));
  std::atomic<bool> stop{false};
  std::atomic<int> incoherent{0};
  std::thread reader([&] {
    while (!stop) {
      const auto set = book.active();
      const auto ids = set->source_ids();
      if (ids.size() != 1 || ids[0] != "v" + std::to_string(set->version())) ++incoherent;
    }
  });
  for (int v = 2; v <= compiles; ++v) book.compile(single(v));
  stop = true;
  reader.join();
  if (book.version() != static_cast<std::uint64_t>(compiles)) ++incoherent;
  return incoherent.load();
}

ModelWeights constant_model(const Featurizer& featurizer, Label label, const std::string& version) {
  ModelWeights m;
  m.head = LinearHead<double>(featurizer.dimension());
  m.head.bias(ordinal(label)) = 5.0;
  m.model_version = version;
  m.featurizer_config_hash = featurizer.config_hash();
  return m;
}

ReloadStress reload_stress(int reloads) {
  FeaturizerConfig cfg;
  cfg.dimension = 256;
  auto f = std::make_shared<const HashedNgramFeaturizer>(cfg);
  MemoryDecisionLog log;
  Gateway gw(f, log);
  // Generation g pairs model "gen-g" with a rule set whose blacklist category
  // depends on g, so a mixed pair is visible from the decision alone.
  auto rules_for = [](std::uint64_t g) {
    return std::vector<Rule>{make_rule("r", RuleKind::kBlacklist, "표적",
                                       label_from_ordinal(static_cast<int>(g % kNumSensitive)))};
  };
  gw.reload(constant_model(*f, Label::kSafe, "gen-1"), rules_for(1));

  ReloadStress out;
  std::atomic<bool> stop{false};
  std::atomic<int> incoherent{0};
  std::atomic<std::size_t> decided{0};
  std::vector<std::thread> readers;
  for (int t = 0; t < 4; ++t) {
    readers.emplace_back([&, t] {
      int i = 0;
      while (!stop.load()) {
        const auto d =
            gw.decide({"t" + std::to_string(t) + "-" + std::to_string(i++), "표적 문장", {}, ""});
        const auto g = d.model_generation;
        const bool ok = d.model_version == "gen-" + std::to_string(g) && d.ruleset_version == g &&
                        d.label == label_from_ordinal(static_cast<int>(g % kNumSensitive));
        if (!ok) incoherent.fetch_add(1);
        decided.fetch_add(1);
      }
    });
  }
  for (std::uint64_t g = 2; g <= static_cast<std::uint64_t>(reloads) + 1; ++g) {
    gw.reload(constant_model(*f, Label::kSafe, "gen-" + std::to_string(g)), rules_for(g));
  }
  while (decided.load() < 1000) std::this_thread::yield();
  stop.store(true);
  for (auto& th : readers) th.join();

  out.incoherent = incoherent.load();
  out.decided = decided.load();
  const auto logged = log.decisions();
  out.logged = logged.size();
  std::uint64_t last = 0;
  for (const auto& d : logged) {
    if (d.model_generation < last) out.log_monotone = false;
    last = d.model_generation;
  }
  out.final_generation = gw.versions().model_generation;
  return out;
}

}  // namespace sqg::testing
