// Operator command line for the sensitive-query gateway.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sqg/analytics.hpp"
#include "sqg/classifier.hpp"
#include "sqg/config.hpp"
#include "sqg/error.hpp"
#include "sqg/feedback.hpp"
#include "sqg/gateway.hpp"
#include "sqg/rules.hpp"
#include "sqg/service.hpp"
#include "sqg/simulator.hpp"
#include "sqg/taxonomy.hpp"

// After Eigen: httplib pulls in system headers that clash with it when first.
#include <httplib.h>

namespace {

using namespace sqg;
using nlohmann::json;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kStorageFailure, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit(const std::string& out_path, const std::string& body) {
  if (out_path.empty() || out_path == "-") {
    std::cout << body;
    if (!body.empty() && body.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream f(out_path, std::ios::binary | std::ios::trunc);
  f << body;
  if (!f) throw Error(ErrorCode::kStorageFailure, "cannot write " + out_path);
}

std::string pct(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *v);
  return buf;
}

std::optional<double> as_pct(const std::optional<double>& fraction) {
  if (!fraction) return std::nullopt;
  return 100.0 * *fraction;
}

std::string report_text(const EvalReport& r) {
  std::string out;
  out += "items            " + std::to_string(r.total) + "\n";
  out += "overall accuracy % " + pct(100.0 * r.overall_accuracy) + "\n";
  out += "safe recall %    " + pct(as_pct(r.safe_recall)) + "\n";
  out += "category acc. %  " + pct(as_pct(r.category_accuracy)) + "\n";
  out += "truth\\pred";
  for (std::size_t c = 0; c < kNumCategories; ++c) out += "," + std::to_string(c);
  out += "\n";
  for (std::size_t t = 0; t < kNumCategories; ++t) {
    out += std::string(category_id(label_from_ordinal(t)));
    for (std::size_t p = 0; p < kNumCategories; ++p) {
      out += "," + std::to_string(r.confusion(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(p)));
    }
    out += "  recall=" + pct(as_pct(r.per_category_accuracy[t])) + "\n";
  }
  return out;
}

// "felony_crimes=3,privacy=2@10+3" -> multipliers, start day 10, duration 3.
EventSpec parse_event(const std::string& spec) {
  EventSpec ev;
  const auto at = spec.find('@');
  if (at == std::string::npos) {
    throw Error(ErrorCode::kInvalidArgument, "event must look like cat=factor[,..]@day[+days]");
  }
  std::stringstream factors(spec.substr(0, at));
  std::string item;
  while (std::getline(factors, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::kInvalidArgument, "bad factor '" + item + "'");
    ev.multipliers[parse_label(item.substr(0, eq))] = std::stod(item.substr(eq + 1));
  }
  const std::string window = spec.substr(at + 1);
  const auto plus = window.find('+');
  ev.start_day = std::stoi(window.substr(0, plus));
  if (plus != std::string::npos) ev.duration = std::stoi(window.substr(plus + 1));
  ev.label = spec;
  return ev;
}

std::vector<Decision> load_log(const std::string& path) { return read_decision_log(path); }

std::vector<DailyBucket> load_buckets(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kStorageFailure, "cannot open " + path);
  return bucketize_log(in);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sqgctl: sensitive-query gateway toolkit"};
  app.require_subcommand(1);

  // catalog
  auto* catalog = app.add_subcommand("catalog", "Print the category catalog as JSON");

  // simulate
  std::string sim_config, sim_out = "stream.jsonl", sim_sidecar = "planted.jsonl", sim_dataset;
  int sim_days = 0;
  std::int64_t sim_peak = 0;
  std::uint64_t sim_seed = 1;
  std::vector<std::string> sim_events;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic query stream");
  simulate->add_option("--config", sim_config, "Stream config JSON");
  simulate->add_option("--days", sim_days, "Override day count");
  simulate->add_option("--peak", sim_peak, "Override peak daily volume");
  simulate->add_option("--seed", sim_seed, "Seed")->capture_default_str();
  simulate->add_option("--event", sim_events, "cat=factor[,cat=factor]@day[+days]");
  simulate->add_option("--out", sim_out, "Stream file")->capture_default_str();
  simulate->add_option("--sidecar", sim_sidecar, "Planted-label file")->capture_default_str();
  simulate->add_option("--dataset", sim_dataset, "Also write a labeled dataset");

  // replay
  std::string rp_stream, rp_url, rp_model, rp_rules, rp_log = "decisions.jsonl";
  auto* replay = app.add_subcommand("replay", "Send a stream through a gateway");
  replay->add_option("--stream", rp_stream, "Stream file")->required();
  replay->add_option("--url", rp_url, "Running gateway base URL (http://host:port)");
  replay->add_option("--model", rp_model, "Model file for an in-process gateway");
  replay->add_option("--rules", rp_rules, "Rule file for an in-process gateway");
  replay->add_option("--log", rp_log, "Decision log for an in-process gateway")->capture_default_str();

  // confusion
  std::string cf_sidecar, cf_log;
  auto* confusion = app.add_subcommand("confusion", "Planted vs decided labels");
  confusion->add_option("--sidecar", cf_sidecar, "Planted-label file")->required();
  confusion->add_option("--log", cf_log, "Decision log")->required();

  // train
  std::string tr_data, tr_out = "model.bin", tr_rules;
  TrainOptions tr_opts;
  auto* train_cmd = app.add_subcommand("train", "Train the linear head");
  train_cmd->add_option("--data", tr_data, "Dataset JSONL")->required();
  train_cmd->add_option("--rules", tr_rules, "Add rule exemplars as examples");
  train_cmd->add_option("--out", tr_out, "Model file")->capture_default_str();
  train_cmd->add_option("--lr", tr_opts.learning_rate)->capture_default_str();
  train_cmd->add_option("--l2", tr_opts.l2)->capture_default_str();
  train_cmd->add_option("--batch", tr_opts.batch_size)->capture_default_str();
  train_cmd->add_option("--epochs", tr_opts.epochs)->capture_default_str();
  train_cmd->add_option("--seed", tr_opts.seed)->capture_default_str();
  train_cmd->add_option("--model-version", tr_opts.model_version)->capture_default_str();

  // evaluate
  std::string ev_model, ev_data;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score a model on a labeled test set");
  evaluate_cmd->add_option("--model", ev_model)->required();
  evaluate_cmd->add_option("--data", ev_data)->required();

  // resample
  std::string rs_data, rs_out;
  std::size_t rs_size = 1000;
  std::uint64_t rs_seed = 1;
  double rs_safe_pct = 0.0;
  auto* resample = app.add_subcommand("resample", "Resample a corpus to the reference distribution");
  resample->add_option("--data", rs_data)->required();
  resample->add_option("--out", rs_out)->required();
  resample->add_option("--size", rs_size)->capture_default_str();
  resample->add_option("--seed", rs_seed)->capture_default_str();
  resample->add_option("--safe-pct", rs_safe_pct, "Share of safe items; sensitive shares scale down")
      ->capture_default_str();

  // serve
  std::string sv_config;
  auto* serve = app.add_subcommand("serve", "Run the HTTP gateway");
  serve->add_option("--config", sv_config, "Service config JSON (env overrides apply)");

  // analytics
  std::string an_view, an_log, an_format = "csv", an_out, an_date, an_category, an_basis = "counts";
  int an_days = kDefaultEventWindowDays;
  std::size_t an_k = 10;
  auto* analytics = app.add_subcommand("analytics", "Log analytics");
  analytics->add_option("view", an_view,
                        "daily|volume|sensitive|overall|cumulative|days|events|correlation|keywords")
      ->required();
  analytics->add_option("--log", an_log, "Decision log")->required();
  analytics->add_option("--format", an_format, "csv|json|svg")->capture_default_str();
  analytics->add_option("--out", an_out, "Output file (default stdout)");
  analytics->add_option("--date", an_date, "Date for cumulative/events (YYYY-MM-DD)");
  analytics->add_option("--days", an_days, "Event window length")->capture_default_str();
  analytics->add_option("--category", an_category, "Category id for keywords");
  analytics->add_option("--k", an_k)->capture_default_str();
  analytics->add_option("--basis", an_basis, "counts|shares")->capture_default_str();

  // review
  auto* review = app.add_subcommand("review", "Human review sampling and precision");
  review->require_subcommand(1);
  std::string rv_log, rv_date, rv_out, rv_verdicts, rv_group = "day";
  std::size_t rv_n = kDefaultDailySample;
  std::uint64_t rv_seed = 1;
  bool rv_stratified = false;
  auto* rv_sample = review->add_subcommand("sample", "Draw the daily review sample");
  rv_sample->add_option("--log", rv_log)->required();
  rv_sample->add_option("--date", rv_date)->required();
  rv_sample->add_option("--n", rv_n)->capture_default_str();
  rv_sample->add_option("--seed", rv_seed)->capture_default_str();
  rv_sample->add_flag("--stratified", rv_stratified);
  rv_sample->add_option("--out", rv_out);
  auto* rv_precision = review->add_subcommand("precision", "Harm precision from a verdict export");
  rv_precision->add_option("--verdicts", rv_verdicts, "Verdict CSV")->required();
  rv_precision->add_option("--group", rv_group, "day|week")->capture_default_str();
  std::string rx_url, rx_token, rx_out;
  auto* rv_export = review->add_subcommand("export", "Fetch verdicts from a running gateway as CSV");
  rv_export->add_option("--url", rx_url)->required();
  rv_export->add_option("--out", rx_out);

  // rules
  auto* rules_cmd = app.add_subcommand("rules", "Rule file utilities");
  rules_cmd->require_subcommand(1);
  std::string ru_file, ru_out;
  auto* ru_check = rules_cmd->add_subcommand("check", "Compile a rule file");
  ru_check->add_option("--rules", ru_file)->required();
  auto* ru_export = rules_cmd->add_subcommand("export-training", "Rule exemplars as a dataset");
  ru_export->add_option("--rules", ru_file)->required();
  ru_export->add_option("--out", ru_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*catalog) {
      std::cout << export_taxonomy().dump(2) << '\n';
    } else if (*simulate) {
      StreamConfig cfg;
      if (!sim_config.empty()) cfg = stream_config_from_json(json::parse(slurp(sim_config)));
      if (sim_days > 0) cfg.days = sim_days;
      if (sim_peak > 0) cfg.peak_volume = sim_peak;
      if (simulate->count("--seed") > 0 || sim_config.empty()) cfg.seed = sim_seed;
      for (const auto& e : sim_events) cfg = inject_event(cfg, parse_event(e));
      const auto stream = generate_stream(cfg);
      write_stream(sim_out, sim_sidecar, stream);
      if (!sim_dataset.empty()) {
        std::vector<LabeledExample> examples;
        examples.reserve(stream.size());
        for (const auto& q : stream) {
          examples.push_back({q.record.text, q.planted, ExampleOrigin::kInternalAnnotation});
        }
        write_dataset(sim_dataset, examples);
      }
      std::cerr << "wrote " << stream.size() << " queries to " << sim_out << '\n';
    } else if (*replay) {
      const auto stream = read_stream(rp_stream, "");
      std::size_t blocked = 0;
      if (!rp_url.empty()) {
        httplib::Client client(rp_url);
        client.set_read_timeout(30, 0);
        for (const auto& q : stream) {
          const json body = {{"query_id", q.record.query_id},
                             {"text", q.record.text},
                             {"received_at", format_timestamp(q.record.received_at)},
                             {"user_pseudonym", q.record.user_pseudonym}};
          auto res = client.Post("/v1/decide", body.dump(), "application/json");
          if (!res) throw Error(ErrorCode::kStorageFailure, "gateway unreachable at " + rp_url);
          if (res->status != 200) {
            throw Error(ErrorCode::kInvalidArgument, "decide failed: " + res->body);
          }
          if (json::parse(res->body).value("blocked", false)) ++blocked;
        }
      } else {
        if (rp_model.empty()) throw Error(ErrorCode::kInvalidArgument, "--url or --model required");
        auto featurizer = std::make_shared<HashedNgramFeaturizer>();
        FileDecisionLog log(rp_log);
        Gateway gateway(featurizer, log);
        std::optional<std::vector<Rule>> rules;
        if (!rp_rules.empty()) rules = read_rule_file(rp_rules);
        gateway.reload(load_model(rp_model), rules);
        for (const auto& q : stream) blocked += gateway.decide(q.record).blocked ? 1 : 0;
      }
      std::cerr << "replayed " << stream.size() << " queries, " << blocked << " blocked\n";
    } else if (*confusion) {
      std::map<std::string, Label> decided;
      for (const auto& d : load_log(cf_log)) decided[d.query_id] = d.label;
      ConfusionMatrix m = ConfusionMatrix::Zero();
      std::ifstream in(cf_sidecar);
      if (!in) throw Error(ErrorCode::kStorageFailure, "cannot open " + cf_sidecar);
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = json::parse(line);
        const auto it = decided.find(j.at("query_id").get<std::string>());
        if (it == decided.end()) continue;
        m(static_cast<Eigen::Index>(parse_label(j.at("planted").get<std::string>())),
          static_cast<Eigen::Index>(it->second)) += 1;
      }
      std::cout << report_text(report_from_confusion(m));
    } else if (*train_cmd) {
      auto examples = read_dataset(tr_data);
      if (!tr_rules.empty()) {
        const auto extra = export_training_from_rules(read_rule_file(tr_rules));
        examples.insert(examples.end(), extra.examples.begin(), extra.examples.end());
      }
      HashedNgramFeaturizer featurizer;
      const TrainResult r = train(examples, featurizer, tr_opts);
      save_model(tr_out, r.weights);
      std::cerr << "trained on " << examples.size() << " examples, final loss "
                << (r.epoch_loss.empty() ? 0.0 : r.epoch_loss.back()) << '\n';
    } else if (*evaluate_cmd) {
      HashedNgramFeaturizer featurizer;
      std::cout << report_text(evaluate(load_model(ev_model), featurizer, read_dataset(ev_data)));
    } else if (*resample) {
      const auto corpus = read_dataset(rs_data);
      CategoryShares target = reference_distribution().avg;
      for (std::size_t c = 0; c < kNumSensitive; ++c) target[c] *= (100.0 - rs_safe_pct) / 100.0;
      target[static_cast<std::size_t>(Label::kSafe)] = rs_safe_pct;
      const auto out = resample_to_distribution(corpus, target,
                                                static_cast<std::int64_t>(rs_size), rs_seed);
      write_dataset(rs_out, out);
      std::cerr << "wrote " << out.size() << " examples\n";
    } else if (*serve) {
      Service service(load_service_config(sv_config));
      std::cerr << "listening on " << service.config().listen << '\n';
      service.run();
    } else if (*analytics) {
      const auto buckets = load_buckets(an_log);
      const bool json_out = an_format == "json";
      const bool svg_out = an_format == "svg";
      std::string body;
      const auto snapshot_out = [&](const DistributionSnapshot& s, std::string_view title) {
        if (json_out) return to_json(s).dump(2);
        if (svg_out) return distribution_chart_svg(std::span(&s, 1), title);
        return snapshot_csv(std::span(&s, 1));
      };
      if (an_view == "daily") {
        body = json_out ? to_json(std::span<const DailyBucket>(buckets)).dump(2)
               : svg_out ? volume_chart_svg(buckets)
                         : buckets_csv(buckets);
      } else if (an_view == "volume" || an_view == "sensitive") {
        const auto series = an_view == "volume" ? daily_volume_ratio(buckets) : sensitive_ratio(buckets);
        body = json_out ? to_json(std::span<const DatedValue>(series)).dump(2)
               : svg_out ? volume_chart_svg(buckets)
                         : series_csv(series, an_view == "volume" ? "ratio" : "sensitive_pct");
      } else if (an_view == "overall") {
        body = snapshot_out(distribution(buckets, Scope::overall()), "overall");
      } else if (an_view == "cumulative") {
        const Date upto = an_date.empty() ? buckets.back().date : parse_date(an_date);
        body = snapshot_out(distribution(buckets, Scope::cumulative(upto)), "cumulative");
      } else if (an_view == "days") {
        std::vector<DistributionSnapshot> snaps;
        for (const auto& b : buckets) {
          if (b.sensitive_queries > 0) snaps.push_back(distribution(buckets, Scope::day(b.date)));
        }
        body = json_out ? [&] {
          json a = json::array();
          for (const auto& s : snaps) a.push_back(to_json(s));
          return a.dump(2);
        }()
               : svg_out ? distribution_chart_svg(snaps, "daily distribution")
                         : snapshot_csv(snaps);
      } else if (an_view == "events") {
        if (an_date.empty()) throw Error(ErrorCode::kInvalidArgument, "--date required");
        const auto report = event_window(buckets, parse_date(an_date), an_days);
        if (json_out) {
          body = to_json(report).dump(2);
        } else {
          const std::vector<DistributionSnapshot> pair{report.window, report.overall};
          body = svg_out ? distribution_chart_svg(pair, "event window vs overall") : snapshot_csv(pair);
        }
      } else if (an_view == "correlation") {
        const auto m = category_correlation(
            buckets, an_basis == "shares" ? CorrelationBasis::kShares : CorrelationBasis::kCounts);
        body = json_out ? to_json(m).dump(2) : svg_out ? correlation_heatmap_svg(m) : correlation_csv(m);
      } else if (an_view == "keywords") {
        if (an_category.empty()) throw Error(ErrorCode::kInvalidArgument, "--category required");
        const auto report = extract_keywords(load_log(an_log), an_category, default_stoplist(), an_k);
        body = json_out ? to_json(report).dump(2) : keywords_csv(report);
      } else {
        throw Error(ErrorCode::kInvalidArgument, "unknown view '" + an_view + "'");
      }
      emit(an_out, body);
    } else if (*rv_sample) {
      const auto samples =
          sample_for_review(load_log(rv_log), parse_date(rv_date), rv_n, rv_seed, rv_stratified);
      std::string body;
      for (const auto& s : samples) body += to_json(s).dump() + "\n";
      emit(rv_out, body);
    } else if (*rv_precision) {
      const auto records = parse_verdicts_csv(slurp(rv_verdicts));
      std::cout << "period,must_safe,look_safe,harm,cannot_decide,precision\n";
      for (const auto& p : precision_timeline(group_records(records, parse_grouping(rv_group)))) {
        std::cout << p.period << ',' << p.counts.must_safe << ',' << p.counts.look_safe << ','
                  << p.counts.harm << ',' << p.counts.cannot_decide << ',' << pct(p.precision)
                  << '\n';
      }
      std::cout << "overall," << pct(try_harm_precision(tally(records))) << '\n';
    } else if (*rv_export) {
      httplib::Client client(rx_url);
      auto res = client.Get("/v1/review/verdicts?format=csv");
      if (!res || res->status != 200) throw Error(ErrorCode::kStorageFailure, "cannot fetch verdicts");
      emit(rx_out, res->body);
    } else if (*ru_check) {
      const auto rules = read_rule_file(ru_file);
      const auto compiled = compile_rules(rules, 1);
      std::cout << "ok: " << compiled.source_ids().size() << " active of " << rules.size()
                << " rules\n";
    } else if (*ru_export) {
      const auto exported = export_training_from_rules(read_rule_file(ru_file));
      write_dataset(ru_out, exported.examples);
      for (const auto& id : exported.skipped_rule_ids) {
        std::cerr << "skipped " << id << " (no exemplars)\n";
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
