// fsbench command line: ingest, split, run, report, audit.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "fsbench/harness.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace fsbench;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kRuntime = 2;
constexpr int kAuditFailed = 3;

json label_counts_json(std::span<const LabeledArticle> items) {
  const auto c = count_labels(items);
  return {{"total", c.total()}, {"up", c.up}, {"down", c.down}, {"flat", c.flat}, {"unlabeled", c.unlabeled},
          {"evaluable", c.evaluable()}};
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << text;
}

ExperimentConfig config_with_out(const std::string& config_path, const std::string& out) {
  auto config = load_config(config_path);
  if (!out.empty()) config.output_dir = fs::absolute(out).lexically_normal();
  return config;
}

int cmd_ingest(const std::string& config_path, const std::string& out) {
  const auto config = load_config(config_path);
  NewsLoadOptions opts;
  opts.columns = config.column_map;
  const auto news =
      load_news(config.news_path, config.news_format.value_or(news_format_for(config.news_path)), opts);
  const auto prices = load_prices(config.prices_path);
  const auto labeled = attach_labels(news.articles, prices, config.labels);

  json summary{{"articles", news.articles.size()},
               {"rejections", news.rejections.size()},
               {"price_bars", prices.size()},
               {"labels", label_counts_json(labeled)}};
  if (!out.empty()) {
    std::string articles;
    for (const auto& l : labeled) {
      json a = l.article;
      a["direction"] = l.direction ? json(to_string(*l.direction)) : json(nullptr);
      articles += a.dump() + "\n";
    }
    write_text(fs::path(out) / "articles.jsonl", articles);
    write_text(fs::path(out) / "rejections.jsonl", to_jsonl(news.rejections));
    write_text(fs::path(out) / "ingest.json", summary.dump(2) + "\n");
  }
  std::cout << summary.dump(2) << "\n";
  return kOk;
}

int cmd_split(const std::string& config_path, const std::string& out) {
  const auto config = load_config(config_path);
  const auto in = load_inputs(config);
  const auto& dev = in.split.dev;
  const auto& test = in.split.test;
  auto latest_dev = dev.empty() ? std::string() : format_timestamp(std::max_element(dev.begin(), dev.end(), [](auto& a, auto& b) {
    return a.article.timestamp < b.article.timestamp;
  })->article.timestamp);
  auto earliest_test = test.empty() ? std::string() : format_timestamp(std::min_element(test.begin(), test.end(), [](auto& a, auto& b) {
    return a.article.timestamp < b.article.timestamp;
  })->article.timestamp);
  json summary{{"cutoff", format_timestamp(in.split.cutoff)},
               {"dev", label_counts_json(dev)},
               {"test", label_counts_json(test)},
               {"latest_dev", latest_dev},
               {"earliest_test", earliest_test}};
  if (!out.empty()) write_text(fs::path(out) / "split.json", summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";
  return kOk;
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& strategies, bool offline,
            const std::string& out) {
  const auto config = config_with_out(config_path, out);
  RunOptions options;
  options.offline = offline;
  for (const auto& s : strategies) {
    const auto parsed = parse_strategy(s);
    if (!parsed) throw Error(Errc::config, "unknown strategy '" + s + "'");
    options.only.push_back(*parsed);
  }
  const auto manifest = run(config, options);
  std::cout << report(std::span<const RunManifest>(&manifest, 1)).text;
  std::cerr << "provider calls: " << manifest.provider_calls << ", cache hits: " << manifest.cache_hits
            << ", output: " << config.output_dir.string() << "\n";
  return kOk;
}

int cmd_report(const std::string& config_path, const std::vector<std::string>& inputs, const std::string& out) {
  std::vector<fs::path> paths(inputs.begin(), inputs.end());
  if (paths.empty()) {
    if (config_path.empty()) throw Error(Errc::config, "report needs --config or manifest paths");
    paths.push_back(load_config(config_path).output_dir);
  }
  std::vector<RunManifest> manifests;
  for (auto p : paths) {
    if (fs::is_directory(p)) p /= "manifest.json";
    manifests.push_back(load_manifest(p));
  }
  const auto rep = report(manifests);
  if (!out.empty()) {
    write_text(fs::path(out) / "report.txt", rep.text);
    write_text(fs::path(out) / "report.json", rep.json.dump(2) + "\n");
  }
  std::cout << rep.text;
  return kOk;
}

int cmd_audit(const std::string& config_path, const std::string& out) {
  const auto config = config_with_out(config_path, out);
  const auto in = load_inputs(config);
  std::vector<PromptBundle> bundles;
  std::size_t files = 0;
  for (const auto s : kAllStrategies) {
    const auto path = config.output_dir / ("prompts_" + std::string(to_string(s)) + ".jsonl");
    if (!fs::exists(path)) continue;
    ++files;
    auto more = load_prompt_bundles(path);
    bundles.insert(bundles.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
  }
  if (files == 0) throw Error(Errc::precondition, "no prompt files under " + config.output_dir.string());
  const auto result = audit_leakage(config, in.split, bundles);
  std::cout << json(result).dump(2) << "\n";
  return result.passed() ? kOk : kAuditFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prompting-strategy benchmark for financial news sentiment"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out;
  std::vector<std::string> strategies;
  std::vector<std::string> manifests;
  bool offline = false;

  auto* ingest = app.add_subcommand("ingest", "Validate and normalize the news and price files");
  ingest->add_option("--config", config_path, "Experiment config (JSON)")->required();
  ingest->add_option("--out", out, "Write normalized articles and rejections here");

  auto* split = app.add_subcommand("split", "Summarize the temporal dev/test split");
  split->add_option("--config", config_path, "Experiment config (JSON)")->required();
  split->add_option("--out", out, "Write split.json here");

  auto* run_cmd = app.add_subcommand("run", "Run the configured experiment");
  run_cmd->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run_cmd->add_option("--strategy", strategies, "Only run this strategy (repeatable)");
  run_cmd->add_flag("--offline", offline, "Refuse any network provider call");
  run_cmd->add_option("--out", out, "Output directory (overrides the config)");

  auto* report_cmd = app.add_subcommand("report", "Render the metrics table from run manifests");
  report_cmd->add_option("--config", config_path, "Experiment config; reads its output directory");
  report_cmd->add_option("manifests", manifests, "manifest.json files or run directories");
  report_cmd->add_option("--out", out, "Write report.txt and report.json here");

  auto* audit = app.add_subcommand("audit", "Check a finished run for look-ahead leakage");
  audit->add_option("--config", config_path, "Experiment config (JSON)")->required();
  audit->add_option("--out", out, "Run directory (overrides the config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidation;
  }

  try {
    if (*ingest) return cmd_ingest(config_path, out);
    if (*split) return cmd_split(config_path, out);
    if (*run_cmd) return cmd_run(config_path, strategies, offline, out);
    if (*report_cmd) return cmd_report(config_path, manifests, out);
    if (*audit) return cmd_audit(config_path, out);
  } catch (const Error& e) {
    std::cerr << "error [" << errc_name(e.code()) << "]: " << e.what() << "\n";
    return is_validation_error(e.code()) ? kValidation : kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kRuntime;
}
