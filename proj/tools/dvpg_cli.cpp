#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dvpg/common.hpp"
#include "dvpg/demo_data.hpp"
#include "dvpg/harness.hpp"

namespace {

using dvpg::HarnessConfig;

HarnessConfig build_config(const std::string& config_path,
                           const std::vector<std::string>& overrides) {
  HarnessConfig cfg;
  if (!config_path.empty()) cfg = dvpg::load_config(config_path);
  for (const auto& kv : overrides) dvpg::apply_override(cfg, kv);
  return cfg;
}

void add_config_options(CLI::App* cmd, std::string& config_path,
                        std::vector<std::string>& overrides) {
  cmd->add_option("-c,--config", config_path, "config file (key = value lines)");
  cmd->add_option("-s,--set", overrides, "override, key=value (repeatable)");
}

void print_report(const std::string& heading, const dvpg::MetricReport& r) {
  std::cout << heading << " (" << r.examples << " examples)\n";
  for (const auto& name : dvpg::metric_names()) {
    const auto& v = r.values.at(name);
    std::cout << "  " << name << "  avg " << dvpg::format_double(v.avg, 2)
              << "  best " << dvpg::format_double(v.best, 2) << "\n";
  }
}

std::vector<dvpg::RunManifest> manifests_for_seeds(const HarnessConfig& cfg) {
  std::vector<dvpg::RunManifest> out;
  for (uint64_t seed : cfg.seeds)
    out.push_back(dvpg::read_manifest(dvpg::run_directory(cfg, seed)));
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"label-conditioned paraphrase generation toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;

  auto* prepare = app.add_subcommand(
      "prepare-data", "tokenize, filter, split, and encode a raw corpus");
  add_config_options(prepare, config_path, overrides);

  auto* train = app.add_subcommand(
      "train", "train one configuration across the configured seeds");
  add_config_options(train, config_path, overrides);

  auto* evaluate = app.add_subcommand(
      "evaluate", "decode and score the trained runs on one split");
  add_config_options(evaluate, config_path, overrides);

  auto* sweep = app.add_subcommand(
      "sweep", "evaluate across nested sample counts");
  add_config_options(sweep, config_path, overrides);

  auto* report = app.add_subcommand(
      "report", "aggregate per-seed metric files into tables");
  add_config_options(report, config_path, overrides);

  auto* grid = app.add_subcommand(
      "grid", "train, evaluate, and report the full configuration grid");
  add_config_options(grid, config_path, overrides);

  std::string demo_flavor = "desk";
  std::string demo_out;
  auto* demo = app.add_subcommand("demo-data",
                                  "write a synthetic corpus in quora format");
  demo->add_option("--flavor", demo_flavor, "toy | desk");
  demo->add_option("--out", demo_out, "output TSV path")->required();

  CLI11_PARSE(app, argc, argv);

  if (demo->parsed()) {
    dvpg::write_demo_corpus(demo_out, demo_flavor);
    std::cout << "wrote " << demo_flavor << " corpus to " << demo_out << "\n";
    return 0;
  }

  HarnessConfig cfg = build_config(config_path, overrides);

  if (prepare->parsed()) {
    dvpg::validate_config(cfg);
    auto stats = dvpg::prepare_data(cfg);
    std::cout << "loaded " << stats.loaded << " pairs (skipped "
              << stats.skipped << "), " << stats.after_filter
              << " after length filter, " << stats.after_dedup
              << " after dedup\n"
              << "splits: train " << stats.train << ", dev " << stats.dev
              << ", test " << stats.test << "; vocabulary " << stats.vocab_size
              << "\n";
  } else if (train->parsed()) {
    auto runs = dvpg::run_experiment(cfg);
    for (const auto& r : runs)
      std::cout << r.experiment << " seed " << r.seed << ": best dev max-BLEU "
                << dvpg::format_double(r.best_dev_max_bleu, 2) << " at epoch "
                << r.best_epoch << "\n";
  } else if (evaluate->parsed()) {
    dvpg::validate_config(cfg);
    for (const auto& run : manifests_for_seeds(cfg)) {
      auto rep = dvpg::evaluate_run(cfg, run, cfg.eval_split, cfg.eval_samples);
      print_report(run.experiment + " seed " + std::to_string(run.seed) +
                       " on " + cfg.eval_split +
                       " K=" + std::to_string(cfg.eval_samples),
                   rep);
    }
  } else if (sweep->parsed()) {
    dvpg::validate_config(cfg);
    for (const auto& run : manifests_for_seeds(cfg)) {
      auto by_k = dvpg::sweep_run(cfg, run, cfg.sweep_k);
      for (const auto& [k, rep] : by_k)
        print_report(run.experiment + " seed " + std::to_string(run.seed) +
                         " K=" + std::to_string(k),
                     rep);
    }
  } else if (report->parsed()) {
    dvpg::validate_config(cfg);
    dvpg::report_grid(cfg);
    std::cout << "wrote " << cfg.run_dir << "/report/aggregate.csv and tables.md\n";
  } else if (grid->parsed()) {
    dvpg::run_grid(cfg);
    std::cout << "grid complete; report under " << cfg.run_dir << "/report\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const dvpg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const dvpg::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
