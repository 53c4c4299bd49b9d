#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dvpg/corpus.hpp"
#include "dvpg/metrics.hpp"
#include "dvpg/model.hpp"

namespace dvpg {

// Flat experiment configuration, mirroring the config-file keys one to one.
// Unknown keys in a file or override are configuration errors.
struct HarnessConfig {
  // data preparation
  std::string data_format = "quora";  // quora | msrp
  std::string data_input;             // raw TSV
  std::string data_dir;               // prepared corpus directory
  int max_source_length = 14;
  int vocab_limit = 5000;
  bool lowercase = true;
  std::string subword_vocab;
  uint64_t split_seed = 1234;
  double train_ratio = 0.70;
  double dev_ratio = 0.15;
  int subsample_train = 0;  // 0 keeps everything
  int subsample_dev = 0;
  int subsample_test = 0;

  // model
  std::string profile = "desk";  // desk | paper
  std::string model_kind = "dvpg";
  std::string sampling = "independent";
  std::string latent_source = "posterior";
  int hidden = 0;  // 0 = profile default, likewise below
  int embed = 0;
  int target_embed = 0;
  int heads = 0;
  int proj = 0;
  int ff = 0;
  int beam = 0;
  int max_decode = 0;
  std::string embedding_file;

  // training
  int loss_kind = 2;
  std::string schedule = "anneal-only";  // anneal-only | two-step
  std::vector<uint64_t> seeds = {1, 2, 3};
  int epochs = 10;
  int batch_size = 16;
  double lr = 1e-3;
  long long two_step_boundary = -1;  // batches; -1 = 30% of training
  long long anneal_length = -1;      // batches; -1 = one epoch
  bool normalize_ce = false;
  int dev_samples = 10;
  int dev_max_examples = 0;  // 0 = full dev split
  int dev_beam = 0;          // 0 = model beam
  std::string run_dir;
  bool resume = true;

  // evaluation
  std::string eval_split = "test";
  int eval_samples = 10;
  int eval_max_examples = 0;
  int eval_beam = 0;
  int eval_threads = 1;

  // sweep
  std::vector<int> sweep_k = {1, 5, 10, 20};

  // keys given explicitly by the user (file or override)
  std::set<std::string> explicit_keys;
};

HarnessConfig load_config(const std::string& path);
void apply_override(HarnessConfig& cfg, const std::string& key_value);
void validate_config(const HarnessConfig& cfg);

// "baseline" or "<kind>-loss<k>-<sampling>-<schedule>".
std::string experiment_name(const HarnessConfig& cfg);
// I..IV from (sampling, schedule); "-" for the baseline.
std::string training_type_label(const std::string& model_kind,
                                const std::string& sampling,
                                const std::string& schedule);

struct PrepareStats {
  int loaded = 0;
  int skipped = 0;
  int after_filter = 0;
  int after_dedup = 0;
  int train = 0, dev = 0, test = 0;
  int vocab_size = 0;
};

PrepareStats prepare_data(const HarnessConfig& cfg);

struct PreparedCorpus {
  Vocabulary vocab;
  std::vector<EncodedPair> train, dev, test;
};

PreparedCorpus load_prepared(const HarnessConfig& cfg);

struct RunManifest {
  std::string experiment;
  std::string model_kind;
  int loss_kind = 0;
  std::string sampling;
  std::string schedule;
  std::string type_label;
  uint64_t seed = 0;
  int epochs = 0;
  int epochs_done = 0;
  bool complete = false;
  double best_dev_max_bleu = -1.0;
  int best_epoch = -1;
  std::string dir;
  std::string checkpoint_best;
  std::string checkpoint_last;
  std::string train_log;
};

std::string run_directory(const HarnessConfig& cfg, uint64_t seed);
RunManifest read_manifest(const std::string& run_dir);

// Trains one run per seed; resumes incomplete runs from their last epoch
// checkpoint when cfg.resume is set, and skips runs already complete.
std::vector<RunManifest> run_experiment(const HarnessConfig& cfg);

struct MetricReport {
  // metric name -> corpus means of per-example Avg and Best
  std::map<std::string, OracleResult> values;
  int examples = 0;
};

MetricReport evaluate_run(const HarnessConfig& cfg, const RunManifest& run,
                          const std::string& split, int samples_k);

// Nested sample-count sweep; emits <run dir>/sweep_<split>.csv and returns
// one report per K.
std::map<int, MetricReport> sweep_run(const HarnessConfig& cfg,
                                      const RunManifest& run,
                                      const std::vector<int>& k_values);

// Aggregates every per-seed metric CSV under cfg.run_dir into
// report/aggregate.csv and report/tables.md.
void report_grid(const HarnessConfig& cfg);

// Trains and evaluates the full Type I-IV x {vae, dvpg loss 1..3} grid plus
// the baseline, then writes the aggregate report.
void run_grid(const HarnessConfig& cfg);

}  // namespace dvpg
