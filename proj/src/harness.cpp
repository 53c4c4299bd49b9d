#include "dvpg/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "dvpg/common.hpp"
#include "dvpg/rng.hpp"

namespace dvpg {

using nlohmann::json;

namespace {

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("bad boolean for " + key + ": " + v);
}

long long parse_ll(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    long long out = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("bad integer for " + key + ": " + v);
  }
}

int parse_int(const std::string& key, const std::string& v) {
  long long out = parse_ll(key, v);
  if (out < -2147483648LL || out > 2147483647LL)
    throw ConfigError("integer out of range for " + key + ": " + v);
  return static_cast<int>(out);
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("bad number for " + key + ": " + v);
  }
}

std::vector<uint64_t> parse_u64_list(const std::string& key,
                                     const std::string& v) {
  std::vector<uint64_t> out;
  for (const auto& part : split(v, ',')) {
    const std::string p = trim(part);
    if (p.empty()) continue;
    out.push_back(static_cast<uint64_t>(parse_ll(key, p)));
  }
  if (out.empty()) throw ConfigError("empty list for " + key);
  return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  for (const auto& part : split(v, ',')) {
    const std::string p = trim(part);
    if (p.empty()) continue;
    out.push_back(parse_int(key, p));
  }
  if (out.empty()) throw ConfigError("empty list for " + key);
  return out;
}

void set_key(HarnessConfig& c, const std::string& key, const std::string& v) {
  if (key == "data.format") c.data_format = v;
  else if (key == "data.input") c.data_input = v;
  else if (key == "data.dir") c.data_dir = v;
  else if (key == "data.max_source_length") c.max_source_length = parse_int(key, v);
  else if (key == "data.vocab_limit") c.vocab_limit = parse_int(key, v);
  else if (key == "data.lowercase") c.lowercase = parse_bool(key, v);
  else if (key == "data.subword_vocab") c.subword_vocab = v;
  else if (key == "data.split_seed") c.split_seed = static_cast<uint64_t>(parse_ll(key, v));
  else if (key == "data.train_ratio") c.train_ratio = parse_real(key, v);
  else if (key == "data.dev_ratio") c.dev_ratio = parse_real(key, v);
  else if (key == "data.subsample_train") c.subsample_train = parse_int(key, v);
  else if (key == "data.subsample_dev") c.subsample_dev = parse_int(key, v);
  else if (key == "data.subsample_test") c.subsample_test = parse_int(key, v);
  else if (key == "model.profile") c.profile = v;
  else if (key == "model.kind") c.model_kind = v;
  else if (key == "model.sampling") c.sampling = v;
  else if (key == "model.latent_source") c.latent_source = v;
  else if (key == "model.hidden") c.hidden = parse_int(key, v);
  else if (key == "model.embed") c.embed = parse_int(key, v);
  else if (key == "model.target_embed") c.target_embed = parse_int(key, v);
  else if (key == "model.heads") c.heads = parse_int(key, v);
  else if (key == "model.proj") c.proj = parse_int(key, v);
  else if (key == "model.ff") c.ff = parse_int(key, v);
  else if (key == "model.beam") c.beam = parse_int(key, v);
  else if (key == "model.max_decode") c.max_decode = parse_int(key, v);
  else if (key == "model.embedding_file") c.embedding_file = v;
  else if (key == "train.loss") c.loss_kind = parse_int(key, v);
  else if (key == "train.schedule") c.schedule = v;
  else if (key == "train.seeds") c.seeds = parse_u64_list(key, v);
  else if (key == "train.epochs") c.epochs = parse_int(key, v);
  else if (key == "train.batch_size") c.batch_size = parse_int(key, v);
  else if (key == "train.lr") c.lr = parse_real(key, v);
  else if (key == "train.two_step_boundary") c.two_step_boundary = parse_ll(key, v);
  else if (key == "train.anneal_length") c.anneal_length = parse_ll(key, v);
  else if (key == "train.normalize_ce") c.normalize_ce = parse_bool(key, v);
  else if (key == "train.dev_samples") c.dev_samples = parse_int(key, v);
  else if (key == "train.dev_max_examples") c.dev_max_examples = parse_int(key, v);
  else if (key == "train.dev_beam") c.dev_beam = parse_int(key, v);
  else if (key == "train.run_dir") c.run_dir = v;
  else if (key == "train.resume") c.resume = parse_bool(key, v);
  else if (key == "eval.split") c.eval_split = v;
  else if (key == "eval.samples") c.eval_samples = parse_int(key, v);
  else if (key == "eval.max_examples") c.eval_max_examples = parse_int(key, v);
  else if (key == "eval.beam") c.eval_beam = parse_int(key, v);
  else if (key == "eval.threads") c.eval_threads = parse_int(key, v);
  else if (key == "sweep.k_values") c.sweep_k = parse_int_list(key, v);
  else throw ConfigError("unknown config key: " + key);
  c.explicit_keys.insert(key);
}

template <typename T>
void require(bool ok, const T& msg) {
  if (!ok) throw ConfigError(msg);
}

json config_to_json(const HarnessConfig& c) {
  json j;
  j["data.format"] = c.data_format;
  j["data.input"] = c.data_input;
  j["data.dir"] = c.data_dir;
  j["data.max_source_length"] = c.max_source_length;
  j["data.vocab_limit"] = c.vocab_limit;
  j["data.lowercase"] = c.lowercase;
  j["data.subword_vocab"] = c.subword_vocab;
  j["data.split_seed"] = c.split_seed;
  j["data.train_ratio"] = c.train_ratio;
  j["data.dev_ratio"] = c.dev_ratio;
  j["data.subsample_train"] = c.subsample_train;
  j["data.subsample_dev"] = c.subsample_dev;
  j["data.subsample_test"] = c.subsample_test;
  j["model.profile"] = c.profile;
  j["model.kind"] = c.model_kind;
  j["model.sampling"] = c.sampling;
  j["model.latent_source"] = c.latent_source;
  j["model.hidden"] = c.hidden;
  j["model.embed"] = c.embed;
  j["model.target_embed"] = c.target_embed;
  j["model.heads"] = c.heads;
  j["model.proj"] = c.proj;
  j["model.ff"] = c.ff;
  j["model.beam"] = c.beam;
  j["model.max_decode"] = c.max_decode;
  j["model.embedding_file"] = c.embedding_file;
  j["train.loss"] = c.loss_kind;
  j["train.schedule"] = c.schedule;
  j["train.seeds"] = c.seeds;
  j["train.epochs"] = c.epochs;
  j["train.batch_size"] = c.batch_size;
  j["train.lr"] = c.lr;
  j["train.two_step_boundary"] = c.two_step_boundary;
  j["train.anneal_length"] = c.anneal_length;
  j["train.normalize_ce"] = c.normalize_ce;
  j["train.dev_samples"] = c.dev_samples;
  j["train.dev_max_examples"] = c.dev_max_examples;
  j["train.dev_beam"] = c.dev_beam;
  j["train.run_dir"] = c.run_dir;
  j["eval.split"] = c.eval_split;
  j["eval.samples"] = c.eval_samples;
  j["eval.max_examples"] = c.eval_max_examples;
  j["eval.beam"] = c.eval_beam;
  j["sweep.k_values"] = c.sweep_k;
  return j;
}

ModelConfig model_config(const HarnessConfig& c, int vocab_size) {
  ModelConfig mc = profile_config(c.profile);
  mc.kind = c.model_kind;
  mc.sampling = c.sampling;
  mc.latent_source = c.latent_source;
  mc.vocab_size = vocab_size;
  mc.max_source_length = c.max_source_length;
  mc.normalize_ce = c.normalize_ce;
  mc.embedding_file = c.embedding_file;
  if (c.hidden > 0) mc.hidden = c.hidden;
  if (c.embed > 0) mc.embed = c.embed;
  if (c.target_embed > 0) mc.target_embed = c.target_embed;
  if (c.heads > 0) mc.heads = c.heads;
  if (c.proj > 0) mc.proj = c.proj;
  if (c.ff > 0) mc.ff = c.ff;
  if (c.beam > 0) mc.beam = c.beam;
  if (c.max_decode > 0) mc.max_decode = c.max_decode;
  return mc;
}

std::string split_path(const HarnessConfig& c, const std::string& split) {
  return c.data_dir + "/" + split + ".jsonl";
}

void apply_subsample(std::vector<EncodedPair>& v, int limit) {
  if (limit > 0 && static_cast<int>(v.size()) > limit) v.resize(limit);
}

// Noise stream ids: one stream per (purpose, a, b) so resume and nested
// sampling reproduce draws exactly. b packs (example, draw).
uint64_t pack_draw(long long example, int draw) {
  return (static_cast<uint64_t>(example) << 16) | static_cast<uint64_t>(draw);
}

struct CandidateSet {
  std::vector<Tokens> texts;        // eos-stripped surface tokens
  std::vector<double> scores;       // beam score of the chosen hypothesis
};

// K candidates for one example: one encode, K latent draws, one beam search
// per draw, top hypothesis kept. The baseline ignores K and decodes once.
CandidateSet generate_candidates(Model& model, const Vocabulary& vocab,
                                 const EncodedPair& ex, long long example_index,
                                 int samples_k, int beam_width,
                                 uint64_t run_seed, const char* stream_tag) {
  CandidateSet out;
  const int k = model.config().variational() ? samples_k : 1;
  Tape tape;
  auto b = model.bind(tape, false);
  model.set_current_example_id(example_index);
  EncoderStates enc = model.encode(b, ex);
  for (int draw = 0; draw < k; ++draw) {
    Expr states = enc.states;
    if (model.config().variational()) {
      Rng rng(run_seed, stream_tag, pack_draw(example_index, draw));
      Mat eps = model.draw_noise(static_cast<int>(ex.source_ids.size()), rng);
      states = model.latent_states(b, enc, ex, eps);
    }
    GenerationSet gen = model.beam_search(b, states, ex, beam_width,
                                          model.config().max_decode);
    if (gen.candidates.empty()) {
      out.texts.emplace_back();
      out.scores.push_back(-1e30);
    } else {
      out.texts.push_back(model.ids_to_tokens(gen.candidates[0], vocab, ex));
      out.scores.push_back(gen.scores[0]);
    }
  }
  return out;
}

// Empty candidates cannot be scored by the sentence metrics, so they get the
// worst defined value instead of an error.
double score_candidate(const std::string& metric, const Tokens& cand,
                       const Tokens& ref) {
  if (cand.empty())
    return metric_direction(metric) == MetricDirection::kMinimize ? 100.0 : 0.0;
  return compute_metric(metric, cand, ref, MetricOptions{}).value;
}

struct ExampleScores {
  // metric -> per-candidate scores
  std::map<std::string, std::vector<double>> by_metric;
};

ExampleScores score_example(const CandidateSet& cands, const Tokens& ref) {
  ExampleScores s;
  for (const auto& name : metric_names()) {
    auto& col = s.by_metric[name];
    col.reserve(cands.texts.size());
    for (const auto& cand : cands.texts)
      col.push_back(score_candidate(name, cand, ref));
  }
  return s;
}

void write_manifest(const std::string& path, const RunManifest& m,
                    const HarnessConfig& cfg) {
  json j;
  j["experiment"] = m.experiment;
  j["model_kind"] = m.model_kind;
  j["loss_kind"] = m.loss_kind;
  j["sampling"] = m.sampling;
  j["schedule"] = m.schedule;
  j["type_label"] = m.type_label;
  j["seed"] = m.seed;
  j["epochs"] = m.epochs;
  j["epochs_done"] = m.epochs_done;
  j["complete"] = m.complete;
  j["best_dev_max_bleu"] = m.best_dev_max_bleu;
  j["best_epoch"] = m.best_epoch;
  j["dir"] = m.dir;
  j["checkpoint_best"] = m.checkpoint_best;
  j["checkpoint_last"] = m.checkpoint_last;
  j["train_log"] = m.train_log;
  j["config"] = config_to_json(cfg);
  write_text_file(path, j.dump(2) + "\n");
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Dev selection score: corpus mean of per-example best BLEU over K draws.
double dev_max_bleu(Model& model, const Vocabulary& vocab,
                    const std::vector<EncodedPair>& dev, int max_examples,
                    int samples_k, int beam_width, uint64_t run_seed) {
  const int n = max_examples > 0
                    ? std::min<int>(max_examples, static_cast<int>(dev.size()))
                    : static_cast<int>(dev.size());
  if (n == 0) return 0.0;
  std::vector<double> best(n);
  for (int i = 0; i < n; ++i) {
    CandidateSet cands = generate_candidates(model, vocab, dev[i], i,
                                             samples_k, beam_width, run_seed,
                                             "dev-z");
    std::vector<double> scores;
    scores.reserve(cands.texts.size());
    for (const auto& cand : cands.texts)
      scores.push_back(score_candidate("BLEU", cand, dev[i].target_tokens));
    best[i] = oracle_aggregate(scores, MetricDirection::kMaximize).best;
  }
  return mean_of(best);
}

std::string metrics_csv_path(const RunManifest& run, const std::string& split,
                             int samples_k) {
  return run.dir + "/eval_" + split + "_K" + std::to_string(samples_k) + ".csv";
}

void write_metrics_csv(const std::string& path, const RunManifest& run,
                       const MetricReport& report) {
  std::string out = "model,loss,training_type,seed,metric,avg,best\n";
  for (const auto& name : metric_names()) {
    const OracleResult& r = report.values.at(name);
    out += run.model_kind + "," + std::to_string(run.loss_kind) + "," +
           run.type_label + "," + std::to_string(run.seed) + "," + name + "," +
           format_double(r.avg, 6) + "," + format_double(r.best, 6) + "\n";
  }
  write_text_file(path, out);
}

struct GridEntry {
  std::string model_kind;
  int loss_kind;
  std::string sampling;
  std::string schedule;
};

std::vector<GridEntry> grid_entries() {
  std::vector<GridEntry> out;
  out.push_back({"baseline", 0, "independent", "anneal-only"});
  const std::vector<std::pair<std::string, std::string>> types = {
      {"independent", "anneal-only"},
      {"independent", "two-step"},
      {"aggregated", "anneal-only"},
      {"aggregated", "two-step"},
  };
  for (const auto& [sampling, schedule] : types) {
    out.push_back({"vae", 2, sampling, schedule});
    for (int loss = 1; loss <= 3; ++loss)
      out.push_back({"dvpg", loss, sampling, schedule});
  }
  return out;
}

}  // namespace

HarnessConfig load_config(const std::string& path) {
  HarnessConfig cfg;
  int line_no = 0;
  for (const auto& raw : read_lines(path)) {
    ++line_no;
    std::string line = trim(raw);
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = trim(line.substr(0, hash));
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": expected key = value");
    set_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

void apply_override(HarnessConfig& cfg, const std::string& key_value) {
  size_t eq = key_value.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override must be key=value: " + key_value);
  set_key(cfg, trim(key_value.substr(0, eq)), trim(key_value.substr(eq + 1)));
}

void validate_config(const HarnessConfig& c) {
  require(c.data_format == "quora" || c.data_format == "msrp",
          "data.format must be quora or msrp");
  require(c.max_source_length > 0, "data.max_source_length must be positive");
  require(c.vocab_limit > 0, "data.vocab_limit must be positive");
  require(c.train_ratio > 0 && c.dev_ratio >= 0 &&
              c.train_ratio + c.dev_ratio < 1.0,
          "split ratios must leave room for a test split");
  require(c.profile == "desk" || c.profile == "paper",
          "model.profile must be desk or paper");
  require(c.model_kind == "baseline" || c.model_kind == "vae" ||
              c.model_kind == "dvpg",
          "model.kind must be baseline, vae, or dvpg");
  require(c.sampling == "independent" || c.sampling == "aggregated",
          "model.sampling must be independent or aggregated");
  require(c.latent_source == "posterior" || c.latent_source == "prior",
          "model.latent_source must be posterior or prior");
  require(c.loss_kind >= 1 && c.loss_kind <= 3, "train.loss must be 1, 2, or 3");
  require(c.schedule == "anneal-only" || c.schedule == "two-step",
          "train.schedule must be anneal-only or two-step");
  require(!c.seeds.empty(), "train.seeds must not be empty");
  require(c.epochs > 0, "train.epochs must be positive");
  require(c.batch_size > 0, "train.batch_size must be positive");
  require(c.lr > 0, "train.lr must be positive");
  require(c.dev_samples > 0, "train.dev_samples must be positive");
  require(c.eval_samples > 0, "eval.samples must be positive");
  require(c.eval_threads > 0, "eval.threads must be positive");
  require(c.eval_split == "train" || c.eval_split == "dev" ||
              c.eval_split == "test",
          "eval.split must be train, dev, or test");
  for (int k : c.sweep_k) require(k > 0, "sweep.k_values must be positive");
  if (c.model_kind == "baseline") {
    for (const char* key : {"train.loss", "model.sampling", "train.schedule"})
      if (c.explicit_keys.count(key))
        std::cerr << "warning: " << key << " is ignored by the baseline\n";
  }
}

std::string experiment_name(const HarnessConfig& cfg) {
  if (cfg.model_kind == "baseline") return "baseline";
  return cfg.model_kind + "-loss" + std::to_string(cfg.loss_kind) + "-" +
         cfg.sampling + "-" + cfg.schedule;
}

std::string training_type_label(const std::string& model_kind,
                                const std::string& sampling,
                                const std::string& schedule) {
  if (model_kind == "baseline") return "-";
  const bool agg = sampling == "aggregated";
  const bool two = schedule == "two-step";
  if (!agg && !two) return "I";
  if (!agg && two) return "II";
  if (agg && !two) return "III";
  return "IV";
}

PrepareStats prepare_data(const HarnessConfig& cfg) {
  require(!cfg.data_input.empty(), "data.input is required");
  require(!cfg.data_dir.empty(), "data.dir is required");
  PrepareStats stats;

  LoadResult raw = cfg.data_format == "quora" ? load_quora_tsv(cfg.data_input)
                                              : load_msrp_tsv(cfg.data_input);
  stats.loaded = static_cast<int>(raw.pairs.size());
  stats.skipped = raw.skipped;

  TokenizerConfig tc;
  tc.lowercase = cfg.lowercase;
  tc.subword_vocab_path = cfg.subword_vocab;
  Tokenizer tok(tc);

  std::vector<ParaphrasePair> pairs;
  pairs.reserve(raw.pairs.size());
  for (const auto& rp : raw.pairs) {
    ParaphrasePair p;
    p.original = tok.tokenize(rp.original);
    p.paraphrase = tok.tokenize(rp.paraphrase);
    p.label = rp.label;
    pairs.push_back(std::move(p));
  }

  pairs = filter_by_length(pairs, cfg.max_source_length);
  stats.after_filter = static_cast<int>(pairs.size());
  pairs = deduplicate(pairs);
  stats.after_dedup = static_cast<int>(pairs.size());

  CorpusSplit splits =
      split_corpus(pairs, cfg.split_seed, cfg.train_ratio, cfg.dev_ratio);
  Vocabulary vocab = Vocabulary::build(splits.train, cfg.vocab_limit);
  stats.vocab_size = vocab.size();

  ensure_dir(cfg.data_dir);
  vocab.save(cfg.data_dir + "/vocab.json");
  auto encode_all = [&](const std::vector<ParaphrasePair>& v) {
    std::vector<EncodedPair> out;
    out.reserve(v.size());
    for (const auto& p : v) out.push_back(encode_pair(p, vocab));
    return out;
  };
  const auto train = encode_all(splits.train);
  const auto dev = encode_all(splits.dev);
  const auto test = encode_all(splits.test);
  write_encoded_jsonl(split_path(cfg, "train"), train);
  write_encoded_jsonl(split_path(cfg, "dev"), dev);
  write_encoded_jsonl(split_path(cfg, "test"), test);
  stats.train = static_cast<int>(train.size());
  stats.dev = static_cast<int>(dev.size());
  stats.test = static_cast<int>(test.size());

  json report;
  report["loaded"] = stats.loaded;
  report["skipped"] = stats.skipped;
  report["after_filter"] = stats.after_filter;
  report["after_dedup"] = stats.after_dedup;
  report["train"] = stats.train;
  report["dev"] = stats.dev;
  report["test"] = stats.test;
  report["vocab_size"] = stats.vocab_size;
  write_text_file(cfg.data_dir + "/prepare_report.json", report.dump(2) + "\n");
  return stats;
}

PreparedCorpus load_prepared(const HarnessConfig& cfg) {
  require(!cfg.data_dir.empty(), "data.dir is required");
  if (!file_exists(cfg.data_dir + "/vocab.json"))
    throw DataError("prepared corpus not found under " + cfg.data_dir);
  PreparedCorpus out;
  out.vocab = Vocabulary::load(cfg.data_dir + "/vocab.json");
  out.train = read_encoded_jsonl(split_path(cfg, "train"));
  out.dev = read_encoded_jsonl(split_path(cfg, "dev"));
  out.test = read_encoded_jsonl(split_path(cfg, "test"));
  apply_subsample(out.train, cfg.subsample_train);
  apply_subsample(out.dev, cfg.subsample_dev);
  apply_subsample(out.test, cfg.subsample_test);
  return out;
}

std::string run_directory(const HarnessConfig& cfg, uint64_t seed) {
  require(!cfg.run_dir.empty(), "train.run_dir is required");
  return cfg.run_dir + "/" + experiment_name(cfg) + "/seed" +
         std::to_string(seed);
}

RunManifest read_manifest(const std::string& run_dir) {
  const std::string path = run_dir + "/manifest.json";
  if (!file_exists(path)) throw DataError("no manifest at " + path);
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw DataError("bad manifest " + path + ": " + e.what());
  }
  RunManifest m;
  m.experiment = j.at("experiment").get<std::string>();
  m.model_kind = j.at("model_kind").get<std::string>();
  m.loss_kind = j.at("loss_kind").get<int>();
  m.sampling = j.at("sampling").get<std::string>();
  m.schedule = j.at("schedule").get<std::string>();
  m.type_label = j.at("type_label").get<std::string>();
  m.seed = j.at("seed").get<uint64_t>();
  m.epochs = j.at("epochs").get<int>();
  m.epochs_done = j.at("epochs_done").get<int>();
  m.complete = j.at("complete").get<bool>();
  m.best_dev_max_bleu = j.at("best_dev_max_bleu").get<double>();
  m.best_epoch = j.at("best_epoch").get<int>();
  m.dir = j.at("dir").get<std::string>();
  m.checkpoint_best = j.at("checkpoint_best").get<std::string>();
  m.checkpoint_last = j.at("checkpoint_last").get<std::string>();
  m.train_log = j.at("train_log").get<std::string>();
  return m;
}

namespace {

RunManifest train_one_seed(const HarnessConfig& cfg,
                           const PreparedCorpus& corpus, uint64_t seed) {
  const std::string dir = run_directory(cfg, seed);
  const std::string manifest_path = dir + "/manifest.json";

  RunManifest m;
  m.experiment = experiment_name(cfg);
  m.model_kind = cfg.model_kind;
  m.loss_kind = cfg.model_kind == "baseline" ? 0 : cfg.loss_kind;
  m.sampling = cfg.sampling;
  m.schedule = cfg.schedule;
  m.type_label = training_type_label(cfg.model_kind, cfg.sampling, cfg.schedule);
  m.seed = seed;
  m.epochs = cfg.epochs;
  m.dir = dir;
  m.checkpoint_best = dir + "/best.ckpt";
  m.checkpoint_last = dir + "/last.ckpt";
  m.train_log = dir + "/train_log.jsonl";

  int start_epoch = 0;
  long long adam_steps = 0;
  if (cfg.resume && file_exists(manifest_path)) {
    RunManifest prev = read_manifest(dir);
    if (prev.epochs_done >= cfg.epochs) return prev;
    if (prev.epochs_done > 0 && file_exists(m.checkpoint_last)) {
      start_epoch = prev.epochs_done;
      m.best_dev_max_bleu = prev.best_dev_max_bleu;
      m.best_epoch = prev.best_epoch;
    }
  }
  ensure_dir(dir);

  ModelConfig mc = model_config(cfg, corpus.vocab.size());
  Model model(mc, seed);
  std::shared_ptr<EmbeddingFile> embeddings;
  if (!mc.embedding_file.empty()) {
    embeddings = std::make_shared<EmbeddingFile>(mc.embedding_file);
    model.attach_embedding_file(embeddings);
  }

  const auto& train = corpus.train;
  if (train.empty()) throw DataError("empty training split");
  const int n = static_cast<int>(train.size());
  const long long batches_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;

  ScheduleState sched;
  sched.kind = cfg.schedule == "two-step" ? ScheduleKind::kTwoStep
                                          : ScheduleKind::kAnnealOnly;
  sched.two_step_boundary =
      cfg.two_step_boundary >= 0
          ? cfg.two_step_boundary
          : std::llround(0.3 * static_cast<double>(cfg.epochs) *
                         static_cast<double>(batches_per_epoch));
  sched.anneal_length =
      cfg.anneal_length >= 0 ? cfg.anneal_length : batches_per_epoch;
  sched.step = static_cast<long long>(start_epoch) * batches_per_epoch;

  AdamConfig ac;
  ac.lr = cfg.lr;
  Adam adam(ac);

  if (start_epoch > 0) {
    std::string extra = model.load_checkpoint(m.checkpoint_last, true);
    json j = json::parse(extra);
    adam_steps = j.at("adam_steps").get<long long>();
    adam.set_steps_taken(adam_steps);
  }

  std::FILE* log = std::fopen(m.train_log.c_str(), start_epoch > 0 ? "ab" : "wb");
  if (!log) throw DataError("cannot open " + m.train_log);

  const int dev_k = cfg.model_kind == "baseline" ? 1 : cfg.dev_samples;
  const int dev_beam = cfg.dev_beam > 0 ? cfg.dev_beam : mc.beam;

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    Rng shuffle_rng(seed, "shuffle", static_cast<uint64_t>(epoch));
    shuffle_rng.shuffle(order);

    for (long long batch = 0; batch < batches_per_epoch; ++batch) {
      const int lo = static_cast<int>(batch) * cfg.batch_size;
      const int hi = std::min(n, lo + cfg.batch_size);
      const double coeff = anneal_coefficient(sched);
      const bool bypass = latent_bypassed(sched);

      Tape tape;
      auto b = model.bind(tape, true);
      std::vector<Expr> totals;
      double ce_sum = 0.0;
      std::optional<double> kl_sum;
      for (int pos = lo; pos < hi; ++pos) {
        const EncodedPair& ex = train[order[pos]];
        Mat eps;
        if (mc.variational() && !bypass) {
          Rng noise_rng(seed, "train-z", static_cast<uint64_t>(epoch),
                        static_cast<uint64_t>(pos));
          eps = model.draw_noise(static_cast<int>(ex.source_ids.size()),
                                 noise_rng);
        }
        model.set_current_example_id(pos);
        auto loss = model.example_loss(b, ex, cfg.loss_kind, bypass, coeff, eps);
        totals.push_back(loss.total);
        ce_sum += loss.ce;
        if (loss.kl) kl_sum = kl_sum.value_or(0.0) + *loss.kl;
      }
      Expr root = totals.size() == 1 ? totals[0] : tape.add_n(totals);
      tape.backward(root);
      model.params().zero_grads();
      model.harvest(b);
      adam.step(model.params());

      json rec;
      rec["step"] = sched.step;
      rec["ce"] = ce_sum;
      if (kl_sum) rec["kl"] = *kl_sum;
      rec["coefficient"] = coeff;
      rec["total"] = kl_sum ? ce_sum + coeff * *kl_sum : ce_sum;
      const std::string line = rec.dump() + "\n";
      std::fwrite(line.data(), 1, line.size(), log);
      sched.step += 1;
    }
    std::fflush(log);

    double dev_score = dev_max_bleu(model, corpus.vocab, corpus.dev,
                                    cfg.dev_max_examples, dev_k, dev_beam, seed);
    if (dev_score > m.best_dev_max_bleu) {
      m.best_dev_max_bleu = dev_score;
      m.best_epoch = epoch;
      json extra;
      extra["epoch"] = epoch;
      extra["dev_max_bleu"] = dev_score;
      model.save_checkpoint(m.checkpoint_best, false, extra.dump());
    }

    json extra;
    extra["epoch"] = epoch;
    extra["adam_steps"] = adam.steps_taken();
    extra["schedule_step"] = sched.step;
    extra["best_dev_max_bleu"] = m.best_dev_max_bleu;
    extra["best_epoch"] = m.best_epoch;
    model.save_checkpoint(m.checkpoint_last, true, extra.dump());

    m.epochs_done = epoch + 1;
    m.complete = m.epochs_done == cfg.epochs;
    write_manifest(manifest_path, m, cfg);
  }
  std::fclose(log);
  return m;
}

}  // namespace

std::vector<RunManifest> run_experiment(const HarnessConfig& cfg) {
  validate_config(cfg);
  PreparedCorpus corpus = load_prepared(cfg);
  std::vector<RunManifest> out;
  for (uint64_t seed : cfg.seeds)
    out.push_back(train_one_seed(cfg, corpus, seed));
  return out;
}

namespace {

const std::vector<EncodedPair>& pick_split(const PreparedCorpus& corpus,
                                           const std::string& split) {
  if (split == "train") return corpus.train;
  if (split == "dev") return corpus.dev;
  return corpus.test;
}

// Candidate generation for a whole split, parallel over examples with a
// deterministic, index-addressed result layout.
std::vector<CandidateSet> generate_split(Model& model, const ModelConfig& mc,
                                         const Vocabulary& vocab,
                                         const std::vector<EncodedPair>& data,
                                         int n, int samples_k, int beam_width,
                                         uint64_t run_seed, int threads) {
  std::vector<CandidateSet> results(n);
  if (threads <= 1 || n < 2 * threads) {
    for (int i = 0; i < n; ++i)
      results[i] = generate_candidates(model, vocab, data[i], i, samples_k,
                                       beam_width, run_seed, "eval-z");
  } else {
    // Binding mutates per-model bookkeeping, so each worker decodes on its
    // own copy. Results are index-addressed, keeping the output independent
    // of the thread count.
    std::vector<std::thread> pool;
    const int chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const int lo = t * chunk;
      const int hi = std::min(n, lo + chunk);
      if (lo >= hi) continue;
      pool.emplace_back([&, lo, hi]() {
        Model local = model;
        for (int i = lo; i < hi; ++i)
          results[i] = generate_candidates(local, vocab, data[i], i, samples_k,
                                           beam_width, run_seed, "eval-z");
      });
    }
    for (auto& th : pool) th.join();
  }
  (void)mc;
  return results;
}

MetricReport report_from_scores(
    const std::vector<ExampleScores>& per_example) {
  MetricReport report;
  report.examples = static_cast<int>(per_example.size());
  for (const auto& name : metric_names()) {
    std::vector<double> avgs, bests;
    avgs.reserve(per_example.size());
    bests.reserve(per_example.size());
    for (const auto& ex : per_example) {
      OracleResult r =
          oracle_aggregate(ex.by_metric.at(name), metric_direction(name));
      avgs.push_back(r.avg);
      bests.push_back(r.best);
    }
    report.values[name] = {mean_of(avgs), mean_of(bests)};
  }
  return report;
}

Model load_eval_model(const HarnessConfig& cfg, const RunManifest& run,
                      int vocab_size) {
  HarnessConfig mc_cfg = cfg;
  mc_cfg.model_kind = run.model_kind;
  mc_cfg.sampling = run.sampling;
  mc_cfg.schedule = run.schedule;
  ModelConfig mc = model_config(mc_cfg, vocab_size);
  Model model(mc, run.seed);
  const std::string ckpt =
      file_exists(run.checkpoint_best) ? run.checkpoint_best
                                       : run.checkpoint_last;
  if (!file_exists(ckpt)) throw DataError("no checkpoint under " + run.dir);
  model.load_checkpoint(ckpt, false);
  if (!mc.embedding_file.empty())
    model.attach_embedding_file(std::make_shared<EmbeddingFile>(mc.embedding_file));
  return model;
}

void write_candidates_jsonl(const std::string& path,
                            const std::vector<EncodedPair>& data, int n,
                            const std::vector<CandidateSet>& cands) {
  std::string out;
  for (int i = 0; i < n; ++i) {
    json j;
    j["example"] = i;
    j["label"] = data[i].label;
    j["source"] = data[i].source_tokens;
    j["reference"] = data[i].target_tokens;
    j["candidates"] = cands[i].texts;
    j["scores"] = cands[i].scores;
    out += j.dump() + "\n";
  }
  write_text_file(path, out);
}

}  // namespace

MetricReport evaluate_run(const HarnessConfig& cfg, const RunManifest& run,
                          const std::string& split, int samples_k) {
  PreparedCorpus corpus = load_prepared(cfg);
  const auto& data = pick_split(corpus, split);
  const int n = cfg.eval_max_examples > 0
                    ? std::min<int>(cfg.eval_max_examples,
                                    static_cast<int>(data.size()))
                    : static_cast<int>(data.size());
  if (n == 0) throw DataError("evaluation split " + split + " is empty");

  Model model = load_eval_model(cfg, run, corpus.vocab.size());
  const int beam = cfg.eval_beam > 0 ? cfg.eval_beam : model.config().beam;
  auto cands = generate_split(model, model.config(), corpus.vocab, data, n,
                              samples_k, beam, run.seed, cfg.eval_threads);

  std::vector<ExampleScores> scores(n);
  for (int i = 0; i < n; ++i)
    scores[i] = score_example(cands[i], data[i].target_tokens);

  MetricReport report = report_from_scores(scores);
  write_candidates_jsonl(run.dir + "/candidates_" + split + "_K" +
                             std::to_string(samples_k) + ".jsonl",
                         data, n, cands);
  write_metrics_csv(metrics_csv_path(run, split, samples_k), run, report);
  return report;
}

std::map<int, MetricReport> sweep_run(const HarnessConfig& cfg,
                                      const RunManifest& run,
                                      const std::vector<int>& k_values) {
  if (k_values.empty()) throw ConfigError("sweep.k_values must not be empty");
  PreparedCorpus corpus = load_prepared(cfg);
  const std::string split = cfg.eval_split;
  const auto& data = pick_split(corpus, split);
  const int n = cfg.eval_max_examples > 0
                    ? std::min<int>(cfg.eval_max_examples,
                                    static_cast<int>(data.size()))
                    : static_cast<int>(data.size());
  if (n == 0) throw DataError("evaluation split " + split + " is empty");

  Model model = load_eval_model(cfg, run, corpus.vocab.size());
  const int beam = cfg.eval_beam > 0 ? cfg.eval_beam : model.config().beam;
  const int max_k = *std::max_element(k_values.begin(), k_values.end());

  // Draw the largest candidate set once; smaller K reuse its prefixes, which
  // is what makes the sweep nested rather than resampled.
  auto cands = generate_split(model, model.config(), corpus.vocab, data, n,
                              max_k, beam, run.seed, cfg.eval_threads);

  std::map<int, MetricReport> out;
  std::vector<int> ks = k_values;
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  for (int k : ks) {
    std::vector<ExampleScores> scores(n);
    for (int i = 0; i < n; ++i) {
      CandidateSet prefix;
      const int kk = std::min<int>(k, static_cast<int>(cands[i].texts.size()));
      prefix.texts.assign(cands[i].texts.begin(), cands[i].texts.begin() + kk);
      prefix.scores.assign(cands[i].scores.begin(),
                           cands[i].scores.begin() + kk);
      scores[i] = score_example(prefix, data[i].target_tokens);
    }
    out[k] = report_from_scores(scores);
  }

  std::string csv = "k,metric,avg,best\n";
  for (const auto& [k, report] : out)
    for (const auto& name : metric_names()) {
      const OracleResult& r = report.values.at(name);
      csv += std::to_string(k) + "," + name + "," + format_double(r.avg, 6) +
             "," + format_double(r.best, 6) + "\n";
    }
  write_text_file(run.dir + "/sweep_" + split + ".csv", csv);
  return out;
}

namespace {

struct CsvRow {
  std::string model_kind;
  int loss_kind = 0;
  std::string type_label;
  uint64_t seed = 0;
  std::string metric;
  double avg = 0.0;
  double best = 0.0;
};

std::vector<CsvRow> read_metrics_csv(const std::string& path) {
  std::vector<CsvRow> rows;
  auto lines = read_lines(path);
  for (size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    auto cols = split(lines[i], ',');
    if (cols.size() != 7) throw DataError("bad metrics row in " + path);
    CsvRow r;
    r.model_kind = cols[0];
    r.loss_kind = parse_int("loss", cols[1]);
    r.type_label = cols[2];
    r.seed = static_cast<uint64_t>(parse_ll("seed", cols[3]));
    r.metric = cols[4];
    r.avg = parse_real("avg", cols[5]);
    r.best = parse_real("best", cols[6]);
    rows.push_back(std::move(r));
  }
  return rows;
}

struct RowKey {
  std::string model_kind;
  int loss_kind;
  std::string type_label;
  bool operator<(const RowKey& o) const {
    if (type_label != o.type_label) return type_label < o.type_label;
    if (model_kind != o.model_kind) return model_kind < o.model_kind;
    return loss_kind < o.loss_kind;
  }
};

std::string row_label(const RowKey& k) {
  if (k.model_kind == "baseline") return "baseline";
  if (k.model_kind == "vae") return "vae (" + k.type_label + ")";
  return "dvpg loss " + std::to_string(k.loss_kind) + " (" + k.type_label + ")";
}

std::string stat_cell(const SeedStats& s, int precision) {
  std::string out = format_double(s.mean, precision);
  if (s.std_dev) out += " ± " + format_double(*s.std_dev, precision);
  return out;
}

}  // namespace

void report_grid(const HarnessConfig& cfg) {
  require(!cfg.run_dir.empty(), "train.run_dir is required");
  namespace fs = std::filesystem;
  const std::string suffix =
      "eval_" + cfg.eval_split + "_K" + std::to_string(cfg.eval_samples) + ".csv";

  std::vector<CsvRow> rows;
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(cfg.run_dir)) {
    if (entry.is_regular_file() && entry.path().filename() == suffix)
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    auto file_rows = read_metrics_csv(f.string());
    rows.insert(rows.end(), file_rows.begin(), file_rows.end());
  }
  if (rows.empty())
    throw DataError("no " + suffix + " files under " + cfg.run_dir);

  // (row, metric) -> per-seed means, seeds ordered by seed id
  std::map<RowKey, std::map<std::string, std::map<uint64_t, OracleResult>>> by_row;
  for (const auto& r : rows)
    by_row[{r.model_kind, r.loss_kind, r.type_label}][r.metric][r.seed] = {
        r.avg, r.best};

  const std::string report_dir = cfg.run_dir + "/report";
  ensure_dir(report_dir);

  std::string csv =
      "model,loss,training_type,seeds,metric,avg_mean,avg_std,best_mean,best_std\n";
  // row -> metric -> (avg stats, best stats)
  std::map<RowKey, std::map<std::string, std::pair<SeedStats, SeedStats>>> stats;
  for (const auto& [key, metrics] : by_row) {
    for (const auto& name : metric_names()) {
      auto it = metrics.find(name);
      if (it == metrics.end()) continue;
      std::vector<double> avgs, bests;
      for (const auto& [seed, r] : it->second) {
        avgs.push_back(r.avg);
        bests.push_back(r.best);
      }
      SeedStats sa = aggregate_seeds(avgs);
      SeedStats sb = aggregate_seeds(bests);
      stats[key][name] = {sa, sb};
      csv += key.model_kind + "," + std::to_string(key.loss_kind) + "," +
             key.type_label + "," + std::to_string(sa.count) + "," + name +
             "," + format_double(sa.mean, 6) + "," +
             (sa.std_dev ? format_double(*sa.std_dev, 6) : "") + "," +
             format_double(sb.mean, 6) + "," +
             (sb.std_dev ? format_double(*sb.std_dev, 6) : "") + "\n";
    }
  }
  write_text_file(report_dir + "/aggregate.csv", csv);

  // Markdown: one table per aggregation (best of K, then average of K), a
  // row per configuration, argmax/argmin summary rows per metric.
  auto make_table = [&](bool use_best) {
    std::string md = "| configuration |";
    for (const auto& name : metric_names()) md += " " + name + " |";
    md += "\n|---|";
    for (size_t i = 0; i < metric_names().size(); ++i) md += "---|";
    md += "\n";
    for (const auto& [key, metrics] : stats) {
      md += "| " + row_label(key) + " |";
      for (const auto& name : metric_names()) {
        auto it = metrics.find(name);
        if (it == metrics.end()) {
          md += " |";
          continue;
        }
        const SeedStats& s = use_best ? it->second.second : it->second.first;
        md += " " + stat_cell(s, 2) + " |";
      }
      md += "\n";
    }
    // winner per metric, direction aware
    md += "| **winner** |";
    for (const auto& name : metric_names()) {
      const bool minimize = metric_direction(name) == MetricDirection::kMinimize;
      bool found = false;
      double best_v = 0.0;
      RowKey best_key;
      for (const auto& [key, metrics] : stats) {
        auto it = metrics.find(name);
        if (it == metrics.end()) continue;
        const double v =
            (use_best ? it->second.second : it->second.first).mean;
        if (!found || (minimize ? v < best_v : v > best_v)) {
          found = true;
          best_v = v;
          best_key = key;
        }
      }
      md += found ? " " + row_label(best_key) + " |" : " |";
    }
    md += "\n";
    return md;
  };

  std::string md = "# Evaluation summary\n\n";
  md += "Split: " + cfg.eval_split + ", K = " + std::to_string(cfg.eval_samples);
  md += ", mean ± std over seeds.\n\n";
  md += "## Best of K\n\n" + make_table(true);
  md += "\n## Average of K\n\n" + make_table(false);
  write_text_file(report_dir + "/tables.md", md);
}

void run_grid(const HarnessConfig& cfg) {
  for (const GridEntry& entry : grid_entries()) {
    HarnessConfig c = cfg;
    c.model_kind = entry.model_kind;
    c.loss_kind = entry.loss_kind == 0 ? 2 : entry.loss_kind;
    c.sampling = entry.sampling;
    c.schedule = entry.schedule;
    // grid entries pick these; stale explicit keys would only trigger the
    // baseline warning
    c.explicit_keys.erase("train.loss");
    c.explicit_keys.erase("model.sampling");
    c.explicit_keys.erase("train.schedule");
    std::cerr << "grid: " << experiment_name(c) << "\n";
    auto runs = run_experiment(c);
    for (const auto& run : runs)
      evaluate_run(c, run, c.eval_split, c.eval_samples);
  }
  report_grid(cfg);
}

}  // namespace dvpg
