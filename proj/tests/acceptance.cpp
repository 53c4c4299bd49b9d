// End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
// the binary exits nonzero if any fail. Tolerances are pinned here, next to
// the checks they gate. Everything is seeded, so a green run stays green.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dvpg/common.hpp"
#include "dvpg/corpus.hpp"
#include "dvpg/demo_data.hpp"
#include "dvpg/harness.hpp"
#include "dvpg/metrics.hpp"
#include "dvpg/model.hpp"
#include "dvpg/objective.hpp"
#include "dvpg/rng.hpp"
#include "dvpg/tape.hpp"

using namespace dvpg;

namespace {

const char* kRoot = "/tmp/dvpg_acceptance";

std::string root(const std::string& name) {
  return std::string(kRoot) + "/" + name;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string fmt(double v, int prec = 3) { return format_double(v, prec); }

// ---------------------------------------------------------------------------
// shared fixtures

struct Fixture {
  Vocabulary vocab;
  std::vector<EncodedPair> examples;
};

Fixture make_fixture() {
  std::vector<ParaphrasePair> pairs;
  pairs.push_back({{"how", "do", "i", "fix", "this"},
                   {"how", "can", "i", "fix", "this"},
                   1});
  pairs.push_back({{"where", "is", "the", "shop"},
                   {"where", "is", "the", "shop"},
                   0});
  pairs.push_back({{"buy", "zzz", "now"}, {"zzz", "is", "cheap"}, 1});
  Fixture f;
  f.vocab = Vocabulary::build(pairs, 50);
  for (const auto& p : pairs) f.examples.push_back(encode_pair(p, f.vocab));
  return f;
}

ModelConfig tiny_config(const Fixture& f, const std::string& kind,
                        const std::string& sampling = "independent") {
  ModelConfig c;
  c.kind = kind;
  c.sampling = sampling;
  c.vocab_size = f.vocab.size();
  c.hidden = 10;
  c.embed = 8;
  c.target_embed = 8;
  c.heads = 2;
  c.proj = 8;
  c.ff = 12;
  c.max_source_length = 14;
  c.max_decode = 8;
  c.beam = 3;
  return c;
}

bool bitwise_equal(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  if (a.size() == 0) return true;
  return (a - b).cwiseAbs().maxCoeff() == 0.0;
}

DiagonalGaussian random_gaussian(Rng& rng, int rows, int cols,
                                 double mean_range, double std_lo,
                                 double std_hi) {
  DiagonalGaussian g;
  g.mean = Mat(rows, cols);
  g.std = Mat(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      g.mean(i, j) = rng.uniform(-mean_range, mean_range);
      g.std(i, j) = rng.uniform(std_lo, std_hi);
    }
  return g;
}

// ---------------------------------------------------------------------------
// criterion 1: closed-form KL against a Monte Carlo estimate

double log_density_diff(const Mat& z, const DiagonalGaussian& q,
                        const DiagonalGaussian& p) {
  double total = 0.0;
  for (int j = 0; j < z.cols(); ++j) {
    double dq = (z(0, j) - q.mean(0, j)) / q.std(0, j);
    double dp = (z(0, j) - p.mean(0, j)) / p.std(0, j);
    total += std::log(p.std(0, j) / q.std(0, j)) + 0.5 * (dp * dp - dq * dq);
  }
  return total;
}

// E_q[log q - log p] with antithetic pairs: each epsilon is used twice, once
// negated, which cancels the odd-order terms of the integrand.
double mc_kl(const DiagonalGaussian& q, const DiagonalGaussian& p, int draws,
             Rng& rng) {
  const int cols = static_cast<int>(q.mean.cols());
  double total = 0.0;
  Mat zp(1, cols), zm(1, cols);
  for (int d = 0; d < draws / 2; ++d) {
    for (int j = 0; j < cols; ++j) {
      double e = rng.normal();
      zp(0, j) = q.mean(0, j) + q.std(0, j) * e;
      zm(0, j) = q.mean(0, j) - q.std(0, j) * e;
    }
    total += log_density_diff(zp, q, p) + log_density_diff(zm, q, p);
  }
  return total / (2.0 * (draws / 2));
}

bool criterion_mc_kl(std::string& detail) {
  constexpr int kDim = 8;
  constexpr int kPairs = 20;
  constexpr int kDraws = 100000;
  constexpr double kTol = 0.02;
  constexpr double kBudgetSeconds = 10.0;

  auto t0 = std::chrono::steady_clock::now();
  Rng rng(20260822);
  double worst = 0.0;
  for (int i = 0; i < kPairs; ++i) {
    DiagonalGaussian q = random_gaussian(rng, 1, kDim, 1.0, 0.7, 1.3);
    DiagonalGaussian p = random_gaussian(rng, 1, kDim, 1.0, 0.7, 1.3);
    double exact = gaussian_kl(q, p);
    double approx = mc_kl(q, p, kDraws, rng);
    worst = std::max(worst, std::abs(exact - approx));
  }
  double elapsed = seconds_since(t0);
  detail = "max |closed - mc| = " + fmt(worst, 5) + " over " +
           std::to_string(kPairs) + " pairs, " + fmt(elapsed, 1) + "s";
  return worst < kTol && elapsed < kBudgetSeconds;
}

// ---------------------------------------------------------------------------
// criterion 2: algebraic identities between the loss variants

bool criterion_loss_identities(std::string& detail) {
  constexpr int kTrials = 100;
  Rng rng(77);
  int exact = 0;
  for (int i = 0; i < kTrials; ++i) {
    int rows = 1 + static_cast<int>(rng.next_below(3));
    int cols = 1 + static_cast<int>(rng.next_below(8));
    DiagonalGaussian q = random_gaussian(rng, rows, cols, 2.0, 0.3, 2.0);
    DiagonalGaussian p = random_gaussian(rng, rows, cols, 2.0, 0.3, 2.0);
    DiagonalGaussian std_normal = DiagonalGaussian::standard(rows, cols);
    bool ok = kl_loss_1(q) == 2.0 * kl_standard(q);
    ok = ok && kl_loss_3(q, p) ==
                   kl_loss_2(q, p) + kl_standard(q) + kl_standard(p);
    ok = ok && kl_loss_2(q, std_normal) == kl_standard(q);
    if (ok) ++exact;
  }
  detail = std::to_string(exact) + "/" + std::to_string(kTrials) +
           " random configurations exact";
  return exact == kTrials;
}

// ---------------------------------------------------------------------------
// criterion 3: analytic gradients against central differences

using BuildFn = std::function<Expr(Tape&, const std::vector<Expr>&)>;

double eval_at(const BuildFn& f, const std::vector<Mat>& vals) {
  Tape t;
  std::vector<Expr> xs;
  xs.reserve(vals.size());
  for (const auto& m : vals) xs.push_back(t.constant(m));
  return f(t, xs).value()(0, 0);
}

double max_rel_grad_err(const BuildFn& f, const std::vector<Mat>& vals,
                        double step) {
  Tape t;
  std::vector<Expr> xs;
  xs.reserve(vals.size());
  for (const auto& m : vals) xs.push_back(t.leaf(m));
  Expr rootx = f(t, xs);
  t.backward(rootx);
  double worst = 0.0;
  for (size_t k = 0; k < vals.size(); ++k) {
    Mat ana = t.has_grad(xs[k].id)
                  ? t.grad(xs[k].id)
                  : Mat(Mat::Zero(vals[k].rows(), vals[k].cols()));
    for (int i = 0; i < vals[k].rows(); ++i)
      for (int j = 0; j < vals[k].cols(); ++j) {
        std::vector<Mat> plus = vals, minus = vals;
        plus[k](i, j) += step;
        minus[k](i, j) -= step;
        double num = (eval_at(f, plus) - eval_at(f, minus)) / (2.0 * step);
        double rel = std::abs(num - ana(i, j)) /
                     std::max({1.0, std::abs(num), std::abs(ana(i, j))});
        worst = std::max(worst, rel);
      }
  }
  return worst;
}

Mat random_mat(Rng& rng, int rows, int cols, double lo, double hi) {
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

bool criterion_gradients(std::string& detail) {
  constexpr int kTrials = 10;
  constexpr double kStep = 1e-4;
  constexpr double kTol = 1e-3;

  BuildFn kl_fn = [](Tape& t, const std::vector<Expr>& xs) {
    GaussianExpr q{xs[0], xs[1]};
    GaussianExpr p{xs[2], xs[3]};
    return gaussian_kl(t, q, p);
  };
  // z = mu + exp(0.5 lv) * eps, loss = sum(z^2) + KL(q || standard)
  BuildFn reparam_fn = [](Tape& t, const std::vector<Expr>& xs) {
    Expr std_dev = t.exp_(t.scale(xs[1], 0.5));
    Expr z = t.add(xs[0], t.cmul(std_dev, xs[2]));
    GaussianExpr q{xs[0], xs[1]};
    return t.add(t.sum_all(t.cmul(z, z)), kl_standard(t, q));
  };

  Rng rng(4242);
  double worst_kl = 0.0, worst_rp = 0.0;
  for (int i = 0; i < kTrials; ++i) {
    int rows = 1 + static_cast<int>(rng.next_below(2));
    int cols = 2 + static_cast<int>(rng.next_below(5));
    std::vector<Mat> kl_vals = {random_mat(rng, rows, cols, -1.0, 1.0),
                                random_mat(rng, rows, cols, -1.0, 1.0),
                                random_mat(rng, rows, cols, -1.0, 1.0),
                                random_mat(rng, rows, cols, -1.0, 1.0)};
    worst_kl = std::max(worst_kl, max_rel_grad_err(kl_fn, kl_vals, kStep));

    std::vector<Mat> rp_vals = {random_mat(rng, 1, cols, -1.0, 1.0),
                                random_mat(rng, 1, cols, -1.0, 1.0),
                                random_mat(rng, 1, cols, -1.5, 1.5)};
    worst_rp = std::max(worst_rp, max_rel_grad_err(reparam_fn, rp_vals, kStep));
  }
  detail = "max rel err: kl " + fmt(worst_kl, 6) + ", reparam " +
           fmt(worst_rp, 6) + " over " + std::to_string(kTrials) +
           " configurations each";
  return worst_kl < kTol && worst_rp < kTol;
}

// ---------------------------------------------------------------------------
// criterion 4: latent sample geometry

bool criterion_latent_geometry(std::string& detail) {
  Fixture f = make_fixture();
  int checks = 0;
  for (const std::string& sampling : {"independent", "aggregated"}) {
    Model m(tiny_config(f, "dvpg", sampling), 7);
    for (const EncodedPair& ex : f.examples) {
      const int d = static_cast<int>(ex.source_ids.size());
      const int zrows = sampling == "independent" ? d : 1;
      Tape t;
      auto b = m.bind(t, false);
      EncoderStates enc = m.encode(b, ex);
      GaussianExpr q = m.posterior_params(b, enc, ex.label);
      if (q.mean.rows() != zrows || q.mean.cols() != 10) return false;

      Mat zero = Mat::Zero(zrows, 10);
      LatentSample z0 = m.sample_z(b, q, zero);
      if (z0.values.rows() != zrows || z0.values.cols() != 10) return false;
      if (!bitwise_equal(z0.values.value(), q.mean.value())) return false;

      Rng rng(91 + checks);
      Mat eps = m.draw_noise(d, rng);
      LatentSample z = m.sample_z(b, q, eps);
      Expr combined = m.combine(b, enc, z);
      if (combined.rows() != d || combined.cols() != 10) return false;
      Mat expected =
          sampling == "aggregated"
              ? Mat(enc.states.value() + z.values.value().replicate(d, 1))
              : Mat(enc.states.value() + z.values.value());
      if (!bitwise_equal(combined.value(), expected)) return false;
      ++checks;
    }
  }
  detail = std::to_string(checks) +
           " example/sampling combinations: shapes, zero-noise mean "
           "recovery, additive combine all exact";
  return checks == 6;
}

// ---------------------------------------------------------------------------
// criterion 5: annealing schedule and latent bypass

bool criterion_schedule(std::string& detail) {
  ScheduleState anneal;
  anneal.kind = ScheduleKind::kAnnealOnly;
  anneal.anneal_length = 10;
  double prev = -1.0;
  for (long long s = 0; s <= 25; ++s) {
    anneal.step = s;
    if (latent_bypassed(anneal)) return false;
    double c = anneal_coefficient(anneal);
    if (c < prev) return false;
    prev = c;
  }
  anneal.step = 0;
  if (anneal_coefficient(anneal) != 0.0) return false;
  anneal.step = 10;
  if (anneal_coefficient(anneal) != 1.0) return false;

  ScheduleState two;
  two.kind = ScheduleKind::kTwoStep;
  two.two_step_boundary = 7;
  two.anneal_length = 5;
  prev = -1.0;
  for (long long s = 0; s <= 20; ++s) {
    two.step = s;
    bool bypass = latent_bypassed(two);
    if (bypass != (s < 7)) return false;
    double c = anneal_coefficient(two);
    if (s <= 7 && c != 0.0) return false;
    if (c < prev) return false;
    prev = c;
  }
  two.step = 12;
  if (anneal_coefficient(two) != 1.0) return false;

  ScheduleState step_fn = two;
  step_fn.anneal_length = 0;
  step_fn.step = 6;
  if (anneal_coefficient(step_fn) != 0.0) return false;
  step_fn.step = 7;
  if (anneal_coefficient(step_fn) != 1.0) return false;

  LossBreakdown bypassed = make_breakdown(3.5, std::nullopt, 0.25);
  if (bypassed.kl.has_value() || bypassed.total != 3.5) return false;
  LossBreakdown active = make_breakdown(3.5, 2.0, 0.25);
  if (!active.kl.has_value() || active.total != 3.5 + 0.25 * 2.0) return false;

  Fixture f = make_fixture();
  Model m(tiny_config(f, "dvpg"), 11);
  const EncodedPair& ex = f.examples[0];
  Rng rng(5);
  Mat eps = m.draw_noise(static_cast<int>(ex.source_ids.size()), rng);
  {
    Tape t;
    auto b = m.bind(t, false);
    auto loss = m.example_loss(b, ex, 2, true, 0.0, eps);
    if (loss.kl.has_value()) return false;
  }
  {
    Tape t;
    auto b = m.bind(t, false);
    auto loss = m.example_loss(b, ex, 2, false, 0.5, eps);
    if (!loss.kl.has_value()) return false;
  }
  Model base(tiny_config(f, "baseline"), 11);
  {
    Tape t;
    auto b = base.bind(t, false);
    auto loss = base.example_loss(b, ex, 2, false, 0.5, eps);
    if (!loss.kl.has_value() || *loss.kl != 0.0) return false;
  }

  detail =
      "coefficient 0 at start, reaches exactly 1, non-decreasing; latent "
      "bypassed only before the boundary; breakdown kl absent/zero as "
      "appropriate";
  return true;
}

// ---------------------------------------------------------------------------
// criterion 6: decoder distributions and search consistency

bool criterion_decoder(std::string& detail) {
  Fixture f = make_fixture();
  constexpr double kSumTol = 1e-6;

  int dist_rows = 0;
  for (const std::string& kind : {"baseline", "dvpg"}) {
    Model m(tiny_config(f, kind), 13);
    for (const EncodedPair& ex : f.examples) {
      Tape t;
      auto b = m.bind(t, false);
      Mat eps;
      const Mat* eps_ptr = nullptr;
      if (kind != "baseline") {
        Rng rng(17);
        eps = m.draw_noise(static_cast<int>(ex.source_ids.size()), rng);
        eps_ptr = &eps;
      }
      Expr states = m.generation_states(b, ex, eps_ptr);
      auto dists = m.decode_teacher_forced(b, states, ex.target_input,
                                           ex.copy_targets, ex.ext_size);
      if (dists.size() != ex.target_gold.size()) return false;
      for (const Expr& dist : dists) {
        if (dist.cols() != ex.ext_size) return false;
        if (std::abs(dist.value().sum() - 1.0) > kSumTol) return false;
        if (dist.value().minCoeff() < 0.0) return false;
        ++dist_rows;
      }
    }
  }

  int agree = 0;
  constexpr int kTrials = 50;
  for (int i = 0; i < kTrials; ++i) {
    const std::string kind = i % 2 == 0 ? "baseline" : "dvpg";
    Model m(tiny_config(f, kind), 13);
    const EncodedPair& ex = f.examples[(i / 2) % f.examples.size()];
    Tape t;
    auto b = m.bind(t, false);
    Mat eps;
    const Mat* eps_ptr = nullptr;
    if (kind != "baseline") {
      Rng rng(1000 + i);
      eps = m.draw_noise(static_cast<int>(ex.source_ids.size()), rng);
      eps_ptr = &eps;
    }
    Expr states = m.generation_states(b, ex, eps_ptr);
    GenerationSet beam = m.beam_search(b, states, ex, 1, m.config().max_decode);
    std::vector<int> greedy =
        m.greedy_decode(b, states, ex, m.config().max_decode);
    if (!beam.candidates.empty() && beam.candidates[0] == greedy) ++agree;
  }
  detail = std::to_string(dist_rows) + " distributions normalized within " +
           fmt(kSumTol, 7) + "; beam width 1 matched greedy in " +
           std::to_string(agree) + "/" + std::to_string(kTrials) + " draws";
  return agree == kTrials;
}

// ---------------------------------------------------------------------------
// criterion 7: metric reference values

Tokens words(const std::string& s) {
  Tokens out;
  std::string cur;
  for (char ch : s) {
    if (ch == ' ') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

bool criterion_metric_goldens(std::string& detail) {
  constexpr double kEps = 1e-9;
  auto close = [&](double a, double b) { return std::abs(a - b) < kEps; };

  bool ok = true;
  ok = ok && close(bleu4(words("the cat sat on the mat"),
                         words("the cat is on the mat")).value,
                   4.518010018049223);
  ok = ok && close(bleu4(words("a b"), words("c d")).value,
                   0.0070710678118654875);
  ok = ok && close(bleu4(words("the cat sat"), words("the cat sat on")).value,
                   100.0 * std::exp(1.0 - 4.0 / 3.0));
  ok = ok && close(ter(words("the cat sat on mats"),
                       words("the cat sat on mat")).value,
                   20.0);
  ok = ok && close(ter(words("b c a"), words("a b c")).value, 100.0 / 3.0);
  ok = ok && close(ter(words("b c a"), words("a b c"), false).value,
                   200.0 / 3.0);
  ok = ok && close(ter({}, words("a b c")).value, 100.0);
  ok = ok && close(rouge_n(words("the cat sat"), words("the cat ate"), 1).value,
                   66.66666666666666);
  ok = ok && close(rouge_n(words("the cat"), words("the cat ate"), 1, true).value,
                   100.0 * 2.0 / 3.0);
  ok = ok && close(rouge_n(words("the the the"), words("the cat ate"), 1, true).value,
                   100.0 / 3.0);

  // identities must be exact, not just close
  Tokens sent = words("how do i fix this thing");
  ok = ok && bleu4(sent, sent).value == 100.0;
  ok = ok && ter(sent, sent).value == 0.0;
  for (int n = 1; n <= 3; ++n) ok = ok && rouge_n(sent, sent, n).value == 100.0;
  ok = ok && bleu4(words("a"), words("a")).value == 100.0;

  detail = "10 frozen reference values within 1e-9; identity scores exact";
  return ok;
}

// ---------------------------------------------------------------------------
// criterion 8: best-of-k aggregation properties

bool criterion_oracle(std::string& detail) {
  constexpr int kTrials = 200;
  Rng rng(333);
  for (int i = 0; i < kTrials; ++i) {
    int k = 1 + static_cast<int>(rng.next_below(12));
    std::vector<double> scores;
    for (int j = 0; j < k; ++j) scores.push_back(rng.uniform(0.0, 100.0));

    for (MetricDirection dir :
         {MetricDirection::kMaximize, MetricDirection::kMinimize}) {
      OracleResult r = oracle_aggregate(scores, dir);
      if (dir == MetricDirection::kMaximize && r.best < r.avg) return false;
      if (dir == MetricDirection::kMinimize && r.best > r.avg) return false;

      double prev_best = dir == MetricDirection::kMaximize ? -1.0 : 1e9;
      for (int kk = 1; kk <= k; ++kk) {
        std::vector<double> prefix(scores.begin(), scores.begin() + kk);
        OracleResult rp = oracle_aggregate(prefix, dir);
        if (dir == MetricDirection::kMaximize && rp.best < prev_best)
          return false;
        if (dir == MetricDirection::kMinimize && rp.best > prev_best)
          return false;
        prev_best = rp.best;
      }
    }
  }
  detail = std::to_string(kTrials) +
           " random candidate sets: best dominates average and is monotone "
           "over nested prefixes, both directions";
  return true;
}

// ---------------------------------------------------------------------------
// criterion 9: toy corpus overfit

// All 32 toy pairs encoded into every split, so train-split evaluation
// measures pure memorization capacity.
void build_overfit_corpus(const std::string& dir) {
  const std::string tsv = root("toy.tsv");
  write_demo_corpus(tsv, "toy");
  LoadResult loaded = load_quora_tsv(tsv);
  Tokenizer tok;
  std::vector<ParaphrasePair> pairs;
  for (const RawPair& raw : loaded.pairs) {
    ParaphrasePair p;
    p.original = tok.tokenize(raw.original);
    p.paraphrase = tok.tokenize(raw.paraphrase);
    p.label = raw.label;
    pairs.push_back(p);
  }
  pairs = filter_by_length(pairs, 14);
  pairs = deduplicate(pairs);
  Vocabulary vocab = Vocabulary::build(pairs, 100);
  std::vector<EncodedPair> enc;
  for (const auto& p : pairs) enc.push_back(encode_pair(p, vocab));
  ensure_dir(dir);
  vocab.save(dir + "/vocab.json");
  write_encoded_jsonl(dir + "/train.jsonl", enc);
  write_encoded_jsonl(dir + "/dev.jsonl", enc);
  write_encoded_jsonl(dir + "/test.jsonl", enc);
}

HarnessConfig overfit_config(const std::string& run_dir) {
  HarnessConfig cfg;
  cfg.data_dir = root("toy_corpus");
  cfg.run_dir = root(run_dir);
  cfg.seeds = {1};
  cfg.epochs = 300;
  cfg.batch_size = 8;
  cfg.lr = 0.003;
  cfg.dev_samples = 2;
  cfg.dev_max_examples = 8;
  cfg.eval_split = "train";
  return cfg;
}

bool criterion_overfit(std::string& detail) {
  constexpr double kBaselineMin = 95.0;
  constexpr double kVariationalMin = 90.0;
  constexpr double kBudgetSeconds = 300.0;

  auto t0 = std::chrono::steady_clock::now();
  build_overfit_corpus(root("toy_corpus"));

  HarnessConfig base_cfg = overfit_config("toy_runs");
  base_cfg.model_kind = "baseline";
  auto base_runs = run_experiment(base_cfg);
  MetricReport base_rep = evaluate_run(base_cfg, base_runs[0], "train", 1);
  double base_bleu = base_rep.values.at("BLEU").best;

  HarnessConfig var_cfg = overfit_config("toy_runs");
  var_cfg.model_kind = "dvpg";
  var_cfg.loss_kind = 1;
  var_cfg.sampling = "independent";
  var_cfg.schedule = "anneal-only";
  auto var_runs = run_experiment(var_cfg);
  MetricReport var_rep = evaluate_run(var_cfg, var_runs[0], "train", 10);
  double var_bleu = var_rep.values.at("BLEU").best;

  double elapsed = seconds_since(t0);
  detail = "baseline best bleu " + fmt(base_bleu, 2) +
           " (floor 95), variational best bleu at 10 samples " +
           fmt(var_bleu, 2) + " (floor 90), " + fmt(elapsed, 1) + "s";
  return base_bleu >= kBaselineMin && var_bleu >= kVariationalMin &&
         elapsed < kBudgetSeconds;
}

// ---------------------------------------------------------------------------
// criteria 10 and 11: sampling diversity on the synthetic desk corpus

HarnessConfig desk_config() {
  HarnessConfig cfg;
  cfg.data_input = root("desk.tsv");
  cfg.data_dir = root("desk_corpus");
  cfg.vocab_limit = 52;
  cfg.subsample_train = 2000;
  cfg.run_dir = root("desk_runs");
  cfg.seeds = {1, 2, 3};
  cfg.epochs = 8;
  cfg.batch_size = 16;
  cfg.lr = 0.003;
  cfg.dev_samples = 4;
  cfg.dev_max_examples = 64;
  cfg.eval_split = "test";
  cfg.eval_samples = 10;
  cfg.eval_max_examples = 150;
  return cfg;
}

struct DiversityOutcome {
  std::vector<RunManifest> variational_runs;
  bool ok = false;
  std::string detail;
};

DiversityOutcome run_diversity_experiment() {
  DiversityOutcome out;
  constexpr int kSamples = 10;

  HarnessConfig cfg = desk_config();
  if (!file_exists(cfg.data_dir + "/vocab.json")) {
    write_demo_corpus(cfg.data_input, "desk");
    prepare_data(cfg);
  }

  HarnessConfig base_cfg = cfg;
  base_cfg.model_kind = "baseline";
  auto base_runs = run_experiment(base_cfg);

  HarnessConfig var_cfg = cfg;
  var_cfg.model_kind = "dvpg";
  var_cfg.loss_kind = 2;
  var_cfg.sampling = "aggregated";
  var_cfg.schedule = "two-step";
  out.variational_runs = run_experiment(var_cfg);

  std::vector<double> margins;
  for (size_t i = 0; i < cfg.seeds.size(); ++i) {
    MetricReport b = evaluate_run(base_cfg, base_runs[i], "test", kSamples);
    MetricReport v =
        evaluate_run(var_cfg, out.variational_runs[i], "test", kSamples);
    margins.push_back(v.values.at("BLEU").best - b.values.at("BLEU").best);
  }
  SeedStats stats = aggregate_seeds(margins);
  out.ok = stats.mean > 0.0;
  out.detail = "best bleu margin at " + std::to_string(kSamples) +
               " samples, mean over " + std::to_string(margins.size()) +
               " seeds: " + fmt(stats.mean, 2) + " (per seed";
  for (double m : margins) out.detail += " " + fmt(m, 2);
  out.detail += ")";
  return out;
}

bool criterion_sweep(const DiversityOutcome& diversity, std::string& detail) {
  HarnessConfig cfg = desk_config();
  cfg.model_kind = "dvpg";
  cfg.loss_kind = 2;
  cfg.sampling = "aggregated";
  cfg.schedule = "two-step";
  cfg.eval_max_examples = 100;

  const std::vector<int> ks = {1, 5, 10, 20};
  auto reports = sweep_run(cfg, diversity.variational_runs[0], ks);

  for (const std::string& name : metric_names()) {
    MetricDirection dir = metric_direction(name);
    double prev = dir == MetricDirection::kMaximize ? -1.0 : 1e9;
    for (int k : ks) {
      double best = reports.at(k).values.at(name).best;
      if (dir == MetricDirection::kMaximize && best < prev) return false;
      if (dir == MetricDirection::kMinimize && best > prev) return false;
      prev = best;
    }
  }

  double b1 = reports.at(1).values.at("BLEU").best;
  double b10 = reports.at(10).values.at("BLEU").best;
  double b20 = reports.at(20).values.at("BLEU").best;
  double early_gain = b10 - b1;
  double late_gain = b20 - b10;
  detail = "best bleu " + fmt(b1, 2) + " / " + fmt(b10, 2) + " / " +
           fmt(b20, 2) + " at 1/10/20 samples; gain 1->10 " +
           fmt(early_gain, 2) + " vs 10->20 " + fmt(late_gain, 2);
  return late_gain < early_gain;
}

// ---------------------------------------------------------------------------
// criterion 12: byte-identical reports across repeated grid runs

HarnessConfig micro_grid_config(const std::string& run_dir) {
  HarnessConfig cfg;
  cfg.data_input = root("toy.tsv");
  cfg.data_dir = root("micro_corpus");
  cfg.vocab_limit = 100;
  cfg.run_dir = root(run_dir);
  cfg.seeds = {1};
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.lr = 0.003;
  cfg.dev_samples = 2;
  cfg.dev_max_examples = 4;
  cfg.eval_split = "test";
  cfg.eval_samples = 2;
  return cfg;
}

bool criterion_determinism(std::string& detail) {
  namespace fs = std::filesystem;

  HarnessConfig cfg_a = micro_grid_config("grid_a");
  if (!file_exists(cfg_a.data_dir + "/vocab.json")) {
    write_demo_corpus(cfg_a.data_input, "toy");
    prepare_data(cfg_a);
  }
  run_grid(cfg_a);
  HarnessConfig cfg_b = micro_grid_config("grid_b");
  run_grid(cfg_b);

  const std::vector<std::string> tracked = {"eval_test_K2.csv",
                                            "aggregate.csv", "tables.md"};
  int compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(cfg_a.run_dir)) {
    if (!entry.is_regular_file()) continue;
    std::string name = entry.path().filename().string();
    if (std::find(tracked.begin(), tracked.end(), name) == tracked.end())
      continue;
    std::string rel = fs::relative(entry.path(), cfg_a.run_dir).string();
    std::string other = cfg_b.run_dir + "/" + rel;
    if (!file_exists(other)) return false;
    if (read_text_file(entry.path().string()) != read_text_file(other))
      return false;
    ++compared;
  }
  detail = std::to_string(compared) +
           " metric/report files byte-identical across two grid invocations";
  // 17 per-run eval CSVs plus aggregate.csv and tables.md
  return compared == 19;
}

// ---------------------------------------------------------------------------

int failures = 0;

void run_criterion(int index, const std::string& label,
                   const std::function<bool(std::string&)>& fn) {
  std::string detail;
  bool ok = false;
  try {
    ok = fn(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  std::printf("[%s] %02d %s%s%s\n", ok ? "PASS" : "FAIL", index, label.c_str(),
              detail.empty() ? "" : ": ", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

}  // namespace

int main() {
  std::filesystem::remove_all(kRoot);
  ensure_dir(kRoot);

  run_criterion(1, "closed-form kl matches monte carlo", criterion_mc_kl);
  run_criterion(2, "loss variants satisfy algebraic identities",
                criterion_loss_identities);
  run_criterion(3, "analytic gradients match finite differences",
                criterion_gradients);
  run_criterion(4, "latent sample geometry", criterion_latent_geometry);
  run_criterion(5, "annealing schedule and latent bypass", criterion_schedule);
  run_criterion(6, "decoder distributions and search consistency",
                criterion_decoder);
  run_criterion(7, "metric reference values", criterion_metric_goldens);
  run_criterion(8, "best-of-k aggregation properties", criterion_oracle);
  run_criterion(9, "toy corpus overfit", criterion_overfit);

  DiversityOutcome diversity;
  run_criterion(10, "sampling diversity beats deterministic baseline",
                [&](std::string& d) {
                  diversity = run_diversity_experiment();
                  d = diversity.detail;
                  return diversity.ok;
                });
  run_criterion(11, "sample-count sweep monotone with diminishing gains",
                [&](std::string& d) {
                  if (diversity.variational_runs.empty()) {
                    d = "skipped: no trained runs from the previous criterion";
                    return false;
                  }
                  return criterion_sweep(diversity, d);
                });
  run_criterion(12, "repeated grid runs byte-identical",
                criterion_determinism);

  if (failures == 0) {
    std::printf("all 12 acceptance criteria passed\n");
    return 0;
  }
  std::printf("%d acceptance criteria failed\n", failures);
  return 1;
}
