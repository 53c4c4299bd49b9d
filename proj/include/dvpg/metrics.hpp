#pragma once

#include <optional>
#include <string>
#include <vector>

namespace dvpg {

enum class MetricDirection { kMaximize, kMinimize };

struct MetricValue {
  std::string name;
  double value = 0.0;
  MetricDirection direction = MetricDirection::kMaximize;
  // Set when the input made the metric undefined (reference shorter than n).
  bool degenerate = false;
};

using Tokens = std::vector<std::string>;

// Sentence BLEU-4 on the 0-100 scale. N-gram orders the candidate is too
// short to produce are dropped from the geometric mean (so identity stays
// 100 for short sentences); orders with zero matches get an epsilon
// numerator so disjoint pairs score > 0 but < 1.
MetricValue bleu4(const Tokens& candidate, const Tokens& reference);

// Translation edit rate: (edits + block shifts) / reference length * 100.
// Shift search is greedy over blocks that occur verbatim in the reference,
// each shift costing 1 and required to strictly reduce the edit distance.
// allow_shifts=false gives plain word edit distance for cross-checking.
MetricValue ter(const Tokens& candidate, const Tokens& reference,
                bool allow_shifts = true);

// ROUGE-N with clipped counts; F1 by default, recall-only by flag.
MetricValue rouge_n(const Tokens& candidate, const Tokens& reference, int n,
                    bool recall_only = false);

struct MetricOptions {
  bool ter_shifts = true;
  bool rouge_recall_only = false;
};

// Canonical metric order used by every report.
const std::vector<std::string>& metric_names();
MetricDirection metric_direction(const std::string& name);
MetricValue compute_metric(const std::string& name, const Tokens& candidate,
                           const Tokens& reference, const MetricOptions& opts);

int word_edit_distance(const Tokens& a, const Tokens& b);

struct OracleResult {
  double avg = 0.0;
  double best = 0.0;
};

// Avg = arithmetic mean over the K candidates' scores; Best = max for
// maximize metrics, min for TER.
OracleResult oracle_aggregate(const std::vector<double>& candidate_scores,
                              MetricDirection direction);

struct SeedStats {
  double mean = 0.0;
  std::optional<double> std_dev;  // absent for a single seed
  int count = 0;
};

SeedStats aggregate_seeds(const std::vector<double>& per_seed_means);

}  // namespace dvpg
