#include "dvpg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace dvpg {

namespace {

constexpr double kBleuEps = 1e-4;

std::map<std::vector<std::string>, int> ngram_counts(const Tokens& toks, int n) {
  std::map<std::vector<std::string>, int> counts;
  if (static_cast<int>(toks.size()) < n) return counts;
  for (size_t i = 0; i + n <= toks.size(); ++i)
    ++counts[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)];
  return counts;
}

int clipped_overlap(const std::map<std::vector<std::string>, int>& cand,
                    const std::map<std::vector<std::string>, int>& ref) {
  int total = 0;
  for (const auto& [gram, c] : cand) {
    auto it = ref.find(gram);
    if (it != ref.end()) total += std::min(c, it->second);
  }
  return total;
}

bool contains_block(const Tokens& ref, const Tokens& seq, size_t start,
                    size_t len) {
  if (len > ref.size()) return false;
  for (size_t r = 0; r + len <= ref.size(); ++r) {
    bool ok = true;
    for (size_t k = 0; k < len; ++k) {
      if (ref[r + k] != seq[start + k]) {
        ok = false;
        break;
      }
    }
    if (ok) return true;
  }
  return false;
}

Tokens move_block(const Tokens& seq, size_t i, size_t len, size_t j) {
  Tokens rest;
  rest.reserve(seq.size() - len);
  rest.insert(rest.end(), seq.begin(), seq.begin() + i);
  rest.insert(rest.end(), seq.begin() + i + len, seq.end());
  Tokens out;
  out.reserve(seq.size());
  out.insert(out.end(), rest.begin(), rest.begin() + j);
  out.insert(out.end(), seq.begin() + i, seq.begin() + i + len);
  out.insert(out.end(), rest.begin() + j, rest.end());
  return out;
}

}  // namespace

int word_edit_distance(const Tokens& a, const Tokens& b) {
  size_t n = a.size(), m = b.size();
  std::vector<int> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= m; ++j) {
      int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

MetricValue bleu4(const Tokens& candidate, const Tokens& reference) {
  if (candidate.empty() || reference.empty())
    throw std::runtime_error("bleu4: empty input sequence");
  double log_sum = 0.0;
  int used_orders = 0;
  for (int n = 1; n <= 4; ++n) {
    int denom = static_cast<int>(candidate.size()) - n + 1;
    if (denom <= 0) continue;
    auto cc = ngram_counts(candidate, n);
    auto rc = ngram_counts(reference, n);
    double matches = static_cast<double>(clipped_overlap(cc, rc));
    if (matches == 0.0) matches = kBleuEps;
    log_sum += std::log(matches / static_cast<double>(denom));
    ++used_orders;
  }
  double geo = std::exp(log_sum / static_cast<double>(used_orders));
  double bp = 1.0;
  if (candidate.size() < reference.size())
    bp = std::exp(1.0 - static_cast<double>(reference.size()) /
                            static_cast<double>(candidate.size()));
  return {"BLEU", 100.0 * bp * geo, MetricDirection::kMaximize, false};
}

MetricValue ter(const Tokens& candidate, const Tokens& reference,
                bool allow_shifts) {
  if (reference.empty()) throw std::runtime_error("ter: empty reference");
  Tokens cur = candidate;
  int shifts = 0;
  if (allow_shifts) {
    while (true) {
      int base = word_edit_distance(cur, reference);
      if (base == 0) break;
      int best = base;
      Tokens best_seq;
      for (size_t i = 0; i < cur.size(); ++i) {
        for (size_t len = cur.size() - i; len >= 1; --len) {
          if (!contains_block(reference, cur, i, len)) continue;
          for (size_t j = 0; j + len <= cur.size(); ++j) {
            if (j == i) continue;
            Tokens moved = move_block(cur, i, len, j);
            int d = word_edit_distance(moved, reference);
            if (d < best) {
              best = d;
              best_seq = std::move(moved);
            }
          }
        }
      }
      if (best < base) {
        cur = std::move(best_seq);
        ++shifts;
      } else {
        break;
      }
    }
  }
  int edits = word_edit_distance(cur, reference) + shifts;
  double value =
      100.0 * static_cast<double>(edits) / static_cast<double>(reference.size());
  return {"TER", value, MetricDirection::kMinimize, false};
}

MetricValue rouge_n(const Tokens& candidate, const Tokens& reference, int n,
                    bool recall_only) {
  if (n < 1) throw std::runtime_error("rouge_n: n must be >= 1");
  std::string name = "ROUGE-" + std::to_string(n);
  if (static_cast<int>(reference.size()) < n)
    return {name, 0.0, MetricDirection::kMaximize, true};
  auto cc = ngram_counts(candidate, n);
  auto rc = ngram_counts(reference, n);
  double overlap = static_cast<double>(clipped_overlap(cc, rc));
  double ref_total = static_cast<double>(reference.size() - n + 1);
  double recall = overlap / ref_total;
  if (recall_only)
    return {name, 100.0 * recall, MetricDirection::kMaximize, false};
  double cand_total =
      static_cast<double>(std::max<int>(0, static_cast<int>(candidate.size()) - n + 1));
  if (cand_total == 0.0 || overlap == 0.0)
    return {name, 0.0, MetricDirection::kMaximize, false};
  double precision = overlap / cand_total;
  double f1 = 2.0 * precision * recall / (precision + recall);
  return {name, 100.0 * f1, MetricDirection::kMaximize, false};
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> kNames = {"BLEU", "ROUGE-1", "ROUGE-2",
                                                  "ROUGE-3", "TER"};
  return kNames;
}

MetricDirection metric_direction(const std::string& name) {
  if (name == "TER") return MetricDirection::kMinimize;
  const auto& names = metric_names();
  if (std::find(names.begin(), names.end(), name) == names.end())
    throw std::runtime_error("unknown metric: " + name);
  return MetricDirection::kMaximize;
}

MetricValue compute_metric(const std::string& name, const Tokens& candidate,
                           const Tokens& reference, const MetricOptions& opts) {
  if (name == "BLEU") return bleu4(candidate, reference);
  if (name == "TER") return ter(candidate, reference, opts.ter_shifts);
  if (name == "ROUGE-1") return rouge_n(candidate, reference, 1, opts.rouge_recall_only);
  if (name == "ROUGE-2") return rouge_n(candidate, reference, 2, opts.rouge_recall_only);
  if (name == "ROUGE-3") return rouge_n(candidate, reference, 3, opts.rouge_recall_only);
  throw std::runtime_error("unknown metric: " + name);
}

OracleResult oracle_aggregate(const std::vector<double>& candidate_scores,
                              MetricDirection direction) {
  if (candidate_scores.empty())
    throw std::runtime_error("oracle_aggregate: empty candidate set");
  double sum = 0.0;
  double best = candidate_scores[0];
  for (double v : candidate_scores) {
    sum += v;
    if (direction == MetricDirection::kMaximize)
      best = std::max(best, v);
    else
      best = std::min(best, v);
  }
  return {sum / static_cast<double>(candidate_scores.size()), best};
}

SeedStats aggregate_seeds(const std::vector<double>& per_seed_means) {
  if (per_seed_means.empty())
    throw std::runtime_error("aggregate_seeds: no seeds");
  SeedStats out;
  out.count = static_cast<int>(per_seed_means.size());
  double sum = 0.0;
  for (double v : per_seed_means) sum += v;
  out.mean = sum / static_cast<double>(out.count);
  if (out.count >= 2) {
    double ss = 0.0;
    for (double v : per_seed_means) ss += (v - out.mean) * (v - out.mean);
    out.std_dev = std::sqrt(ss / static_cast<double>(out.count - 1));
  }
  return out;
}

}  // namespace dvpg
