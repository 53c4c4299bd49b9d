#pragma once

#include <optional>
#include <vector>

#include "dvpg/tape.hpp"

namespace dvpg {

// Diagonal Gaussian over a vector (1 x H) or a stack of vectors (d x H).
// std entries must be strictly positive.
struct DiagonalGaussian {
  Mat mean;
  Mat std;

  static DiagonalGaussian standard(int rows, int cols) {
    return {Mat::Zero(rows, cols), Mat::Ones(rows, cols)};
  }
};

// KL(q || p) in closed form, summed over all entries:
//   sum_i log(p.std/q.std) + (q.std^2 + (q.mean - p.mean)^2) / (2 p.std^2) - 1/2
double gaussian_kl(const DiagonalGaussian& q, const DiagonalGaussian& p);

// KL against a standard normal of matching shape.
double kl_standard(const DiagonalGaussian& q);

// The three training variants. Loss 1 keeps the doubled coefficient that falls
// out of merging the prior into the regularizer; Loss 3 adds both pull-to-
// standard terms on top of Loss 2.
double kl_loss_1(const DiagonalGaussian& q);
double kl_loss_2(const DiagonalGaussian& q, const DiagonalGaussian& p_v);
double kl_loss_3(const DiagonalGaussian& q, const DiagonalGaussian& p_v);

// Tape-side Gaussian: mean and log-variance live on the graph so gradients
// reach the posterior and prior heads. std = exp(0.5 * logvar).
struct GaussianExpr {
  Expr mean;
  Expr logvar;
};

Expr gaussian_kl(Tape& t, const GaussianExpr& q, const GaussianExpr& p);
Expr kl_standard(Tape& t, const GaussianExpr& q);
Expr kl_loss(Tape& t, int loss_kind, const GaussianExpr& q, const GaussianExpr& p_v);

enum class ScheduleKind { kAnnealOnly, kTwoStep };

// Batch-counter schedule. two_step_boundary only applies to kTwoStep; the
// coefficient ramps linearly from the boundary over anneal_length batches
// (anneal_length 0 degenerates to a step function).
struct ScheduleState {
  long long step = 0;
  long long two_step_boundary = 0;
  long long anneal_length = 0;
  ScheduleKind kind = ScheduleKind::kAnnealOnly;
};

double anneal_coefficient(const ScheduleState& s);

// True while the two-step CE phase is active: z is not sampled at all and the
// decoder sees the raw encoder states.
bool latent_bypassed(const ScheduleState& s);

// kl is absent when the latent path was bypassed; the baseline reports an
// explicit 0. total = ce + coefficient * kl (ce alone when kl is absent).
struct LossBreakdown {
  double ce = 0.0;
  std::optional<double> kl;
  double coefficient = 0.0;
  double total = 0.0;
};

LossBreakdown make_breakdown(double ce, std::optional<double> kl,
                             double coefficient);

// Negative summed log-probability of the gold ids, one distribution per gold
// position. Not normalized by length unless asked.
double cross_entropy(const std::vector<std::vector<double>>& step_distributions,
                     const std::vector<int>& gold_ids,
                     bool normalize_by_length = false);

Expr cross_entropy(Tape& t, const std::vector<Expr>& step_distributions,
                   const std::vector<int>& gold_ids,
                   bool normalize_by_length = false);

}  // namespace dvpg
