#include "dvpg/objective.hpp"

#include <cmath>
#include <stdexcept>

namespace dvpg {

namespace {

void check_shape(const DiagonalGaussian& g) {
  if (g.mean.rows() != g.std.rows() || g.mean.cols() != g.std.cols())
    throw std::runtime_error("gaussian: mean/std shape mismatch");
}

void check_shapes(const DiagonalGaussian& q, const DiagonalGaussian& p) {
  check_shape(q);
  check_shape(p);
  if (q.mean.rows() != p.mean.rows() || q.mean.cols() != p.mean.cols())
    throw std::runtime_error("gaussian_kl: q/p shape mismatch");
}

}  // namespace

double gaussian_kl(const DiagonalGaussian& q, const DiagonalGaussian& p) {
  check_shapes(q, p);
  double total = 0.0;
  for (int i = 0; i < q.mean.rows(); ++i) {
    for (int j = 0; j < q.mean.cols(); ++j) {
      double qs = q.std(i, j), ps = p.std(i, j);
      double dm = q.mean(i, j) - p.mean(i, j);
      total += std::log(ps / qs) + (qs * qs + dm * dm) / (2.0 * ps * ps) - 0.5;
    }
  }
  return total;
}

double kl_standard(const DiagonalGaussian& q) {
  return gaussian_kl(q, DiagonalGaussian::standard(
                            static_cast<int>(q.mean.rows()),
                            static_cast<int>(q.mean.cols())));
}

double kl_loss_1(const DiagonalGaussian& q) { return 2.0 * kl_standard(q); }

double kl_loss_2(const DiagonalGaussian& q, const DiagonalGaussian& p_v) {
  return gaussian_kl(q, p_v);
}

double kl_loss_3(const DiagonalGaussian& q, const DiagonalGaussian& p_v) {
  return kl_loss_2(q, p_v) + kl_standard(q) + kl_standard(p_v);
}

Expr gaussian_kl(Tape& t, const GaussianExpr& q, const GaussianExpr& p) {
  // Per entry: 0.5 (p.lv - q.lv) + 0.5 exp(q.lv - p.lv)
  //          + 0.5 (q.m - p.m)^2 exp(-p.lv) - 0.5, summed.
  Expr dlv = t.sub(p.logvar, q.logvar);
  Expr var_ratio = t.exp_(t.scale(dlv, -1.0));
  Expr dm = t.sub(q.mean, p.mean);
  Expr dm2 = t.cmul(dm, dm);
  Expr mean_term = t.cmul(dm2, t.exp_(t.scale(p.logvar, -1.0)));
  Expr per_entry = t.add_scalar(
      t.scale(t.add_n({dlv, var_ratio, mean_term}), 0.5), -0.5);
  return t.sum_all(per_entry);
}

Expr kl_standard(Tape& t, const GaussianExpr& q) {
  int r = q.mean.rows(), c = q.mean.cols();
  GaussianExpr std_normal{t.constant(Mat::Zero(r, c)), t.constant(Mat::Zero(r, c))};
  return gaussian_kl(t, q, std_normal);
}

Expr kl_loss(Tape& t, int loss_kind, const GaussianExpr& q,
             const GaussianExpr& p_v) {
  switch (loss_kind) {
    case 1:
      return t.scale(kl_standard(t, q), 2.0);
    case 2:
      return gaussian_kl(t, q, p_v);
    case 3:
      return t.add(t.add(gaussian_kl(t, q, p_v), kl_standard(t, q)),
                   kl_standard(t, p_v));
    default:
      throw std::runtime_error("kl_loss: loss_kind must be 1, 2 or 3");
  }
}

double anneal_coefficient(const ScheduleState& s) {
  long long boundary = s.kind == ScheduleKind::kTwoStep ? s.two_step_boundary : 0;
  if (s.step < boundary) return 0.0;
  if (s.anneal_length <= 0) return 1.0;
  double c = static_cast<double>(s.step - boundary) /
             static_cast<double>(s.anneal_length);
  if (c < 0.0) return 0.0;
  if (c > 1.0) return 1.0;
  return c;
}

bool latent_bypassed(const ScheduleState& s) {
  return s.kind == ScheduleKind::kTwoStep && s.step < s.two_step_boundary;
}

LossBreakdown make_breakdown(double ce, std::optional<double> kl,
                             double coefficient) {
  LossBreakdown b;
  b.ce = ce;
  b.kl = kl;
  b.coefficient = coefficient;
  b.total = kl ? ce + coefficient * *kl : ce;
  return b;
}

double cross_entropy(const std::vector<std::vector<double>>& step_distributions,
                     const std::vector<int>& gold_ids,
                     bool normalize_by_length) {
  if (step_distributions.size() != gold_ids.size())
    throw std::runtime_error("cross_entropy: one distribution per gold id");
  double total = 0.0;
  for (size_t t = 0; t < gold_ids.size(); ++t) {
    int g = gold_ids[t];
    if (g < 0 || g >= static_cast<int>(step_distributions[t].size()))
      throw std::runtime_error("cross_entropy: gold id outside distribution support");
    total -= std::log(step_distributions[t][g]);
  }
  if (normalize_by_length && !gold_ids.empty())
    total /= static_cast<double>(gold_ids.size());
  return total;
}

Expr cross_entropy(Tape& t, const std::vector<Expr>& step_distributions,
                   const std::vector<int>& gold_ids, bool normalize_by_length) {
  if (step_distributions.size() != gold_ids.size())
    throw std::runtime_error("cross_entropy: one distribution per gold id");
  if (gold_ids.empty()) throw std::runtime_error("cross_entropy: empty target");
  std::vector<Expr> terms;
  terms.reserve(gold_ids.size());
  for (size_t i = 0; i < gold_ids.size(); ++i) {
    int g = gold_ids[i];
    if (g < 0 || g >= step_distributions[i].cols())
      throw std::runtime_error("cross_entropy: gold id outside distribution support");
    terms.push_back(t.log_(t.pick(step_distributions[i], 0, g)));
  }
  Expr total = t.scale(t.add_n(terms), -1.0);
  if (normalize_by_length)
    total = t.scale(total, 1.0 / static_cast<double>(gold_ids.size()));
  return total;
}

}  // namespace dvpg
