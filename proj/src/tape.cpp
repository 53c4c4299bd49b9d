#include "dvpg/tape.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace dvpg {

const Mat& Expr::value() const { return tape->value(id); }
int Expr::rows() const { return static_cast<int>(value().rows()); }
int Expr::cols() const { return static_cast<int>(value().cols()); }

void Tape::check_same_tape(const Tape* t, Expr e) {
  if (e.tape != t) throw std::runtime_error("tape: expression from another tape");
}

int Tape::push(Mat v, bool needs_grad, std::function<void()> back) {
  Node n;
  n.value = std::move(v);
  n.back = std::move(back);
  n.needs_grad = needs_grad;
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::accum(int id, const Mat& g) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (!n.live) {
    n.grad = g;
    n.live = true;
  } else {
    n.grad += g;
  }
}

Expr Tape::constant(Mat v) { return wrap(push(std::move(v), false)); }

Expr Tape::leaf(Mat v) { return wrap(push(std::move(v), true)); }

void Tape::backward(Expr root) {
  check_same_tape(this, root);
  if (root.value().rows() != 1 || root.value().cols() != 1)
    throw std::runtime_error("tape: backward root must be 1x1");
  accum(root.id, Mat::Ones(1, 1));
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.live && n.back) n.back();
  }
}

Expr Tape::add(Expr a, Expr b) {
  check_same_tape(this, a);
  check_same_tape(this, b);
  int ia = a.id, ib = b.id;
  int out = push(nodes_[ia].value + nodes_[ib].value, needs(a) || needs(b));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, ia, ib, out] {
      accum(ia, nodes_[out].grad);
      accum(ib, nodes_[out].grad);
    };
  return wrap(out);
}

Expr Tape::add_n(const std::vector<Expr>& xs) {
  if (xs.empty()) throw std::runtime_error("tape: add_n of nothing");
  bool ng = false;
  Mat sum = xs[0].value();
  check_same_tape(this, xs[0]);
  ng = needs(xs[0]);
  for (size_t k = 1; k < xs.size(); ++k) {
    check_same_tape(this, xs[k]);
    sum += xs[k].value();
    ng = ng || needs(xs[k]);
  }
  std::vector<int> ids;
  ids.reserve(xs.size());
  for (auto& e : xs) ids.push_back(e.id);
  int out = push(std::move(sum), ng);
  if (ng)
    nodes_[out].back = [this, ids, out] {
      for (int i : ids) accum(i, nodes_[out].grad);
    };
  return wrap(out);
}

Expr Tape::sub(Expr a, Expr b) {
  check_same_tape(this, a);
  check_same_tape(this, b);
  int ia = a.id, ib = b.id;
  int out = push(nodes_[ia].value - nodes_[ib].value, needs(a) || needs(b));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, ia, ib, out] {
      accum(ia, nodes_[out].grad);
      accum(ib, -nodes_[out].grad);
    };
  return wrap(out);
}

Expr Tape::cmul(Expr a, Expr b) {
  check_same_tape(this, a);
  check_same_tape(this, b);
  int ia = a.id, ib = b.id;
  int out = push(nodes_[ia].value.cwiseProduct(nodes_[ib].value),
                 needs(a) || needs(b));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, ia, ib, out] {
      accum(ia, nodes_[out].grad.cwiseProduct(nodes_[ib].value));
      accum(ib, nodes_[out].grad.cwiseProduct(nodes_[ia].value));
    };
  return wrap(out);
}

Expr Tape::cdiv(Expr a, Expr b) {
  check_same_tape(this, a);
  check_same_tape(this, b);
  int ia = a.id, ib = b.id;
  int out =
      push(nodes_[ia].value.cwiseQuotient(nodes_[ib].value), needs(a) || needs(b));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, ia, ib, out] {
      accum(ia, nodes_[out].grad.cwiseQuotient(nodes_[ib].value));
      accum(ib, -nodes_[out]
                     .grad.cwiseProduct(nodes_[out].value)
                     .cwiseQuotient(nodes_[ib].value));
    };
  return wrap(out);
}

Expr Tape::scale(Expr a, double s) {
  check_same_tape(this, a);
  int ia = a.id;
  int out = push(nodes_[ia].value * s, needs(a));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, ia, s, out] { accum(ia, nodes_[out].grad * s); };
  return wrap(out);
}

Expr Tape::add_scalar(Expr a, double s) {
  check_same_tape(this, a);
  int ia = a.id;
  int out = push((nodes_[ia].value.array() + s).matrix(), needs(a));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, ia, out] { accum(ia, nodes_[out].grad); };
  return wrap(out);
}

Expr Tape::matmul(Expr a, Expr b) {
  check_same_tape(this, a);
  check_same_tape(this, b);
  int ia = a.id, ib = b.id;
  int out = push(nodes_[ia].value * nodes_[ib].value, needs(a) || needs(b));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, ia, ib, out] {
      accum(ia, nodes_[out].grad * nodes_[ib].value.transpose());
      accum(ib, nodes_[ia].value.transpose() * nodes_[out].grad);
    };
  return wrap(out);
}

Expr Tape::matmul_nt(Expr a, Expr b) {
  check_same_tape(this, a);
  check_same_tape(this, b);
  int ia = a.id, ib = b.id;
  int out =
      push(nodes_[ia].value * nodes_[ib].value.transpose(), needs(a) || needs(b));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, ia, ib, out] {
      accum(ia, nodes_[out].grad * nodes_[ib].value);
      accum(ib, nodes_[out].grad.transpose() * nodes_[ia].value);
    };
  return wrap(out);
}

Expr Tape::affine(Expr x, Expr w, Expr b) {
  check_same_tape(this, x);
  check_same_tape(this, w);
  check_same_tape(this, b);
  int ix = x.id, iw = w.id, ib = b.id;
  Mat y = nodes_[ix].value * nodes_[iw].value;
  y.rowwise() += nodes_[ib].value.row(0);
  int out = push(std::move(y), needs(x) || needs(w) || needs(b));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, ix, iw, ib, out] {
      const Mat& g = nodes_[out].grad;
      accum(ix, g * nodes_[iw].value.transpose());
      accum(iw, nodes_[ix].value.transpose() * g);
      accum(ib, g.colwise().sum());
    };
  return wrap(out);
}

Expr Tape::rowwise_affine(Expr x, Expr g, Expr b) {
  check_same_tape(this, x);
  check_same_tape(this, g);
  check_same_tape(this, b);
  int ix = x.id, ig = g.id, ib = b.id;
  Mat y = nodes_[ix].value;
  y.array().rowwise() *= nodes_[ig].value.row(0).array();
  y.rowwise() += nodes_[ib].value.row(0);
  int out = push(std::move(y), needs(x) || needs(g) || needs(b));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, ix, ig, ib, out] {
      const Mat& dy = nodes_[out].grad;
      Mat dx = dy;
      dx.array().rowwise() *= nodes_[ig].value.row(0).array();
      accum(ix, dx);
      accum(ig, (dy.cwiseProduct(nodes_[ix].value)).colwise().sum());
      accum(ib, dy.colwise().sum());
    };
  return wrap(out);
}

Expr Tape::concat_cols(const std::vector<Expr>& xs) {
  if (xs.empty()) throw std::runtime_error("tape: concat of nothing");
  int rows = xs[0].rows();
  int total = 0;
  bool ng = false;
  for (auto& e : xs) {
    check_same_tape(this, e);
    if (e.rows() != rows) throw std::runtime_error("tape: concat row mismatch");
    total += e.cols();
    ng = ng || needs(e);
  }
  Mat y(rows, total);
  int off = 0;
  std::vector<int> ids;
  std::vector<int> offs;
  for (auto& e : xs) {
    y.block(0, off, rows, e.cols()) = e.value();
    ids.push_back(e.id);
    offs.push_back(off);
    off += e.cols();
  }
  int out = push(std::move(y), ng);
  if (ng)
    nodes_[out].back = [this, ids, offs, rows, out] {
      const Mat& g = nodes_[out].grad;
      for (size_t k = 0; k < ids.size(); ++k) {
        int c = static_cast<int>(nodes_[ids[k]].value.cols());
        accum(ids[k], g.block(0, offs[k], rows, c));
      }
    };
  return wrap(out);
}

Expr Tape::slice_cols(Expr a, int start, int len) {
  check_same_tape(this, a);
  int ia = a.id;
  int rows = a.rows();
  int out = push(nodes_[ia].value.block(0, start, rows, len), needs(a));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, ia, start, len, rows, out] {
      Mat g = Mat::Zero(rows, nodes_[ia].value.cols());
      g.block(0, start, rows, len) = nodes_[out].grad;
      accum(ia, g);
    };
  return wrap(out);
}

Expr Tape::tanh_(Expr a) {
  check_same_tape(this, a);
  int ia = a.id;
  int out = push(nodes_[ia].value.array().tanh().matrix(), needs(a));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, ia, out] {
      const Mat& y = nodes_[out].value;
      accum(ia, nodes_[out].grad.cwiseProduct(
                    (1.0 - y.array().square()).matrix()));
    };
  return wrap(out);
}

Expr Tape::sigmoid_(Expr a) {
  check_same_tape(this, a);
  int ia = a.id;
  Mat y = (1.0 / (1.0 + (-nodes_[ia].value.array()).exp())).matrix();
  int out = push(std::move(y), needs(a));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, ia, out] {
      const Mat& y = nodes_[out].value;
      accum(ia, nodes_[out].grad.cwiseProduct(
                    (y.array() * (1.0 - y.array())).matrix()));
    };
  return wrap(out);
}

Expr Tape::relu_(Expr a) {
  check_same_tape(this, a);
  int ia = a.id;
  int out = push(nodes_[ia].value.cwiseMax(0.0), needs(a));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, ia, out] {
      Mat m = (nodes_[ia].value.array() > 0.0).cast<double>().matrix();
      accum(ia, nodes_[out].grad.cwiseProduct(m));
    };
  return wrap(out);
}

Expr Tape::exp_(Expr a) {
  check_same_tape(this, a);
  int ia = a.id;
  int out = push(nodes_[ia].value.array().exp().matrix(), needs(a));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, ia, out] {
      accum(ia, nodes_[out].grad.cwiseProduct(nodes_[out].value));
    };
  return wrap(out);
}

Expr Tape::log_(Expr a) {
  check_same_tape(this, a);
  int ia = a.id;
  int out = push(nodes_[ia].value.array().log().matrix(), needs(a));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, ia, out] {
      accum(ia, nodes_[out].grad.cwiseQuotient(nodes_[ia].value));
    };
  return wrap(out);
}

Expr Tape::softmax_rows(Expr a) {
  return softmax_rows(a, std::vector<char>(a.cols(), 1));
}

Expr Tape::softmax_rows(Expr a, const std::vector<char>& mask) {
  check_same_tape(this, a);
  int ia = a.id;
  const Mat& x = nodes_[ia].value;
  if (static_cast<int>(mask.size()) != x.cols())
    throw std::runtime_error("tape: softmax mask size mismatch");
  Mat y(x.rows(), x.cols());
  for (int r = 0; r < x.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < x.cols(); ++c)
      if (mask[c] && x(r, c) > mx) mx = x(r, c);
    if (!std::isfinite(mx))
      throw std::runtime_error("tape: softmax over fully masked row");
    double z = 0.0;
    for (int c = 0; c < x.cols(); ++c) {
      double e = mask[c] ? std::exp(x(r, c) - mx) : 0.0;
      y(r, c) = e;
      z += e;
    }
    y.row(r) /= z;
  }
  int out = push(std::move(y), needs(a));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, ia, out] {
      const Mat& y = nodes_[out].value;
      const Mat& dy = nodes_[out].grad;
      Mat dx(y.rows(), y.cols());
      for (int r = 0; r < y.rows(); ++r) {
        double s = dy.row(r).dot(y.row(r));
        dx.row(r) = y.row(r).cwiseProduct((dy.row(r).array() - s).matrix());
      }
      accum(ia, dx);
    };
  return wrap(out);
}

Expr Tape::layer_norm_rows(Expr a) {
  check_same_tape(this, a);
  constexpr double kEps = 1e-5;
  int ia = a.id;
  const Mat& x = nodes_[ia].value;
  int n = static_cast<int>(x.cols());
  Mat y(x.rows(), n);
  Eigen::VectorXd inv_std(x.rows());
  for (int r = 0; r < x.rows(); ++r) {
    double mu = x.row(r).mean();
    double var = (x.row(r).array() - mu).square().mean();
    double is = 1.0 / std::sqrt(var + kEps);
    inv_std(r) = is;
    y.row(r) = ((x.row(r).array() - mu) * is).matrix();
  }
  int out = push(std::move(y), needs(a));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, ia, inv_std, n, out] {
      const Mat& y = nodes_[out].value;
      const Mat& dy = nodes_[out].grad;
      Mat dx(y.rows(), n);
      for (int r = 0; r < y.rows(); ++r) {
        double mean_dy = dy.row(r).mean();
        double mean_dyy = dy.row(r).cwiseProduct(y.row(r)).mean();
        dx.row(r) = ((dy.row(r).array() - mean_dy - y.row(r).array() * mean_dyy) *
                     inv_std(r))
                        .matrix();
      }
      accum(ia, dx);
    };
  return wrap(out);
}

Expr Tape::weighted_mean_rows(Expr a, const std::vector<double>& w) {
  check_same_tape(this, a);
  int ia = a.id;
  const Mat& x = nodes_[ia].value;
  if (static_cast<int>(w.size()) != x.rows())
    throw std::runtime_error("tape: weighted_mean_rows weight size mismatch");
  double total = 0.0;
  for (double v : w) total += v;
  if (total <= 0.0) throw std::runtime_error("tape: weighted_mean_rows zero weight");
  Mat y = Mat::Zero(1, x.cols());
  for (int r = 0; r < x.rows(); ++r)
    if (w[r] != 0.0) y += (w[r] / total) * x.row(r);
  int out = push(std::move(y), needs(a));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, ia, w, total, out] {
      const Mat& dy = nodes_[out].grad;
      Mat dx = Mat::Zero(nodes_[ia].value.rows(), nodes_[ia].value.cols());
      for (int r = 0; r < dx.rows(); ++r)
        if (w[r] != 0.0) dx.row(r) = (w[r] / total) * dy.row(0);
      accum(ia, dx);
    };
  return wrap(out);
}

Expr Tape::broadcast_row(Expr a, int n) {
  check_same_tape(this, a);
  if (a.rows() != 1) throw std::runtime_error("tape: broadcast_row needs 1xC");
  int ia = a.id;
  Mat y = nodes_[ia].value.replicate(n, 1);
  int out = push(std::move(y), needs(a));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, ia, out] {
      accum(ia, nodes_[out].grad.colwise().sum());
    };
  return wrap(out);
}

Expr Tape::pick(Expr a, int r, int c) {
  check_same_tape(this, a);
  int ia = a.id;
  Mat y(1, 1);
  y(0, 0) = nodes_[ia].value(r, c);
  int out = push(std::move(y), needs(a));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, ia, r, c, out] {
      Mat g = Mat::Zero(nodes_[ia].value.rows(), nodes_[ia].value.cols());
      g(r, c) = nodes_[out].grad(0, 0);
      accum(ia, g);
    };
  return wrap(out);
}

Expr Tape::sum_all(Expr a) {
  check_same_tape(this, a);
  int ia = a.id;
  Mat y(1, 1);
  y(0, 0) = nodes_[ia].value.sum();
  int out = push(std::move(y), needs(a));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, ia, out] {
      accum(ia, Mat::Constant(nodes_[ia].value.rows(), nodes_[ia].value.cols(),
                              nodes_[out].grad(0, 0)));
    };
  return wrap(out);
}

Expr Tape::select_rows(Expr table, const std::vector<int>& ids) {
  check_same_tape(this, table);
  int it = table.id;
  const Mat& t = nodes_[it].value;
  Mat y(static_cast<int>(ids.size()), t.cols());
  for (size_t k = 0; k < ids.size(); ++k) {
    if (ids[k] < 0 || ids[k] >= t.rows())
      throw std::runtime_error("tape: select_rows id out of range");
    y.row(static_cast<int>(k)) = t.row(ids[k]);
  }
  int out = push(std::move(y), needs(table));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, it, ids, out] {
      Mat g = Mat::Zero(nodes_[it].value.rows(), nodes_[it].value.cols());
      for (size_t k = 0; k < ids.size(); ++k)
        g.row(ids[k]) += nodes_[out].grad.row(static_cast<int>(k));
      accum(it, g);
    };
  return wrap(out);
}

Expr Tape::mix_copy(Expr pvocab, Expr alpha, Expr gate,
                    const std::vector<int>& copy_targets, int ext_size) {
  check_same_tape(this, pvocab);
  check_same_tape(this, alpha);
  check_same_tape(this, gate);
  int ip = pvocab.id, ia = alpha.id, ig = gate.id;
  const Mat& pv = nodes_[ip].value;
  const Mat& al = nodes_[ia].value;
  int v = static_cast<int>(pv.cols());
  int d = static_cast<int>(al.cols());
  if (static_cast<int>(copy_targets.size()) != d)
    throw std::runtime_error("tape: mix_copy copy_targets size mismatch");
  if (ext_size < v) throw std::runtime_error("tape: mix_copy ext_size < vocab");
  double g = nodes_[ig].value(0, 0);
  Mat y = Mat::Zero(1, ext_size);
  y.block(0, 0, 1, v) = g * pv;
  for (int i = 0; i < d; ++i) {
    int t = copy_targets[i];
    if (t < 0 || t >= ext_size)
      throw std::runtime_error("tape: mix_copy target out of range");
    y(0, t) += (1.0 - g) * al(0, i);
  }
  bool ng = needs(pvocab) || needs(alpha) || needs(gate);
  int out = push(std::move(y), ng);
  if (ng)
    nodes_[out].back = [this, ip, ia, ig, copy_targets, v, d, out] {
      const Mat& dy = nodes_[out].grad;
      double g = nodes_[ig].value(0, 0);
      accum(ip, g * dy.block(0, 0, 1, v));
      Mat da(1, d);
      double dg = nodes_[ip].value.row(0).dot(dy.block(0, 0, 1, v).row(0));
      for (int i = 0; i < d; ++i) {
        double dt = dy(0, copy_targets[i]);
        da(0, i) = (1.0 - g) * dt;
        dg -= nodes_[ia].value(0, i) * dt;
      }
      accum(ia, da);
      Mat dgm(1, 1);
      dgm(0, 0) = dg;
      accum(ig, dgm);
    };
  return wrap(out);
}

}  // namespace dvpg
