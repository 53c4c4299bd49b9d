#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace dvpg {

using Mat = Eigen::MatrixXd;

class Tape;

// Handle to a node on a Tape. Cheap to copy; invalid until assigned.
struct Expr {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
  const Mat& value() const;
  int rows() const;
  int cols() const;
};

// Reverse-mode autodiff over Eigen matrices. Nodes are appended in forward
// order; backward() walks them in reverse, so inputs always precede outputs.
// One Tape per training batch (or per decoded example); nothing is reused
// across tapes except parameter values copied in through leaf().
class Tape {
 public:
  Expr constant(Mat v);
  Expr leaf(Mat v);  // differentiable leaf; grads collected after backward()

  const Mat& value(int id) const { return nodes_[id].value; }
  const Mat& grad(int id) const { return nodes_[id].grad; }
  bool has_grad(int id) const { return nodes_[id].live; }

  // Seeds d(root)/d(root) = 1 and propagates. root must be 1x1.
  void backward(Expr root);

  size_t size() const { return nodes_.size(); }

  // --- ops -----------------------------------------------------------------
  Expr add(Expr a, Expr b);
  Expr add_n(const std::vector<Expr>& xs);
  Expr sub(Expr a, Expr b);
  Expr cmul(Expr a, Expr b);
  Expr cdiv(Expr a, Expr b);
  Expr scale(Expr a, double s);
  Expr add_scalar(Expr a, double s);
  Expr matmul(Expr a, Expr b);
  Expr matmul_nt(Expr a, Expr b);  // a * b^T
  Expr affine(Expr x, Expr w, Expr b);            // x*w + b broadcast over rows
  Expr rowwise_affine(Expr x, Expr g, Expr b);    // per-row x.row(i)*.g + b
  Expr concat_cols(const std::vector<Expr>& xs);
  Expr slice_cols(Expr a, int start, int len);
  Expr tanh_(Expr a);
  Expr sigmoid_(Expr a);
  Expr relu_(Expr a);
  Expr exp_(Expr a);
  Expr log_(Expr a);
  // Row-wise softmax; mask has one entry per column, false columns get
  // probability exactly 0. At least one column must be unmasked.
  Expr softmax_rows(Expr a, const std::vector<char>& mask);
  Expr softmax_rows(Expr a);
  Expr layer_norm_rows(Expr a);  // (x - mean) / sqrt(var + 1e-5), per row
  // Weighted row average: sum_i w[i] * x.row(i) / sum_i w[i]. Result 1 x C.
  Expr weighted_mean_rows(Expr a, const std::vector<double>& w);
  Expr broadcast_row(Expr a, int n);  // replicate 1 x C to n x C
  Expr pick(Expr a, int r, int c);    // 1x1 view of one entry
  Expr sum_all(Expr a);               // 1x1
  Expr select_rows(Expr table, const std::vector<int>& ids);
  // Copy-mechanism mixing: out has ext_size >= V columns,
  //   out[0..V) = gate * pvocab, then out[copy_targets[i]] += (1-gate)*alpha[i]
  // for every source position i (copy_targets may point into the base range
  // for in-vocabulary source tokens).
  Expr mix_copy(Expr pvocab, Expr alpha, Expr gate,
                const std::vector<int>& copy_targets, int ext_size);

 private:
  struct Node {
    Mat value;
    Mat grad;
    std::function<void()> back;
    bool needs_grad = false;
    bool live = false;
  };

  int push(Mat v, bool needs_grad, std::function<void()> back = nullptr);
  void accum(int id, const Mat& g);
  Expr wrap(int id) { return Expr{this, id}; }
  bool needs(Expr e) const { return nodes_[e.id].needs_grad; }
  static void check_same_tape(const Tape* t, Expr e);

  std::vector<Node> nodes_;
};

}  // namespace dvpg
