#include "dvpg/nn.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>

#include "dvpg/common.hpp"

namespace dvpg {

Parameter& ParamStore::create(const std::string& name, int rows, int cols) {
  if (params_.count(name))
    throw std::runtime_error("parameter already exists: " + name);
  Parameter p;
  p.value = Mat::Zero(rows, cols);
  p.grad = Mat::Zero(rows, cols);
  p.m = Mat::Zero(rows, cols);
  p.v = Mat::Zero(rows, cols);
  auto& slot = params_[name] = std::move(p);
  order_.push_back(name);
  return slot;
}

Parameter& ParamStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::runtime_error("no such parameter: " + name);
  return it->second;
}

const Parameter& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::runtime_error("no such parameter: " + name);
  return it->second;
}

bool ParamStore::has(const std::string& name) const {
  return params_.count(name) != 0;
}

void ParamStore::zero_grads() {
  for (auto& [name, p] : params_) p.grad.setZero();
}

void ParamStore::init_xavier(Parameter& p, Rng& rng) {
  double fan = static_cast<double>(p.value.rows() + p.value.cols());
  double s = std::sqrt(2.0 / fan);
  for (int i = 0; i < p.value.rows(); ++i)
    for (int j = 0; j < p.value.cols(); ++j) p.value(i, j) = s * rng.normal();
}

void ParamStore::init_uniform(Parameter& p, Rng& rng, double lo, double hi) {
  for (int i = 0; i < p.value.rows(); ++i)
    for (int j = 0; j < p.value.cols(); ++j) p.value(i, j) = rng.uniform(lo, hi);
}

std::vector<ParamStore::Bound> ParamStore::bind_all(Tape& tape) {
  std::vector<Bound> out;
  out.reserve(order_.size());
  for (const auto& name : order_)
    out.push_back({name, tape.leaf(params_[name].value)});
  return out;
}

Expr ParamStore::bind(Tape& tape, const std::string& name) {
  return tape.leaf(get(name).value);
}

void ParamStore::harvest(const Tape& tape, const std::vector<Bound>& bound) {
  for (const auto& b : bound) {
    if (!tape.has_grad(b.expr.id)) continue;
    get(b.name).grad += tape.grad(b.expr.id);
  }
}

void write_i64(std::FILE* f, std::int64_t v) {
  if (std::fwrite(&v, sizeof(v), 1, f) != 1)
    throw DataError("checkpoint: write failed");
}

std::int64_t read_i64(std::FILE* f) {
  std::int64_t v = 0;
  if (std::fread(&v, sizeof(v), 1, f) != 1)
    throw DataError("checkpoint: truncated file");
  return v;
}

void write_matrix(std::FILE* f, const Mat& m) {
  write_i64(f, m.rows());
  write_i64(f, m.cols());
  size_t n = static_cast<size_t>(m.rows() * m.cols());
  if (n && std::fwrite(m.data(), sizeof(double), n, f) != n)
    throw DataError("checkpoint: write failed");
}

Mat read_matrix(std::FILE* f) {
  std::int64_t r = read_i64(f), c = read_i64(f);
  if (r < 0 || c < 0) throw DataError("checkpoint: bad matrix header");
  Mat m(r, c);
  size_t n = static_cast<size_t>(r * c);
  if (n && std::fread(m.data(), sizeof(double), n, f) != n)
    throw DataError("checkpoint: truncated matrix data");
  return m;
}

void write_string(std::FILE* f, const std::string& s) {
  write_i64(f, static_cast<std::int64_t>(s.size()));
  if (!s.empty() && std::fwrite(s.data(), 1, s.size(), f) != s.size())
    throw DataError("checkpoint: write failed");
}

std::string read_string(std::FILE* f) {
  std::int64_t n = read_i64(f);
  if (n < 0) throw DataError("checkpoint: bad string header");
  std::string s(static_cast<size_t>(n), '\0');
  if (n > 0 && std::fread(s.data(), 1, s.size(), f) != s.size())
    throw DataError("checkpoint: truncated string data");
  return s;
}

void ParamStore::write_params(std::FILE* f, bool with_optimizer_state) const {
  write_i64(f, static_cast<std::int64_t>(order_.size()));
  for (const auto& name : order_) {
    const Parameter& p = params_.at(name);
    write_string(f, name);
    write_matrix(f, p.value);
    if (with_optimizer_state) {
      write_matrix(f, p.m);
      write_matrix(f, p.v);
    }
  }
}

void ParamStore::read_params(std::FILE* f, bool with_optimizer_state) {
  std::int64_t n = read_i64(f);
  for (std::int64_t i = 0; i < n; ++i) {
    std::string name = read_string(f);
    Mat v = read_matrix(f);
    auto it = params_.find(name);
    if (it == params_.end())
      throw DataError("checkpoint names unknown parameter: " + name);
    if (it->second.value.rows() != v.rows() ||
        it->second.value.cols() != v.cols())
      throw DataError("checkpoint shape mismatch for: " + name);
    it->second.value = std::move(v);
    if (with_optimizer_state) {
      it->second.m = read_matrix(f);
      it->second.v = read_matrix(f);
    }
  }
}

void Adam::step(ParamStore& params) {
  ++t_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (const auto& name : params.names()) {
    Parameter& p = params.get(name);
    p.m = cfg_.beta1 * p.m + (1.0 - cfg_.beta1) * p.grad;
    p.v = cfg_.beta2 * p.v + (1.0 - cfg_.beta2) * p.grad.cwiseProduct(p.grad);
    Mat mhat = p.m / bc1;
    Mat vhat = p.v / bc2;
    p.value.array() -=
        cfg_.lr * mhat.array() / (vhat.array().sqrt() + cfg_.eps);
  }
}

}  // namespace dvpg
