#pragma once

#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "dvpg/rng.hpp"
#include "dvpg/tape.hpp"

namespace dvpg {

// Little-endian binary primitives shared by checkpoint writers.
void write_matrix(std::FILE* f, const Mat& m);
Mat read_matrix(std::FILE* f);
void write_string(std::FILE* f, const std::string& s);
std::string read_string(std::FILE* f);
void write_i64(std::FILE* f, std::int64_t v);
std::int64_t read_i64(std::FILE* f);

struct Parameter {
  Mat value;
  Mat grad;
  Mat m;
  Mat v;
};

// Named dense parameters plus the bridging needed to run them through a Tape.
// bind() copies each requested parameter onto the tape as a leaf; harvest()
// pulls the leaf gradients back into Parameter::grad after backward().
class ParamStore {
 public:
  Parameter& create(const std::string& name, int rows, int cols);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool has(const std::string& name) const;

  // Registration order, which is also the optimizer update order.
  const std::vector<std::string>& names() const { return order_; }

  void zero_grads();

  // Gaussian fan-based init for weight matrices, zeros for biases.
  void init_xavier(Parameter& p, Rng& rng);
  void init_uniform(Parameter& p, Rng& rng, double lo, double hi);

  struct Bound {
    std::string name;
    Expr expr;
  };

  // Puts every parameter on the tape; returns handles in registration order.
  std::vector<Bound> bind_all(Tape& tape);
  Expr bind(Tape& tape, const std::string& name);

  // Adds leaf grads from the tape into Parameter::grad. Call after backward().
  void harvest(const Tape& tape, const std::vector<Bound>& bound);

  // Checkpoint sections: values only, or values plus Adam moments.
  void write_params(std::FILE* f, bool with_optimizer_state) const;
  void read_params(std::FILE* f, bool with_optimizer_state);

 private:
  std::map<std::string, Parameter> params_;
  std::vector<std::string> order_;
  std::map<std::string, int> bound_ids_;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  void step(ParamStore& params);

  long long steps_taken() const { return t_; }
  void set_steps_taken(long long t) { t_ = t; }

 private:
  AdamConfig cfg_;
  long long t_ = 0;
};

}  // namespace dvpg
