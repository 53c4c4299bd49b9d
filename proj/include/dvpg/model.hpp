#pragma once

#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dvpg/corpus.hpp"
#include "dvpg/nn.hpp"
#include "dvpg/objective.hpp"
#include "dvpg/rng.hpp"
#include "dvpg/tape.hpp"

namespace dvpg {

struct ModelConfig {
  std::string kind = "dvpg";                // baseline | vae | dvpg
  std::string sampling = "independent";     // independent | aggregated
  std::string latent_source = "posterior";  // posterior | prior
  int vocab_size = 0;
  int hidden = 32;
  int embed = 32;
  int target_embed = 32;
  int heads = 2;
  int proj = 32;
  int ff = 32;
  int max_source_length = 14;
  int max_decode = 13;
  int beam = 4;
  bool normalize_ce = false;
  // Optional precomputed contextual source embeddings, keyed by example id.
  std::string embedding_file;

  bool variational() const { return kind != "baseline"; }
};

struct EncoderStates {
  Expr states;             // d x H
  std::vector<char> mask;  // one entry per row, all true per-example
};

struct LatentSample {
  std::string mode;  // independent | aggregated
  Expr values;       // d x H or 1 x H
  Mat noise;         // the epsilon actually used
};

struct GenerationSet {
  std::vector<std::vector<int>> candidates;  // extended ids, eos stripped
  std::vector<double> scores;                // summed log-probabilities
};

// Per-example source embeddings loaded from file, substituting for the
// trained lookup table on the source side. Layout documented in the README.
class EmbeddingFile {
 public:
  explicit EmbeddingFile(const std::string& path);
  const Mat& lookup(long long example_id) const;

 private:
  std::unordered_map<long long, Mat> rows_;
};

class Model {
 public:
  Model(ModelConfig cfg, uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  // All graph computation happens against a binding of the parameters onto
  // one tape: trainable leaves for training, constants for generation.
  struct Binding {
    Tape* tape = nullptr;
    bool trainable = false;
    std::unordered_map<std::string, Expr> by_name;
    std::vector<ParamStore::Bound> bound;
    Expr operator[](const std::string& name) const;
  };
  Binding bind(Tape& tape, bool trainable);
  void harvest(const Binding& b);

  EncoderStates encode(Binding& b, const EncodedPair& ex) const;

  GaussianExpr posterior_params(Binding& b, const EncoderStates& enc,
                                int label) const;
  // Prior broadcast to `rows` rows (1 for aggregated, d for independent).
  GaussianExpr prior_params(Binding& b, int label, int rows) const;
  LatentSample sample_z(Binding& b, const GaussianExpr& g, const Mat& eps) const;
  Expr combine(Binding& b, const EncoderStates& enc,
               const LatentSample& z) const;

  std::vector<Expr> decode_teacher_forced(Binding& b, Expr states,
                                          const std::vector<int>& target_input,
                                          const std::vector<int>& copy_targets,
                                          int ext_size) const;

  // Draws epsilon for this model's sampling mode, d source rows.
  Mat draw_noise(int d, Rng& rng) const;

  // Full per-example training loss on the caller's tape. For the baseline
  // the breakdown carries kl = 0; during the two-step CE phase kl is absent
  // and no z is sampled. eps must match the sampling mode (ignored when the
  // latent path is off).
  struct ExampleLoss {
    Expr total;
    double ce = 0.0;
    std::optional<double> kl;
  };
  ExampleLoss example_loss(Binding& b, const EncodedPair& ex, int loss_kind,
                           bool bypass_latent, double coefficient,
                           const Mat& eps) const;

  // States the generator decodes from: raw encoder output for the baseline
  // or the CE phase, otherwise encoder output combined with one z draw.
  Expr generation_states(Binding& b, const EncodedPair& ex,
                         const Mat* eps) const;
  // Same, reusing an already-computed encoding so K draws share one encode.
  Expr latent_states(Binding& b, const EncoderStates& enc,
                     const EncodedPair& ex, const Mat& eps) const;

  GenerationSet beam_search(Binding& b, Expr states, const EncodedPair& ex,
                            int beam_width, int max_steps) const;
  std::vector<int> greedy_decode(Binding& b, Expr states,
                                 const EncodedPair& ex, int max_steps) const;

  // Candidate ids -> tokens, resolving extended ids to source surface forms.
  Tokens ids_to_tokens(const std::vector<int>& ids, const Vocabulary& vocab,
                       const EncodedPair& ex) const;

  void save_checkpoint(const std::string& path, bool with_optimizer_state,
                       const std::string& extra_json) const;
  // Returns the extra json stored at save time; validates config compatibility.
  std::string load_checkpoint(const std::string& path,
                              bool with_optimizer_state);
  static ModelConfig peek_config(const std::string& path);

  void attach_embedding_file(std::shared_ptr<EmbeddingFile> f) {
    embedding_file_ = std::move(f);
  }
  // Set per example before encode() when an embedding file is attached.
  void set_current_example_id(long long id) { current_example_id_ = id; }

 private:
  struct StepState {
    Expr h;
    Expr c;
  };
  struct StepOutput {
    Expr dist;  // 1 x ext_size
    StepState state;
  };
  StepState initial_state(Binding& b, Expr states) const;
  StepOutput decode_step(Binding& b, Expr states, const StepState& prev,
                         int input_id, const std::vector<int>& copy_targets,
                         int ext_size) const;

  ModelConfig cfg_;
  ParamStore params_;
  Mat pos_encoding_;  // max_source_length x hidden
  std::shared_ptr<EmbeddingFile> embedding_file_;
  long long current_example_id_ = -1;
};

ModelConfig profile_config(const std::string& profile);

std::string model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const std::string& s);

}  // namespace dvpg
