#include "dvpg/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "dvpg/common.hpp"

namespace dvpg {

namespace {

using nlohmann::json;

constexpr uint64_t kCheckpointMagic = 0x44565047434b5054ULL;
constexpr std::int64_t kCheckpointVersion = 1;

Mat sinusoidal_encoding(int max_len, int dim) {
  Mat pe(max_len, dim);
  for (int pos = 0; pos < max_len; ++pos) {
    for (int i = 0; i < dim; ++i) {
      double exponent = static_cast<double>(2 * (i / 2)) / dim;
      double angle = pos / std::pow(10000.0, exponent);
      pe(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

json config_to_json_obj(const ModelConfig& c) {
  json j;
  j["kind"] = c.kind;
  j["sampling"] = c.sampling;
  j["latent_source"] = c.latent_source;
  j["vocab_size"] = c.vocab_size;
  j["hidden"] = c.hidden;
  j["embed"] = c.embed;
  j["target_embed"] = c.target_embed;
  j["heads"] = c.heads;
  j["proj"] = c.proj;
  j["ff"] = c.ff;
  j["max_source_length"] = c.max_source_length;
  j["max_decode"] = c.max_decode;
  j["beam"] = c.beam;
  j["normalize_ce"] = c.normalize_ce;
  j["embedding_file"] = c.embedding_file;
  return j;
}

ModelConfig config_from_json_obj(const json& j) {
  ModelConfig c;
  c.kind = j.at("kind").get<std::string>();
  c.sampling = j.at("sampling").get<std::string>();
  c.latent_source = j.at("latent_source").get<std::string>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.embed = j.at("embed").get<int>();
  c.target_embed = j.at("target_embed").get<int>();
  c.heads = j.at("heads").get<int>();
  c.proj = j.at("proj").get<int>();
  c.ff = j.at("ff").get<int>();
  c.max_source_length = j.at("max_source_length").get<int>();
  c.max_decode = j.at("max_decode").get<int>();
  c.beam = j.at("beam").get<int>();
  c.normalize_ce = j.at("normalize_ce").get<bool>();
  c.embedding_file = j.at("embedding_file").get<std::string>();
  return c;
}

void validate_config(const ModelConfig& c) {
  if (c.kind != "baseline" && c.kind != "vae" && c.kind != "dvpg")
    throw ConfigError("model kind must be baseline, vae or dvpg");
  if (c.sampling != "independent" && c.sampling != "aggregated")
    throw ConfigError("sampling mode must be independent or aggregated");
  if (c.latent_source != "posterior" && c.latent_source != "prior")
    throw ConfigError("latent source must be posterior or prior");
  if (c.vocab_size < 5) throw ConfigError("vocab size too small");
  if (c.hidden < 1 || c.embed < 1 || c.target_embed < 1 || c.ff < 1 ||
      c.proj < 1)
    throw ConfigError("model dimensions must be positive");
  if (c.heads < 1 || c.proj % c.heads != 0)
    throw ConfigError("attention projection must divide evenly across heads");
  if (c.max_source_length < 2 || c.max_decode < 1 || c.beam < 1)
    throw ConfigError("sequence/beam limits must be positive");
}

void check_label(int label) {
  if (label != 0 && label != 1)
    throw DataError("label must be 0 or 1, got " + std::to_string(label));
}

}  // namespace

std::string model_config_to_json(const ModelConfig& c) {
  return config_to_json_obj(c).dump();
}

ModelConfig model_config_from_json(const std::string& s) {
  return config_from_json_obj(json::parse(s));
}

EmbeddingFile::EmbeddingFile(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw DataError("cannot open embedding file: " + path);
  try {
    std::int64_t magic = read_i64(f);
    if (magic != 0x44565045) throw DataError("bad embedding file: " + path);
    std::int64_t n = read_i64(f);
    for (std::int64_t i = 0; i < n; ++i) {
      std::int64_t id = read_i64(f);
      rows_[id] = read_matrix(f);
    }
  } catch (...) {
    std::fclose(f);
    throw;
  }
  std::fclose(f);
}

const Mat& EmbeddingFile::lookup(long long example_id) const {
  auto it = rows_.find(example_id);
  if (it == rows_.end())
    throw DataError("embedding file has no entry for example " +
                    std::to_string(example_id));
  return it->second;
}

Expr Model::Binding::operator[](const std::string& name) const {
  auto it = by_name.find(name);
  if (it == by_name.end())
    throw std::runtime_error("model parameter not bound: " + name);
  return it->second;
}

Model::Model(ModelConfig cfg, uint64_t init_seed) : cfg_(std::move(cfg)) {
  validate_config(cfg_);
  pos_encoding_ = sinusoidal_encoding(cfg_.max_source_length, cfg_.hidden);

  int h = cfg_.hidden, v = cfg_.vocab_size;
  Rng rng(init_seed, "model-init");
  auto weight = [&](const std::string& name, int r, int c) {
    params_.init_xavier(params_.create(name, r, c), rng);
  };
  auto bias = [&](const std::string& name, int c) {
    params_.create(name, 1, c);
  };

  weight("src_embed", v, cfg_.embed);
  weight("enc_proj_w", cfg_.embed, h);
  bias("enc_proj_b", h);
  weight("enc_wq", h, cfg_.proj);
  weight("enc_wk", h, cfg_.proj);
  weight("enc_wv", h, cfg_.proj);
  weight("enc_wo", cfg_.proj, h);
  bias("enc_wo_b", h);
  params_.create("enc_ln1_g", 1, h).value.setOnes();
  bias("enc_ln1_b", h);
  params_.create("enc_ln2_g", 1, h).value.setOnes();
  bias("enc_ln2_b", h);
  weight("enc_ff_w1", h, cfg_.ff);
  bias("enc_ff_b1", cfg_.ff);
  weight("enc_ff_w2", cfg_.ff, h);
  bias("enc_ff_b2", h);

  if (cfg_.variational()) {
    weight("post_mu_w", h, h);
    bias("post_mu_b", h);
    weight("post_lv_w", h, h);
    bias("post_lv_b", h);
    if (cfg_.kind == "dvpg") {
      weight("label_embed", 2, h);
      // Learned priors start at N(0,1) for both labels.
      params_.create("prior_mu", 2, h);
      params_.create("prior_lv", 2, h);
    }
  }

  weight("tgt_embed", v, cfg_.target_embed);
  weight("dec_wx", cfg_.target_embed, 4 * h);
  weight("dec_wh", h, 4 * h);
  bias("dec_b", 4 * h);
  // Forget-gate slice starts at 1 so early training keeps cell state.
  params_.get("dec_b").value.block(0, h, 1, h).setOnes();
  weight("att_w", h, h);
  weight("comb_w", 2 * h, h);
  bias("comb_b", h);
  weight("out_w", h, v);
  bias("out_b", v);
  weight("gate_w", h, 1);
  bias("gate_b", 1);
  weight("init_h_w", h, h);
  bias("init_h_b", h);
  weight("init_c_w", h, h);
  bias("init_c_b", h);
}

Model::Binding Model::bind(Tape& tape, bool trainable) {
  Binding b;
  b.tape = &tape;
  b.trainable = trainable;
  if (trainable) {
    b.bound = params_.bind_all(tape);
    for (const auto& bd : b.bound) b.by_name[bd.name] = bd.expr;
  } else {
    for (const auto& name : params_.names())
      b.by_name[name] = tape.constant(params_.get(name).value);
  }
  return b;
}

void Model::harvest(const Binding& b) {
  if (!b.trainable)
    throw std::runtime_error("harvest needs a trainable binding");
  params_.harvest(*b.tape, b.bound);
}

EncoderStates Model::encode(Binding& b, const EncodedPair& ex) const {
  Tape& t = *b.tape;
  int d = static_cast<int>(ex.source_ids.size());
  if (d < 1) throw DataError("encode: empty source");
  if (d > cfg_.max_source_length)
    throw DataError("encode: source longer than max_source_length");

  Expr e;
  if (embedding_file_) {
    const Mat& m = embedding_file_->lookup(current_example_id_);
    if (m.rows() != d || m.cols() != cfg_.embed)
      throw DataError("embedding file entry has wrong shape for example " +
                      std::to_string(current_example_id_));
    e = t.constant(m);
  } else {
    e = t.select_rows(b["src_embed"], ex.source_ids);
  }

  Expr x = t.affine(e, b["enc_proj_w"], b["enc_proj_b"]);
  x = t.add(x, t.constant(pos_encoding_.topRows(d)));

  int dk = cfg_.proj / cfg_.heads;
  Expr q = t.matmul(x, b["enc_wq"]);
  Expr k = t.matmul(x, b["enc_wk"]);
  Expr v = t.matmul(x, b["enc_wv"]);
  std::vector<Expr> head_ctx;
  for (int hidx = 0; hidx < cfg_.heads; ++hidx) {
    Expr qh = t.slice_cols(q, hidx * dk, dk);
    Expr kh = t.slice_cols(k, hidx * dk, dk);
    Expr vh = t.slice_cols(v, hidx * dk, dk);
    Expr scores = t.scale(t.matmul_nt(qh, kh), 1.0 / std::sqrt(double(dk)));
    Expr alpha = t.softmax_rows(scores);
    head_ctx.push_back(t.matmul(alpha, vh));
  }
  Expr ctx = cfg_.heads == 1 ? head_ctx[0] : t.concat_cols(head_ctx);
  Expr att = t.affine(ctx, b["enc_wo"], b["enc_wo_b"]);
  Expr y = t.rowwise_affine(t.layer_norm_rows(t.add(x, att)), b["enc_ln1_g"],
                            b["enc_ln1_b"]);
  Expr f = t.affine(t.relu_(t.affine(y, b["enc_ff_w1"], b["enc_ff_b1"])),
                    b["enc_ff_w2"], b["enc_ff_b2"]);
  Expr z = t.rowwise_affine(t.layer_norm_rows(t.add(y, f)), b["enc_ln2_g"],
                            b["enc_ln2_b"]);
  return {z, std::vector<char>(d, 1)};
}

GaussianExpr Model::posterior_params(Binding& b, const EncoderStates& enc,
                                     int label) const {
  check_label(label);
  if (!cfg_.variational())
    throw std::runtime_error("baseline model has no posterior");
  Tape& t = *b.tape;
  Expr base = enc.states;
  if (cfg_.sampling == "aggregated") {
    std::vector<double> w(enc.mask.begin(), enc.mask.end());
    base = t.weighted_mean_rows(enc.states, w);
  }
  if (cfg_.kind == "dvpg") {
    Expr lab = t.select_rows(b["label_embed"], {label});
    base = t.add(base, t.broadcast_row(lab, base.rows()));
  }
  Expr mu = t.affine(base, b["post_mu_w"], b["post_mu_b"]);
  Expr lv = t.affine(base, b["post_lv_w"], b["post_lv_b"]);
  return {mu, lv};
}

GaussianExpr Model::prior_params(Binding& b, int label, int rows) const {
  check_label(label);
  if (!cfg_.variational())
    throw std::runtime_error("baseline model has no prior");
  Tape& t = *b.tape;
  if (cfg_.kind == "vae") {
    return {t.constant(Mat::Zero(rows, cfg_.hidden)),
            t.constant(Mat::Zero(rows, cfg_.hidden))};
  }
  Expr mu = t.select_rows(b["prior_mu"], {label});
  Expr lv = t.select_rows(b["prior_lv"], {label});
  if (rows > 1) {
    mu = t.broadcast_row(mu, rows);
    lv = t.broadcast_row(lv, rows);
  }
  return {mu, lv};
}

Mat Model::draw_noise(int d, Rng& rng) const {
  int rows = cfg_.sampling == "independent" ? d : 1;
  Mat eps(rows, cfg_.hidden);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cfg_.hidden; ++j) eps(i, j) = rng.normal();
  return eps;
}

LatentSample Model::sample_z(Binding& b, const GaussianExpr& g,
                             const Mat& eps) const {
  Tape& t = *b.tape;
  if (eps.rows() != g.mean.rows() || eps.cols() != g.mean.cols())
    throw std::runtime_error("sample_z: noise shape does not match gaussian");
  Expr std = t.exp_(t.scale(g.logvar, 0.5));
  Expr values = t.add(g.mean, t.cmul(std, t.constant(eps)));
  return {cfg_.sampling, values, eps};
}

Expr Model::combine(Binding& b, const EncoderStates& enc,
                    const LatentSample& z) const {
  Tape& t = *b.tape;
  if (z.values.cols() != enc.states.cols())
    throw std::runtime_error("combine: hidden size mismatch");
  if (z.mode == "aggregated")
    return t.add(enc.states, t.broadcast_row(z.values, enc.states.rows()));
  if (z.values.rows() != enc.states.rows())
    throw std::runtime_error("combine: row count mismatch");
  return t.add(enc.states, z.values);
}

Model::StepState Model::initial_state(Binding& b, Expr states) const {
  Tape& t = *b.tape;
  std::vector<double> w(states.rows(), 1.0);
  Expr mean = t.weighted_mean_rows(states, w);
  Expr h = t.tanh_(t.affine(mean, b["init_h_w"], b["init_h_b"]));
  Expr c = t.tanh_(t.affine(mean, b["init_c_w"], b["init_c_b"]));
  return {h, c};
}

Model::StepOutput Model::decode_step(Binding& b, Expr states,
                                     const StepState& prev, int input_id,
                                     const std::vector<int>& copy_targets,
                                     int ext_size) const {
  Tape& t = *b.tape;
  int h = cfg_.hidden;
  Expr emb = t.select_rows(b["tgt_embed"], {input_id});
  Expr pre = t.add(t.affine(emb, b["dec_wx"], b["dec_b"]),
                   t.matmul(prev.h, b["dec_wh"]));
  Expr gi = t.sigmoid_(t.slice_cols(pre, 0, h));
  Expr gf = t.sigmoid_(t.slice_cols(pre, h, h));
  Expr gg = t.tanh_(t.slice_cols(pre, 2 * h, h));
  Expr go = t.sigmoid_(t.slice_cols(pre, 3 * h, h));
  Expr c = t.add(t.cmul(gf, prev.c), t.cmul(gi, gg));
  Expr hn = t.cmul(go, t.tanh_(c));

  Expr scores = t.scale(t.matmul_nt(t.matmul(hn, b["att_w"]), states),
                        1.0 / std::sqrt(double(h)));
  Expr alpha = t.softmax_rows(scores);
  Expr ctx = t.matmul(alpha, states);
  Expr a = t.tanh_(
      t.affine(t.concat_cols({hn, ctx}), b["comb_w"], b["comb_b"]));
  Expr pvocab = t.softmax_rows(t.affine(a, b["out_w"], b["out_b"]));
  Expr gate = t.sigmoid_(t.affine(a, b["gate_w"], b["gate_b"]));
  Expr dist = t.mix_copy(pvocab, alpha, gate, copy_targets, ext_size);
  return {dist, {hn, c}};
}

std::vector<Expr> Model::decode_teacher_forced(
    Binding& b, Expr states, const std::vector<int>& target_input,
    const std::vector<int>& copy_targets, int ext_size) const {
  if (target_input.size() < 2)
    throw DataError("decode: target must contain bos and eos");
  if (copy_targets.size() != static_cast<size_t>(states.rows()))
    throw DataError("decode: copy map inconsistent with source length");
  std::vector<Expr> dists;
  StepState st = initial_state(b, states);
  for (size_t k = 0; k + 1 < target_input.size(); ++k) {
    StepOutput out =
        decode_step(b, states, st, target_input[k], copy_targets, ext_size);
    dists.push_back(out.dist);
    st = out.state;
  }
  return dists;
}

Model::ExampleLoss Model::example_loss(Binding& b, const EncodedPair& ex,
                                       int loss_kind, bool bypass_latent,
                                       double coefficient,
                                       const Mat& eps) const {
  Tape& t = *b.tape;
  EncoderStates enc = encode(b, ex);
  Expr states = enc.states;
  std::optional<Expr> kl_expr;
  if (cfg_.variational() && !bypass_latent) {
    GaussianExpr q = posterior_params(b, enc, ex.label);
    GaussianExpr p = prior_params(b, ex.label, q.mean.rows());
    LatentSample z = sample_z(b, q, eps);
    states = combine(b, enc, z);
    kl_expr = kl_loss(t, loss_kind, q, p);
  }
  std::vector<Expr> dists = decode_teacher_forced(
      b, states, ex.target_input, ex.copy_targets, ex.ext_size);
  Expr ce = cross_entropy(t, dists, ex.target_gold, cfg_.normalize_ce);

  ExampleLoss out;
  out.ce = ce.value()(0, 0);
  if (kl_expr) {
    out.kl = kl_expr->value()(0, 0);
    out.total = t.add(ce, t.scale(*kl_expr, coefficient));
  } else {
    out.total = ce;
    if (!cfg_.variational()) out.kl = 0.0;
  }
  return out;
}

Expr Model::latent_states(Binding& b, const EncoderStates& enc,
                          const EncodedPair& ex, const Mat& eps) const {
  GaussianExpr g;
  if (cfg_.latent_source == "prior") {
    int rows = cfg_.sampling == "independent"
                   ? static_cast<int>(enc.states.rows())
                   : 1;
    g = prior_params(b, ex.label, rows);
  } else {
    g = posterior_params(b, enc, ex.label);
  }
  LatentSample z = sample_z(b, g, eps);
  return combine(b, enc, z);
}

Expr Model::generation_states(Binding& b, const EncodedPair& ex,
                              const Mat* eps) const {
  EncoderStates enc = encode(b, ex);
  if (!cfg_.variational() || eps == nullptr) return enc.states;
  return latent_states(b, enc, ex, *eps);
}

GenerationSet Model::beam_search(Binding& b, Expr states,
                                 const EncodedPair& ex, int beam_width,
                                 int max_steps) const {
  if (beam_width < 1 || max_steps < 1)
    throw std::runtime_error("beam_search: width and steps must be >= 1");

  struct Hyp {
    std::vector<int> ids;
    double score = 0.0;
    StepState st;
  };
  struct Expansion {
    double score;
    int token;
    int hyp_index;
  };

  std::vector<Hyp> alive;
  alive.push_back({{}, 0.0, initial_state(b, states)});
  std::vector<Hyp> done;

  for (int step = 0; step < max_steps && !alive.empty(); ++step) {
    std::vector<Expansion> expansions;
    std::vector<StepState> next_states(alive.size());
    for (size_t hi = 0; hi < alive.size(); ++hi) {
      const Hyp& hyp = alive[hi];
      int input_id = hyp.ids.empty() ? Vocabulary::kBos
                                     : (hyp.ids.back() < cfg_.vocab_size
                                            ? hyp.ids.back()
                                            : Vocabulary::kUnk);
      StepOutput out =
          decode_step(b, states, hyp.st, input_id, ex.copy_targets, ex.ext_size);
      next_states[hi] = out.state;
      const Mat& dist = out.dist.value();
      for (int tok = 0; tok < dist.cols(); ++tok) {
        double p = dist(0, tok);
        if (p <= 0.0) continue;
        expansions.push_back({hyp.score + std::log(p), tok,
                              static_cast<int>(hi)});
      }
    }
    std::sort(expansions.begin(), expansions.end(),
              [](const Expansion& a, const Expansion& c) {
                if (a.score != c.score) return a.score > c.score;
                if (a.token != c.token) return a.token < c.token;
                return a.hyp_index < c.hyp_index;
              });
    std::vector<Hyp> next;
    int taken = 0;
    for (const Expansion& e : expansions) {
      if (taken >= beam_width) break;
      ++taken;
      Hyp h = alive[e.hyp_index];
      h.score = e.score;
      h.st = next_states[e.hyp_index];
      if (e.token == Vocabulary::kEos) {
        done.push_back(std::move(h));
      } else {
        h.ids.push_back(e.token);
        next.push_back(std::move(h));
      }
    }
    alive = std::move(next);
  }
  for (Hyp& h : alive) done.push_back(std::move(h));

  std::stable_sort(done.begin(), done.end(),
                   [](const Hyp& a, const Hyp& c) { return a.score > c.score; });
  GenerationSet out;
  for (const Hyp& h : done) {
    if (static_cast<int>(out.candidates.size()) >= beam_width) break;
    out.candidates.push_back(h.ids);
    out.scores.push_back(h.score);
  }
  return out;
}

std::vector<int> Model::greedy_decode(Binding& b, Expr states,
                                      const EncodedPair& ex,
                                      int max_steps) const {
  // Stepwise argmax with the same cumulative scoring and tie rule as beam
  // search so width-1 beam search matches token for token.
  std::vector<int> ids;
  double score = 0.0;
  StepState st = initial_state(b, states);
  for (int step = 0; step < max_steps; ++step) {
    int input_id = ids.empty() ? Vocabulary::kBos
                               : (ids.back() < cfg_.vocab_size ? ids.back()
                                                               : Vocabulary::kUnk);
    StepOutput out =
        decode_step(b, states, st, input_id, ex.copy_targets, ex.ext_size);
    st = out.state;
    const Mat& dist = out.dist.value();
    int best = -1;
    double best_score = 0.0;
    for (int tok = 0; tok < dist.cols(); ++tok) {
      double p = dist(0, tok);
      if (p <= 0.0) continue;
      double s = score + std::log(p);
      if (best < 0 || s > best_score) {
        best = tok;
        best_score = s;
      }
    }
    if (best < 0 || best == Vocabulary::kEos) break;
    score = best_score;
    ids.push_back(best);
  }
  return ids;
}

Tokens Model::ids_to_tokens(const std::vector<int>& ids,
                            const Vocabulary& vocab,
                            const EncodedPair& ex) const {
  Tokens out;
  for (int id : ids) {
    if (id < vocab.size()) {
      out.push_back(vocab.token(id));
    } else {
      int pos = id - vocab.size();
      if (pos < 0 || pos >= static_cast<int>(ex.source_tokens.size()))
        throw std::runtime_error("candidate id outside extended range");
      out.push_back(ex.source_tokens[pos]);
    }
  }
  return out;
}

void Model::save_checkpoint(const std::string& path, bool with_optimizer_state,
                            const std::string& extra_json) const {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw DataError("cannot write checkpoint: " + path);
  try {
    write_i64(f, static_cast<std::int64_t>(kCheckpointMagic));
    write_i64(f, kCheckpointVersion);
    write_string(f, model_config_to_json(cfg_));
    write_string(f, extra_json);
    write_i64(f, with_optimizer_state ? 1 : 0);
    params_.write_params(f, with_optimizer_state);
  } catch (...) {
    std::fclose(f);
    throw;
  }
  std::fclose(f);
}

std::string Model::load_checkpoint(const std::string& path,
                                   bool with_optimizer_state) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw DataError("cannot read checkpoint: " + path);
  std::string extra;
  try {
    if (read_i64(f) != static_cast<std::int64_t>(kCheckpointMagic))
      throw DataError("not a model checkpoint: " + path);
    if (read_i64(f) != kCheckpointVersion)
      throw DataError("unsupported checkpoint version: " + path);
    ModelConfig stored = model_config_from_json(read_string(f));
    if (stored.kind != cfg_.kind || stored.sampling != cfg_.sampling ||
        stored.vocab_size != cfg_.vocab_size || stored.hidden != cfg_.hidden ||
        stored.embed != cfg_.embed ||
        stored.target_embed != cfg_.target_embed ||
        stored.heads != cfg_.heads || stored.proj != cfg_.proj ||
        stored.ff != cfg_.ff ||
        stored.max_source_length != cfg_.max_source_length)
      throw DataError("checkpoint was written with an incompatible config: " +
                      path);
    extra = read_string(f);
    bool has_opt = read_i64(f) != 0;
    if (with_optimizer_state && !has_opt)
      throw DataError("checkpoint lacks optimizer state: " + path);
    params_.read_params(f, has_opt);
  } catch (...) {
    std::fclose(f);
    throw;
  }
  std::fclose(f);
  return extra;
}

ModelConfig Model::peek_config(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw DataError("cannot read checkpoint: " + path);
  try {
    if (read_i64(f) != static_cast<std::int64_t>(kCheckpointMagic))
      throw DataError("not a model checkpoint: " + path);
    if (read_i64(f) != kCheckpointVersion)
      throw DataError("unsupported checkpoint version: " + path);
    ModelConfig c = model_config_from_json(read_string(f));
    std::fclose(f);
    return c;
  } catch (...) {
    std::fclose(f);
    throw;
  }
}

ModelConfig profile_config(const std::string& profile) {
  ModelConfig c;
  if (profile == "desk") {
    c.hidden = 32;
    c.embed = 32;
    c.target_embed = 32;
    c.heads = 2;
    c.proj = 32;
    c.ff = 32;
    c.beam = 4;
    c.max_decode = 13;
    c.max_source_length = 14;
  } else if (profile == "paper") {
    c.hidden = 128;
    c.embed = 768;
    c.target_embed = 768;
    c.heads = 8;
    c.proj = 256;
    c.ff = 128;
    c.beam = 16;
    c.max_decode = 13;
    c.max_source_length = 14;
  } else {
    throw ConfigError("unknown profile: " + profile +
                      " (expected desk or paper)");
  }
  return c;
}

}  // namespace dvpg
