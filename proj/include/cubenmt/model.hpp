#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cubenmt/metrics.hpp"
#include "cubenmt/tensor.hpp"

namespace cubenmt {

// All tensor extents of one model. Everything else is derived from these.
struct ModelDims {
  int src_vocab = 0;
  int tgt_vocab = 0;
  int d_emb = 32;
  int d_hid = 64;
  int d_att = 64;
  int d_readout = 32;

  bool operator==(const ModelDims&) const = default;
};

// One GRU cell: update gate z, reset gate r, candidate state n.
//   z = sigmoid(Wz x + Uz h + bz)
//   r = sigmoid(Wr x + Ur h + br)
//   n = tanh(Wh x + Uh (r*h) + bh)
//   h' = (1-z)*n + z*h
template <class Real>
struct GruWeightsT {
  TensorT<Real> w_update, u_update, b_update;
  TensorT<Real> w_reset, u_reset, b_reset;
  TensorT<Real> w_cand, u_cand, b_cand;

  void resize(int in_dim, int hid_dim);
  int input_dim() const { return w_update.cols(); }
  int hidden_dim() const { return w_update.rows(); }

  template <class Fn>
  void for_each(const std::string& prefix, Fn&& fn) {
    fn(prefix + ".w_update", w_update);
    fn(prefix + ".u_update", u_update);
    fn(prefix + ".b_update", b_update);
    fn(prefix + ".w_reset", w_reset);
    fn(prefix + ".u_reset", u_reset);
    fn(prefix + ".b_reset", b_reset);
    fn(prefix + ".w_cand", w_cand);
    fn(prefix + ".u_cand", u_cand);
    fn(prefix + ".b_cand", b_cand);
  }
};

// Every weight tensor of the encoder-decoder in one container. Immutable
// during inference; the trainer owns the only mutating path.
template <class Real>
struct ModelParamsT {
  ModelDims dims;

  TensorT<Real> emb_src;  // src_vocab x d_emb
  TensorT<Real> emb_tgt;  // tgt_vocab x d_emb
  GruWeightsT<Real> enc_fwd, enc_bwd;
  TensorT<Real> init_proj;    // d_hid x 2*d_hid, builds s0 from the first encoder state
  TensorT<Real> att_query_w;  // d_att x d_hid
  TensorT<Real> att_enc_w;    // d_att x 2*d_hid
  TensorT<Real> att_score_v;  // d_att
  GruWeightsT<Real> dec_word_gru;  // consumes the previous word embedding
  GruWeightsT<Real> dec_ctx_gru;   // consumes the attention context
  TensorT<Real> readout_w;  // d_readout x (d_emb + 2*d_hid + d_hid)
  TensorT<Real> readout_b;  // d_readout
  TensorT<Real> out_proj;   // tgt_vocab x d_readout

  static ModelParamsT sized(const ModelDims& d);

  // Visits every tensor in a fixed order; the weight file, the optimizer
  // state and the gradient container all share this order.
  template <class Fn>
  void for_each(Fn&& fn) {
    fn("emb_src", emb_src);
    fn("emb_tgt", emb_tgt);
    enc_fwd.for_each("enc_fwd", fn);
    enc_bwd.for_each("enc_bwd", fn);
    fn("init_proj", init_proj);
    fn("att_query_w", att_query_w);
    fn("att_enc_w", att_enc_w);
    fn("att_score_v", att_score_v);
    dec_word_gru.for_each("dec_word_gru", fn);
    dec_ctx_gru.for_each("dec_ctx_gru", fn);
    fn("readout_w", readout_w);
    fn("readout_b", readout_b);
    fn("out_proj", out_proj);
  }
  template <class Fn>
  void for_each(Fn&& fn) const {
    const_cast<ModelParamsT*>(this)->for_each(
        [&](const std::string& name, TensorT<Real>& t) {
          fn(name, const_cast<const TensorT<Real>&>(t));
        });
  }

  void init_uniform(uint32_t seed, double range = 0.1);
  void zero();
  int64_t parameter_count() const;
};

using ModelParams = ModelParamsT<float>;

// Widening copy, used by 64-bit verification paths.
ModelParamsT<double> to_double(const ModelParams& p);

enum class ScoreMode { normalized, self_normalized };

// Per-sentence encoder output: concatenated bidirectional states plus the
// attention-side projection of every state, computed once per sentence.
template <class Real>
struct SourceEncodingT {
  TensorT<Real> states;     // |x| x 2*d_hid
  TensorT<Real> att_cache;  // |x| x d_att
  int length() const { return states.rows(); }
};

using SourceEncoding = SourceEncodingT<float>;

// Output of one decoder step.
template <class Real>
struct StepOutputT {
  TensorT<Real> next_state;  // d_hid
  TensorT<Real> word_nll;    // tgt_vocab; negative log scores per word
  TensorT<Real> attention;   // |x|
};

using StepOutput = StepOutputT<float>;

// ---------------------------------------------------------------------------
// Forward operations.
// ---------------------------------------------------------------------------

template <class Real>
TensorT<Real> gru_step(const GruWeightsT<Real>& w, const TensorT<Real>& input,
                       const TensorT<Real>& prev_state);

template <class Real>
SourceEncodingT<Real> encode(const ModelParamsT<Real>& p, const std::vector<int>& src);

// Returns (context, weights) for one query state.
template <class Real>
std::pair<TensorT<Real>, TensorT<Real>> attention(const ModelParamsT<Real>& p,
                                                  const SourceEncodingT<Real>& enc,
                                                  const TensorT<Real>& query);

// s0 = tanh(init_proj * h_1) where h_1 is the first concatenated encoder state.
template <class Real>
TensorT<Real> init_decoder_state(const ModelParamsT<Real>& p, const SourceEncodingT<Real>& enc);

template <class Real>
StepOutputT<Real> decode_step(const ModelParamsT<Real>& p, const SourceEncodingT<Real>& enc,
                              int prev_word, const TensorT<Real>& prev_state, ScoreMode mode,
                              PhaseTimers* timers = nullptr);

// ---------------------------------------------------------------------------
// Cached forward variants. They keep every intermediate the backward pass
// needs; the trainer is their only client.
// ---------------------------------------------------------------------------

template <class Real>
struct GruStepCache {
  TensorT<Real> input, prev_state;
  TensorT<Real> update, reset, reset_state, cand, state;
};

template <class Real>
const TensorT<Real>& gru_step_cached(const GruWeightsT<Real>& w, TensorT<Real> input,
                                     TensorT<Real> prev_state, GruStepCache<Real>& cache);

template <class Real>
struct EncodeCache {
  std::vector<GruStepCache<Real>> fwd, bwd;
};

template <class Real>
SourceEncodingT<Real> encode_cached(const ModelParamsT<Real>& p, const std::vector<int>& src,
                                    EncodeCache<Real>& cache);

template <class Real>
struct AttentionCache {
  TensorT<Real> query, query_proj;  // d_hid, d_att
  TensorT<Real> scores_tanh;        // |x| x d_att
  TensorT<Real> weights;            // |x|
  TensorT<Real> context;            // 2*d_hid
};

template <class Real>
void attention_cached(const ModelParamsT<Real>& p, const SourceEncodingT<Real>& enc,
                      const TensorT<Real>& query, AttentionCache<Real>& cache);

template <class Real>
struct DecodeStepCache {
  int prev_word = -1;
  GruStepCache<Real> word_gru;
  AttentionCache<Real> att;
  GruStepCache<Real> ctx_gru;
  TensorT<Real> readout_in;  // d_emb + 2*d_hid + d_hid
  TensorT<Real> readout;     // d_readout
  TensorT<Real> logits;      // tgt_vocab
  TensorT<Real> probs;       // tgt_vocab
  Real log_z = Real(0);
};

// Runs one teacher-forced decoder step and fills the cache. Returns the next
// hidden state (alias of cache.ctx_gru.state).
template <class Real>
const TensorT<Real>& decode_step_cached(const ModelParamsT<Real>& p,
                                        const SourceEncodingT<Real>& enc, int prev_word,
                                        const TensorT<Real>& prev_state,
                                        DecodeStepCache<Real>& cache);

}  // namespace cubenmt
