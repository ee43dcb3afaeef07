#include "cubenmt/model.hpp"

#include <algorithm>
#include <cmath>

#include "cubenmt/rng.hpp"

namespace cubenmt {

template <class Real>
void GruWeightsT<Real>::resize(int in_dim, int hid_dim) {
  w_update = TensorT<Real>({hid_dim, in_dim});
  u_update = TensorT<Real>({hid_dim, hid_dim});
  b_update = TensorT<Real>({hid_dim});
  w_reset = TensorT<Real>({hid_dim, in_dim});
  u_reset = TensorT<Real>({hid_dim, hid_dim});
  b_reset = TensorT<Real>({hid_dim});
  w_cand = TensorT<Real>({hid_dim, in_dim});
  u_cand = TensorT<Real>({hid_dim, hid_dim});
  b_cand = TensorT<Real>({hid_dim});
}

template <class Real>
ModelParamsT<Real> ModelParamsT<Real>::sized(const ModelDims& d) {
  if (d.src_vocab < 3 || d.tgt_vocab < 3)
    throw DimensionError("vocab sizes must cover the reserved tokens");
  if (d.d_emb <= 0 || d.d_hid <= 0 || d.d_att <= 0 || d.d_readout <= 0)
    throw DimensionError("model dimensions must be positive");
  ModelParamsT<Real> p;
  p.dims = d;
  p.emb_src = TensorT<Real>({d.src_vocab, d.d_emb});
  p.emb_tgt = TensorT<Real>({d.tgt_vocab, d.d_emb});
  p.enc_fwd.resize(d.d_emb, d.d_hid);
  p.enc_bwd.resize(d.d_emb, d.d_hid);
  p.init_proj = TensorT<Real>({d.d_hid, 2 * d.d_hid});
  p.att_query_w = TensorT<Real>({d.d_att, d.d_hid});
  p.att_enc_w = TensorT<Real>({d.d_att, 2 * d.d_hid});
  p.att_score_v = TensorT<Real>({d.d_att});
  p.dec_word_gru.resize(d.d_emb, d.d_hid);
  p.dec_ctx_gru.resize(2 * d.d_hid, d.d_hid);
  p.readout_w = TensorT<Real>({d.d_readout, d.d_emb + 2 * d.d_hid + d.d_hid});
  p.readout_b = TensorT<Real>({d.d_readout});
  p.out_proj = TensorT<Real>({d.tgt_vocab, d.d_readout});
  return p;
}

template <class Real>
void ModelParamsT<Real>::init_uniform(uint32_t seed, double range) {
  Rng rng(seed);
  for_each([&](const std::string&, TensorT<Real>& t) {
    for (Real& v : t.data)
      v = static_cast<Real>(rng.uniform(-static_cast<float>(range), static_cast<float>(range)));
  });
}

template <class Real>
void ModelParamsT<Real>::zero() {
  for_each([](const std::string&, TensorT<Real>& t) { t.fill(Real(0)); });
}

template <class Real>
int64_t ModelParamsT<Real>::parameter_count() const {
  int64_t n = 0;
  for_each([&](const std::string&, const TensorT<Real>& t) { n += t.size(); });
  return n;
}

ModelParamsT<double> to_double(const ModelParams& p) {
  ModelParamsT<double> out = ModelParamsT<double>::sized(p.dims);
  std::vector<const Tensor*> flat;
  p.for_each([&](const std::string&, const Tensor& t) { flat.push_back(&t); });
  size_t k = 0;
  out.for_each([&](const std::string&, TensorT<double>& t) {
    const Tensor& s = *flat[k++];
    for (size_t i = 0; i < t.data.size(); ++i) t.data[i] = static_cast<double>(s.data[i]);
  });
  return out;
}

// ---------------------------------------------------------------------------
// GRU
// ---------------------------------------------------------------------------

namespace {

template <class Real>
void gru_gates(const GruWeightsT<Real>& w, const Real* x, const Real* h,
               TensorT<Real>& update, TensorT<Real>& reset, TensorT<Real>& reset_state,
               TensorT<Real>& cand, TensorT<Real>& state) {
  const int d = w.hidden_dim();
  update = w.b_update;
  matvec_add(w.w_update, x, update.data.data());
  matvec_add(w.u_update, h, update.data.data());
  reset = w.b_reset;
  matvec_add(w.w_reset, x, reset.data.data());
  matvec_add(w.u_reset, h, reset.data.data());
  for (int i = 0; i < d; ++i) {
    update[i] = stable_sigmoid(update[i]);
    reset[i] = stable_sigmoid(reset[i]);
  }
  reset_state = TensorT<Real>({d});
  for (int i = 0; i < d; ++i) reset_state[i] = reset[i] * h[i];
  cand = w.b_cand;
  matvec_add(w.w_cand, x, cand.data.data());
  matvec_add(w.u_cand, reset_state.data.data(), cand.data.data());
  for (int i = 0; i < d; ++i) cand[i] = static_cast<Real>(std::tanh(static_cast<double>(cand[i])));
  state = TensorT<Real>({d});
  for (int i = 0; i < d; ++i)
    state[i] = (Real(1) - update[i]) * cand[i] + update[i] * h[i];
}

}  // namespace

template <class Real>
TensorT<Real> gru_step(const GruWeightsT<Real>& w, const TensorT<Real>& input,
                       const TensorT<Real>& prev_state) {
  if (input.ndim() != 1 || input.shape[0] != w.input_dim())
    throw DimensionError("gru_step: input length does not match the cell");
  if (prev_state.ndim() != 1 || prev_state.shape[0] != w.hidden_dim())
    throw DimensionError("gru_step: state length does not match the cell");
  TensorT<Real> update, reset, reset_state, cand, state;
  gru_gates(w, input.data.data(), prev_state.data.data(), update, reset, reset_state, cand, state);
  return state;
}

template <class Real>
const TensorT<Real>& gru_step_cached(const GruWeightsT<Real>& w, TensorT<Real> input,
                                     TensorT<Real> prev_state, GruStepCache<Real>& cache) {
  cache.input = std::move(input);
  cache.prev_state = std::move(prev_state);
  gru_gates(w, cache.input.data.data(), cache.prev_state.data.data(), cache.update, cache.reset,
            cache.reset_state, cache.cand, cache.state);
  return cache.state;
}

// ---------------------------------------------------------------------------
// Encoder
// ---------------------------------------------------------------------------

namespace {

template <class Real>
TensorT<Real> embedding_row(const TensorT<Real>& emb, int word, const char* side) {
  if (word < 0 || word >= emb.rows())
    throw VocabError(std::string(side) + " word index " + std::to_string(word) +
                     " outside vocabulary of size " + std::to_string(emb.rows()));
  TensorT<Real> out({emb.cols()});
  std::copy(emb.row_ptr(word), emb.row_ptr(word) + emb.cols(), out.data.begin());
  return out;
}

template <class Real>
SourceEncodingT<Real> encode_impl(const ModelParamsT<Real>& p, const std::vector<int>& src,
                                  EncodeCache<Real>* cache) {
  if (src.empty()) throw InputError("encode: empty source sentence");
  const int m = static_cast<int>(src.size());
  const int d = p.dims.d_hid;

  std::vector<TensorT<Real>> fwd(m), bwd(m);
  EncodeCache<Real> local;
  EncodeCache<Real>& c = cache ? *cache : local;
  c.fwd.assign(m, {});
  c.bwd.assign(m, {});

  TensorT<Real> state({d});
  for (int i = 0; i < m; ++i) {
    fwd[i] = gru_step_cached(p.enc_fwd, embedding_row(p.emb_src, src[i], "source"), state, c.fwd[i]);
    state = fwd[i];
  }
  state = TensorT<Real>({d});
  for (int i = m - 1; i >= 0; --i) {
    bwd[i] = gru_step_cached(p.enc_bwd, embedding_row(p.emb_src, src[i], "source"), state, c.bwd[i]);
    state = bwd[i];
  }

  SourceEncodingT<Real> enc;
  enc.states = TensorT<Real>({m, 2 * d});
  for (int i = 0; i < m; ++i) {
    std::copy(fwd[i].data.begin(), fwd[i].data.end(), enc.states.row_ptr(i));
    std::copy(bwd[i].data.begin(), bwd[i].data.end(), enc.states.row_ptr(i) + d);
  }
  enc.att_cache = TensorT<Real>({m, p.dims.d_att});
  for (int i = 0; i < m; ++i)
    matvec(p.att_enc_w, enc.states.row_ptr(i), enc.att_cache.row_ptr(i));
  return enc;
}

}  // namespace

template <class Real>
SourceEncodingT<Real> encode(const ModelParamsT<Real>& p, const std::vector<int>& src) {
  return encode_impl(p, src, static_cast<EncodeCache<Real>*>(nullptr));
}

template <class Real>
SourceEncodingT<Real> encode_cached(const ModelParamsT<Real>& p, const std::vector<int>& src,
                                    EncodeCache<Real>& cache) {
  return encode_impl(p, src, &cache);
}

// ---------------------------------------------------------------------------
// Attention
// ---------------------------------------------------------------------------

template <class Real>
void attention_cached(const ModelParamsT<Real>& p, const SourceEncodingT<Real>& enc,
                      const TensorT<Real>& query, AttentionCache<Real>& cache) {
  if (query.ndim() != 1 || query.shape[0] != p.dims.d_hid)
    throw DimensionError("attention: query must have length d_hid");
  const int m = enc.length();
  const int da = p.dims.d_att;
  const int dh2 = 2 * p.dims.d_hid;

  cache.query = query;
  cache.query_proj = TensorT<Real>({da});
  matvec(p.att_query_w, query.data.data(), cache.query_proj.data.data());

  cache.scores_tanh = TensorT<Real>({m, da});
  TensorT<Real> scores({m});
  for (int i = 0; i < m; ++i) {
    Real* u = cache.scores_tanh.row_ptr(i);
    const Real* uh = enc.att_cache.row_ptr(i);
    for (int j = 0; j < da; ++j)
      u[j] = static_cast<Real>(std::tanh(static_cast<double>(cache.query_proj[j] + uh[j])));
    scores[i] = dot(p.att_score_v.data.data(), u, da);
  }
  cache.weights = softmax(scores);

  cache.context = TensorT<Real>({dh2});
  for (int i = 0; i < m; ++i)
    axpy(cache.weights[i], enc.states.row_ptr(i), cache.context.data.data(), dh2);
}

template <class Real>
std::pair<TensorT<Real>, TensorT<Real>> attention(const ModelParamsT<Real>& p,
                                                  const SourceEncodingT<Real>& enc,
                                                  const TensorT<Real>& query) {
  AttentionCache<Real> cache;
  attention_cached(p, enc, query, cache);
  return {std::move(cache.context), std::move(cache.weights)};
}

// ---------------------------------------------------------------------------
// Decoder
// ---------------------------------------------------------------------------

template <class Real>
TensorT<Real> init_decoder_state(const ModelParamsT<Real>& p, const SourceEncodingT<Real>& enc) {
  TensorT<Real> s0({p.dims.d_hid});
  matvec(p.init_proj, enc.states.row_ptr(0), s0.data.data());
  for (Real& v : s0.data) v = static_cast<Real>(std::tanh(static_cast<double>(v)));
  return s0;
}

namespace {

template <class Real>
void decoder_core(const ModelParamsT<Real>& p, const SourceEncodingT<Real>& enc, int prev_word,
                  const TensorT<Real>& prev_state, DecodeStepCache<Real>& c) {
  if (prev_word < 0 || prev_word >= p.dims.tgt_vocab)
    throw VocabError("target word index " + std::to_string(prev_word) +
                     " outside vocabulary of size " + std::to_string(p.dims.tgt_vocab));
  c.prev_word = prev_word;
  TensorT<Real> emb = embedding_row(p.emb_tgt, prev_word, "target");

  // Intermediate state from the previous word, attention queried with it,
  // then the context-driven cell produces the next state.
  gru_step_cached(p.dec_word_gru, emb, prev_state, c.word_gru);
  attention_cached(p, enc, c.word_gru.state, c.att);
  gru_step_cached(p.dec_ctx_gru, c.att.context, c.word_gru.state, c.ctx_gru);

  const int de = p.dims.d_emb, dh = p.dims.d_hid, dh2 = 2 * dh;
  c.readout_in = TensorT<Real>({de + dh2 + dh});
  std::copy(emb.data.begin(), emb.data.end(), c.readout_in.data.begin());
  std::copy(c.att.context.data.begin(), c.att.context.data.end(), c.readout_in.data.begin() + de);
  std::copy(c.ctx_gru.state.data.begin(), c.ctx_gru.state.data.end(),
            c.readout_in.data.begin() + de + dh2);

  c.readout = p.readout_b;
  matvec_add(p.readout_w, c.readout_in.data.data(), c.readout.data.data());

  c.logits = TensorT<Real>({p.dims.tgt_vocab});
  matvec(p.out_proj, c.readout.data.data(), c.logits.data.data());
}

}  // namespace

template <class Real>
StepOutputT<Real> decode_step(const ModelParamsT<Real>& p, const SourceEncodingT<Real>& enc,
                              int prev_word, const TensorT<Real>& prev_state, ScoreMode mode,
                              PhaseTimers* timers) {
  if (prev_word < 0 || prev_word >= p.dims.tgt_vocab)
    throw VocabError("target word index " + std::to_string(prev_word) +
                     " outside vocabulary of size " + std::to_string(p.dims.tgt_vocab));

  Clock::time_point t0, t1;
  if (timers) t0 = Clock::now();

  TensorT<Real> emb = embedding_row(p.emb_tgt, prev_word, "target");
  GruStepCache<Real> word_gru, ctx_gru;
  AttentionCache<Real> att;
  gru_step_cached(p.dec_word_gru, std::move(emb), prev_state, word_gru);
  attention_cached(p, enc, word_gru.state, att);
  gru_step_cached(p.dec_ctx_gru, att.context, word_gru.state, ctx_gru);

  if (timers) {
    t1 = Clock::now();
    timers->recurrence_ms += elapsed_ms(t0, t1);
    t0 = t1;
  }

  const int de = p.dims.d_emb, dh = p.dims.d_hid, dh2 = 2 * dh;
  TensorT<Real> readout_in({de + dh2 + dh});
  std::copy(word_gru.input.data.begin(), word_gru.input.data.end(), readout_in.data.begin());
  std::copy(att.context.data.begin(), att.context.data.end(), readout_in.data.begin() + de);
  std::copy(ctx_gru.state.data.begin(), ctx_gru.state.data.end(),
            readout_in.data.begin() + de + dh2);
  TensorT<Real> readout = p.readout_b;
  matvec_add(p.readout_w, readout_in.data.data(), readout.data.data());

  if (timers) {
    t1 = Clock::now();
    timers->readout_ms += elapsed_ms(t0, t1);
    t0 = t1;
  }

  StepOutputT<Real> out;
  out.word_nll = TensorT<Real>({p.dims.tgt_vocab});
  matvec(p.out_proj, readout.data.data(), out.word_nll.data.data());

  if (timers) {
    t1 = Clock::now();
    timers->projection_ms += elapsed_ms(t0, t1);
    t0 = t1;
  }

  if (mode == ScoreMode::normalized) {
    const Real log_z = log_sum_exp(out.word_nll.data.data(), p.dims.tgt_vocab);
    for (Real& v : out.word_nll.data) v = log_z - v;
    if (timers) {
      t1 = Clock::now();
      timers->normalization_ms += elapsed_ms(t0, t1);
    }
  } else {
    // Trained-normalizer scores stand in for log-probabilities directly.
    for (Real& v : out.word_nll.data) v = -v;
  }

  out.next_state = std::move(ctx_gru.state);
  out.attention = std::move(att.weights);
  return out;
}

template <class Real>
const TensorT<Real>& decode_step_cached(const ModelParamsT<Real>& p,
                                        const SourceEncodingT<Real>& enc, int prev_word,
                                        const TensorT<Real>& prev_state,
                                        DecodeStepCache<Real>& cache) {
  decoder_core(p, enc, prev_word, prev_state, cache);
  cache.log_z = log_sum_exp(cache.logits.data.data(), p.dims.tgt_vocab);
  cache.probs = TensorT<Real>({p.dims.tgt_vocab});
  for (int i = 0; i < p.dims.tgt_vocab; ++i)
    cache.probs[i] = static_cast<Real>(std::exp(static_cast<double>(cache.logits[i] - cache.log_z)));
  return cache.ctx_gru.state;
}

// ---------------------------------------------------------------------------

template struct GruWeightsT<float>;
template struct GruWeightsT<double>;
template struct ModelParamsT<float>;
template struct ModelParamsT<double>;

template TensorT<float> gru_step(const GruWeightsT<float>&, const TensorT<float>&,
                                 const TensorT<float>&);
template TensorT<double> gru_step(const GruWeightsT<double>&, const TensorT<double>&,
                                  const TensorT<double>&);
template const TensorT<float>& gru_step_cached(const GruWeightsT<float>&, TensorT<float>,
                                               TensorT<float>, GruStepCache<float>&);
template const TensorT<double>& gru_step_cached(const GruWeightsT<double>&, TensorT<double>,
                                                TensorT<double>, GruStepCache<double>&);
template SourceEncodingT<float> encode(const ModelParamsT<float>&, const std::vector<int>&);
template SourceEncodingT<double> encode(const ModelParamsT<double>&, const std::vector<int>&);
template SourceEncodingT<float> encode_cached(const ModelParamsT<float>&, const std::vector<int>&,
                                              EncodeCache<float>&);
template SourceEncodingT<double> encode_cached(const ModelParamsT<double>&,
                                               const std::vector<int>&, EncodeCache<double>&);
template void attention_cached(const ModelParamsT<float>&, const SourceEncodingT<float>&,
                               const TensorT<float>&, AttentionCache<float>&);
template void attention_cached(const ModelParamsT<double>&, const SourceEncodingT<double>&,
                               const TensorT<double>&, AttentionCache<double>&);
template std::pair<TensorT<float>, TensorT<float>> attention(const ModelParamsT<float>&,
                                                             const SourceEncodingT<float>&,
                                                             const TensorT<float>&);
template std::pair<TensorT<double>, TensorT<double>> attention(const ModelParamsT<double>&,
                                                               const SourceEncodingT<double>&,
                                                               const TensorT<double>&);
template TensorT<float> init_decoder_state(const ModelParamsT<float>&,
                                           const SourceEncodingT<float>&);
template TensorT<double> init_decoder_state(const ModelParamsT<double>&,
                                            const SourceEncodingT<double>&);
template StepOutputT<float> decode_step(const ModelParamsT<float>&, const SourceEncodingT<float>&,
                                        int, const TensorT<float>&, ScoreMode, PhaseTimers*);
template StepOutputT<double> decode_step(const ModelParamsT<double>&,
                                         const SourceEncodingT<double>&, int,
                                         const TensorT<double>&, ScoreMode, PhaseTimers*);
template const TensorT<float>& decode_step_cached(const ModelParamsT<float>&,
                                                  const SourceEncodingT<float>&, int,
                                                  const TensorT<float>&, DecodeStepCache<float>&);
template const TensorT<double>& decode_step_cached(const ModelParamsT<double>&,
                                                   const SourceEncodingT<double>&, int,
                                                   const TensorT<double>&,
                                                   DecodeStepCache<double>&);

}  // namespace cubenmt
