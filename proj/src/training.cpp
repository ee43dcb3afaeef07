#include "cubenmt/training.hpp"

#include <algorithm>
#include <cmath>

#include "cubenmt/decoder.hpp"
#include "cubenmt/rng.hpp"

namespace cubenmt {

void TrainConfig::validate() const {
  if (alpha < 0.0f) throw InputError("alpha must be >= 0");
  if (clip_norm <= 0.0f) throw InputError("clip_norm must be > 0");
  if (!(rho > 0.0f && rho < 1.0f)) throw InputError("rho must lie in (0,1)");
  if (epsilon <= 0.0f) throw InputError("epsilon must be > 0");
  if (batch_size < 1) throw InputError("batch_size must be >= 1");
  if (max_epochs < 1) throw InputError("max_epochs must be >= 1");
  if (d_emb < 1 || d_hid < 1) throw InputError("model dimensions must be >= 1");
}

SyntheticTask::Kind task_kind_from_name(const std::string& name) {
  if (name == "copy") return SyntheticTask::Kind::copy;
  if (name == "reverse") return SyntheticTask::Kind::reverse;
  throw InputError("unknown task kind '" + name + "'");
}

TaskData generate_task(const SyntheticTask& task) {
  if (task.vocab_size < 4) throw InputError("synthetic task needs at least one content word");
  if (task.min_len < 1 || task.max_len < task.min_len)
    throw InputError("invalid synthetic length range");
  if (task.count < 1) throw InputError("synthetic task needs at least one pair");

  TaskData data;
  data.vocab = Vocabulary::with_generated_words(task.vocab_size);
  Rng rng(task.seed);
  const int content = task.vocab_size - 3;

  std::vector<SentencePair> pairs;
  pairs.reserve(static_cast<size_t>(task.count));
  for (int c = 0; c < task.count; ++c) {
    const int len = task.min_len + rng.below(task.max_len - task.min_len + 1);
    SentencePair pair;
    pair.source.reserve(static_cast<size_t>(len));
    for (int i = 0; i < len; ++i) pair.source.push_back(3 + rng.below(content));
    pair.target = pair.source;
    if (task.kind == SyntheticTask::Kind::reverse)
      std::reverse(pair.target.begin(), pair.target.end());
    pairs.push_back(std::move(pair));
  }

  const int heldout = task.count >= 10 ? task.count / 10 : 0;
  const int split = task.count - heldout;
  data.train.assign(pairs.begin(), pairs.begin() + split);
  data.heldout.assign(pairs.begin() + split, pairs.end());
  return data;
}

std::vector<int> with_eos(std::vector<int> words) {
  words.push_back(Vocabulary::kEos);
  return words;
}

namespace {

template <class Real>
void check_target(const ModelParamsT<Real>& p, const std::vector<int>& tgt) {
  if (tgt.empty()) throw InputError("empty target sentence");
  if (tgt.back() != Vocabulary::kEos) throw InputError("target must end with EOS");
  for (int w : tgt)
    if (w < 0 || w >= p.dims.tgt_vocab)
      throw VocabError("target word " + std::to_string(w) + " outside vocabulary");
}

// Runs the teacher-forced chain; returns per-step caches.
template <class Real>
Real forced_loss(const ModelParamsT<Real>& p, const SourceEncodingT<Real>& enc,
                 const std::vector<int>& tgt, Real alpha,
                 std::vector<DecodeStepCache<Real>>* caches) {
  const int n = static_cast<int>(tgt.size());
  if (caches) caches->assign(static_cast<size_t>(n), {});
  std::vector<DecodeStepCache<Real>> local;
  if (!caches) local.assign(1, {});

  TensorT<Real> state = init_decoder_state(p, enc);
  double loss = 0.0;
  for (int j = 0; j < n; ++j) {
    DecodeStepCache<Real>& c = caches ? (*caches)[static_cast<size_t>(j)] : local[0];
    const int prev = j == 0 ? Vocabulary::kBos : tgt[static_cast<size_t>(j - 1)];
    decode_step_cached(p, enc, prev, state, c);
    const double log_z = static_cast<double>(c.log_z);
    loss += log_z - static_cast<double>(c.logits[tgt[static_cast<size_t>(j)]]);
    loss += static_cast<double>(alpha) * log_z * log_z;
    state = c.ctx_gru.state;
  }
  return static_cast<Real>(loss);
}

// Backward through one GRU step. d_state is dL/d(new state); gradients go to
// gw; returns input and carried-state gradients through the out parameters.
template <class Real>
void gru_backward(const GruWeightsT<Real>& w, const GruStepCache<Real>& c,
                  const TensorT<Real>& d_state, GruWeightsT<Real>& gw, TensorT<Real>& d_input,
                  TensorT<Real>& d_prev) {
  const int d = w.hidden_dim();
  const Real* h = c.prev_state.data.data();
  const Real* z = c.update.data.data();
  const Real* r = c.reset.data.data();
  const Real* n = c.cand.data.data();

  TensorT<Real> da_n({d}), da_z({d}), da_r({d}), dh({d}), drh({d});
  for (int i = 0; i < d; ++i) {
    const Real ds = d_state[i];
    const Real dn = ds * (Real(1) - z[i]);
    da_n[i] = dn * (Real(1) - n[i] * n[i]);
    const Real dz = ds * (h[i] - n[i]);
    da_z[i] = dz * z[i] * (Real(1) - z[i]);
    dh[i] = ds * z[i];
  }
  drh.fill(Real(0));
  mat_tvec_add(w.u_cand, da_n.data.data(), drh.data.data());
  for (int i = 0; i < d; ++i) {
    const Real dr = drh[i] * h[i];
    da_r[i] = dr * r[i] * (Real(1) - r[i]);
    dh[i] += drh[i] * r[i];
  }

  outer_add(gw.w_cand, da_n.data.data(), c.input.data.data());
  outer_add(gw.u_cand, da_n.data.data(), c.reset_state.data.data());
  axpy(Real(1), da_n.data.data(), gw.b_cand.data.data(), d);
  outer_add(gw.w_update, da_z.data.data(), c.input.data.data());
  outer_add(gw.u_update, da_z.data.data(), h);
  axpy(Real(1), da_z.data.data(), gw.b_update.data.data(), d);
  outer_add(gw.w_reset, da_r.data.data(), c.input.data.data());
  outer_add(gw.u_reset, da_r.data.data(), h);
  axpy(Real(1), da_r.data.data(), gw.b_reset.data.data(), d);

  d_input = TensorT<Real>({w.input_dim()});
  mat_tvec_add(w.w_cand, da_n.data.data(), d_input.data.data());
  mat_tvec_add(w.w_update, da_z.data.data(), d_input.data.data());
  mat_tvec_add(w.w_reset, da_r.data.data(), d_input.data.data());

  mat_tvec_add(w.u_update, da_z.data.data(), dh.data.data());
  mat_tvec_add(w.u_reset, da_r.data.data(), dh.data.data());
  d_prev = std::move(dh);
}

// Backward through one attention application. d_context is dL/d(context);
// adds into the weight gradients, the query gradient and the per-position
// encoder-state gradients.
template <class Real>
void attention_backward(const ModelParamsT<Real>& p, const SourceEncodingT<Real>& enc,
                        const AttentionCache<Real>& c, const TensorT<Real>& d_context,
                        ModelParamsT<Real>& g, TensorT<Real>& d_query, TensorT<Real>& d_enc) {
  const int m = enc.length();
  const int da = p.dims.d_att;
  const int dh2 = 2 * p.dims.d_hid;

  TensorT<Real> d_alpha({m});
  for (int i = 0; i < m; ++i) {
    d_alpha[i] = dot(d_context.data.data(), enc.states.row_ptr(i), dh2);
    axpy(c.weights[i], d_context.data.data(), d_enc.row_ptr(i), dh2);
  }
  double mix = 0.0;
  for (int i = 0; i < m; ++i)
    mix += static_cast<double>(c.weights[i]) * static_cast<double>(d_alpha[i]);

  TensorT<Real> d_query_proj({da});
  TensorT<Real> d_pre({da});
  for (int i = 0; i < m; ++i) {
    const Real d_score = c.weights[i] * (d_alpha[i] - static_cast<Real>(mix));
    const Real* u = c.scores_tanh.row_ptr(i);
    axpy(d_score, u, g.att_score_v.data.data(), da);
    for (int j = 0; j < da; ++j)
      d_pre[j] = d_score * (Real(1) - u[j] * u[j]) * p.att_score_v[j];
    axpy(Real(1), d_pre.data.data(), d_query_proj.data.data(), da);
    outer_add(g.att_enc_w, d_pre.data.data(), enc.states.row_ptr(i));
    mat_tvec_add(p.att_enc_w, d_pre.data.data(), d_enc.row_ptr(i));
  }
  outer_add(g.att_query_w, d_query_proj.data.data(), c.query.data.data());
  mat_tvec_add(p.att_query_w, d_query_proj.data.data(), d_query.data.data());
}

}  // namespace

template <class Real>
Real ce_loss(const ModelParamsT<Real>& p, const std::vector<int>& src,
             const std::vector<int>& tgt_with_eos) {
  return sn_loss(p, src, tgt_with_eos, Real(0));
}

template <class Real>
Real sn_loss(const ModelParamsT<Real>& p, const std::vector<int>& src,
             const std::vector<int>& tgt_with_eos, Real alpha) {
  check_target(p, tgt_with_eos);
  const SourceEncodingT<Real> enc = encode(p, src);
  return forced_loss(p, enc, tgt_with_eos, alpha,
                     static_cast<std::vector<DecodeStepCache<Real>>*>(nullptr));
}

template <class Real>
Real seq_loss_grad(const ModelParamsT<Real>& p, const std::vector<int>& src,
                   const std::vector<int>& tgt_with_eos, Real alpha, ModelParamsT<Real>& g) {
  check_target(p, tgt_with_eos);
  const int n = static_cast<int>(tgt_with_eos.size());
  const int m = static_cast<int>(src.size());
  const int dh = p.dims.d_hid;
  const int de = p.dims.d_emb;
  const int dh2 = 2 * dh;
  const int v = p.dims.tgt_vocab;

  EncodeCache<Real> enc_cache;
  const SourceEncodingT<Real> enc = encode_cached(p, src, enc_cache);
  const TensorT<Real> s0 = init_decoder_state(p, enc);

  std::vector<DecodeStepCache<Real>> steps;
  const Real loss = forced_loss(p, enc, tgt_with_eos, alpha, &steps);

  TensorT<Real> d_state({dh});
  TensorT<Real> d_enc({m, dh2});

  TensorT<Real> d_logits({v}), d_readout({p.dims.d_readout});
  for (int j = n - 1; j >= 0; --j) {
    const DecodeStepCache<Real>& c = steps[static_cast<size_t>(j)];
    const int y_true = tgt_with_eos[static_cast<size_t>(j)];

    const Real z_gain = Real(1) + Real(2) * alpha * c.log_z;
    for (int i = 0; i < v; ++i) d_logits[i] = c.probs[i] * z_gain;
    d_logits[y_true] -= Real(1);

    outer_add(g.out_proj, d_logits.data.data(), c.readout.data.data());
    d_readout.fill(Real(0));
    mat_tvec_add(p.out_proj, d_logits.data.data(), d_readout.data.data());

    outer_add(g.readout_w, d_readout.data.data(), c.readout_in.data.data());
    axpy(Real(1), d_readout.data.data(), g.readout_b.data.data(), p.dims.d_readout);
    TensorT<Real> d_concat({de + dh2 + dh});
    mat_tvec_add(p.readout_w, d_readout.data.data(), d_concat.data.data());

    TensorT<Real> d_emb({de}), d_ctx({dh2}), d_s({dh});
    std::copy(d_concat.data.begin(), d_concat.data.begin() + de, d_emb.data.begin());
    std::copy(d_concat.data.begin() + de, d_concat.data.begin() + de + dh2, d_ctx.data.begin());
    std::copy(d_concat.data.begin() + de + dh2, d_concat.data.end(), d_s.data.begin());
    axpy(Real(1), d_state.data.data(), d_s.data.data(), dh);

    TensorT<Real> d_ctx_in, d_tilde;
    gru_backward(p.dec_ctx_gru, c.ctx_gru, d_s, g.dec_ctx_gru, d_ctx_in, d_tilde);
    axpy(Real(1), d_ctx_in.data.data(), d_ctx.data.data(), dh2);

    attention_backward(p, enc, c.att, d_ctx, g, d_tilde, d_enc);

    TensorT<Real> d_emb2, d_prev;
    gru_backward(p.dec_word_gru, c.word_gru, d_tilde, g.dec_word_gru, d_emb2, d_prev);
    axpy(Real(1), d_emb2.data.data(), d_emb.data.data(), de);

    const int y_prev = j == 0 ? Vocabulary::kBos : tgt_with_eos[static_cast<size_t>(j - 1)];
    axpy(Real(1), d_emb.data.data(), g.emb_tgt.row_ptr(y_prev), de);
    d_state = std::move(d_prev);
  }

  // Initial state projection.
  TensorT<Real> d_s0_pre({dh});
  for (int i = 0; i < dh; ++i) d_s0_pre[i] = d_state[i] * (Real(1) - s0[i] * s0[i]);
  outer_add(g.init_proj, d_s0_pre.data.data(), enc.states.row_ptr(0));
  mat_tvec_add(p.init_proj, d_s0_pre.data.data(), d_enc.row_ptr(0));

  // Encoder chains: forward states carry right-to-left, backward states
  // left-to-right.
  TensorT<Real> carry({dh}), d_out({dh}), d_x;
  for (int i = m - 1; i >= 0; --i) {
    for (int t = 0; t < dh; ++t) d_out[t] = d_enc.at2(i, t) + carry[t];
    gru_backward(p.enc_fwd, enc_cache.fwd[static_cast<size_t>(i)], d_out, g.enc_fwd, d_x, carry);
    axpy(Real(1), d_x.data.data(), g.emb_src.row_ptr(src[static_cast<size_t>(i)]), de);
  }
  carry.fill(Real(0));
  for (int i = 0; i < m; ++i) {
    for (int t = 0; t < dh; ++t) d_out[t] = d_enc.at2(i, dh + t) + carry[t];
    gru_backward(p.enc_bwd, enc_cache.bwd[static_cast<size_t>(i)], d_out, g.enc_bwd, d_x, carry);
    axpy(Real(1), d_x.data.data(), g.emb_src.row_ptr(src[static_cast<size_t>(i)]), de);
  }
  return loss;
}

template <class Real>
Real clip_global_norm(ModelParamsT<Real>& grad, Real max_norm) {
  double sq = 0.0;
  grad.for_each([&](const std::string&, TensorT<Real>& t) {
    for (Real v : t.data) sq += static_cast<double>(v) * static_cast<double>(v);
  });
  const double norm = std::sqrt(sq);
  if (norm > static_cast<double>(max_norm) && norm > 0.0) {
    const Real scale = static_cast<Real>(static_cast<double>(max_norm) / norm);
    grad.for_each([&](const std::string&, TensorT<Real>& t) {
      for (Real& v : t.data) v *= scale;
    });
  }
  return static_cast<Real>(norm);
}

template <class Real>
LogZStats log_partition_stats(const ModelParamsT<Real>& p,
                              const std::vector<SentencePair>& corpus) {
  LogZStats stats;
  double sum = 0.0;
  for (const SentencePair& pair : corpus) {
    const std::vector<int> tgt = with_eos(pair.target);
    const SourceEncodingT<Real> enc = encode(p, pair.source);
    TensorT<Real> state = init_decoder_state(p, enc);
    DecodeStepCache<Real> c;
    for (size_t j = 0; j < tgt.size(); ++j) {
      const int prev = j == 0 ? Vocabulary::kBos : tgt[j - 1];
      decode_step_cached(p, enc, prev, state, c);
      const double a = std::abs(static_cast<double>(c.log_z));
      sum += a;
      stats.max_abs = std::max(stats.max_abs, a);
      ++stats.steps;
      state = c.ctx_gru.state;
    }
  }
  if (stats.steps > 0) stats.mean_abs = sum / static_cast<double>(stats.steps);
  return stats;
}

double exact_match_rate(const ModelParams& p, const std::vector<SentencePair>& corpus,
                        ScoreMode mode) {
  if (corpus.empty()) throw InputError("exact_match_rate: empty corpus");
  DecodeOptions opt;
  opt.beam_size = 1;
  opt.mode = mode;
  opt.strategy = Strategy::nbs;
  int hits = 0;
  for (const SentencePair& pair : corpus) {
    const SentenceResult r = translate_sentence(p, pair.source, opt);
    std::vector<int> out = r.decode.words;
    if (!out.empty() && out.back() == Vocabulary::kEos) out.pop_back();
    if (out == pair.target) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(corpus.size());
}

// ---------------------------------------------------------------------------
// Trainer
// ---------------------------------------------------------------------------

namespace {

struct ParamRefs {
  std::vector<Tensor*> tensors;
  static ParamRefs of(ModelParams& p) {
    ParamRefs r;
    p.for_each([&](const std::string&, Tensor& t) { r.tensors.push_back(&t); });
    return r;
  }
};

}  // namespace

ModelParams train_on(const TrainConfig& config, const TaskData& data,
                     std::vector<EpochStats>* stats) {
  config.validate();
  if (data.train.empty()) throw InputError("training corpus is empty");

  ModelDims dims;
  dims.src_vocab = data.vocab.size();
  dims.tgt_vocab = data.vocab.size();
  dims.d_emb = config.d_emb;
  dims.d_hid = config.d_hid;
  dims.d_att = config.d_hid;
  dims.d_readout = config.d_emb;

  ModelParams params = ModelParams::sized(dims);
  params.init_uniform(config.seed);
  ModelParams grad = ModelParams::sized(dims);
  ModelParams acc_sq_grad = ModelParams::sized(dims);
  ModelParams acc_sq_delta = ModelParams::sized(dims);

  ParamRefs pr = ParamRefs::of(params);
  ParamRefs gr = ParamRefs::of(grad);
  ParamRefs sg = ParamRefs::of(acc_sq_grad);
  ParamRefs sd = ParamRefs::of(acc_sq_delta);

  std::vector<int> order(data.train.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  Rng shuffle_rng(config.seed ^ 0x9e3779b9u);

  const double rho = static_cast<double>(config.rho);
  const double eps = static_cast<double>(config.epsilon);

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
      std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(shuffle_rng.below(i + 1))]);

    double epoch_loss = 0.0;
    int batch_index = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(config.batch_size)) {
      const size_t stop = std::min(order.size(), start + static_cast<size_t>(config.batch_size));
      grad.zero();
      double batch_loss = 0.0;
      for (size_t i = start; i < stop; ++i) {
        const SentencePair& pair = data.train[static_cast<size_t>(order[i])];
        batch_loss += static_cast<double>(
            seq_loss_grad(params, pair.source, with_eos(pair.target), config.alpha, grad));
      }
      if (!std::isfinite(batch_loss))
        throw TrainingError("training diverged (non-finite loss) at epoch " +
                            std::to_string(epoch) + " batch " + std::to_string(batch_index));
      const float inv = 1.0f / static_cast<float>(stop - start);
      for (Tensor* t : gr.tensors)
        for (float& v : t->data) v *= inv;
      clip_global_norm(grad, config.clip_norm);

      for (size_t t = 0; t < pr.tensors.size(); ++t) {
        Tensor& w = *pr.tensors[t];
        Tensor& gt = *gr.tensors[t];
        Tensor& sgt = *sg.tensors[t];
        Tensor& sdt = *sd.tensors[t];
        for (size_t i = 0; i < w.data.size(); ++i) {
          const double gv = static_cast<double>(gt.data[i]);
          double s = rho * static_cast<double>(sgt.data[i]) + (1.0 - rho) * gv * gv;
          sgt.data[i] = static_cast<float>(s);
          const double step = -std::sqrt(static_cast<double>(sdt.data[i]) + eps) /
                              std::sqrt(s + eps) * gv;
          sdt.data[i] = static_cast<float>(rho * static_cast<double>(sdt.data[i]) +
                                           (1.0 - rho) * step * step);
          w.data[i] = static_cast<float>(static_cast<double>(w.data[i]) + step);
        }
      }
      epoch_loss += batch_loss;
      ++batch_index;
    }

    if (stats) {
      EpochStats es;
      es.epoch = epoch;
      es.train_loss = epoch_loss / static_cast<double>(order.size());
      es.heldout_mean_abs_log_z =
          data.heldout.empty() ? 0.0 : log_partition_stats(params, data.heldout).mean_abs;
      stats->push_back(es);
    }
  }
  return params;
}

TrainResult train(const TrainConfig& config, const SyntheticTask& task) {
  TrainResult result;
  result.data = generate_task(task);
  result.params = train_on(config, result.data, &result.epochs);
  return result;
}

// ---------------------------------------------------------------------------

template float ce_loss(const ModelParamsT<float>&, const std::vector<int>&,
                       const std::vector<int>&);
template double ce_loss(const ModelParamsT<double>&, const std::vector<int>&,
                        const std::vector<int>&);
template float sn_loss(const ModelParamsT<float>&, const std::vector<int>&,
                       const std::vector<int>&, float);
template double sn_loss(const ModelParamsT<double>&, const std::vector<int>&,
                        const std::vector<int>&, double);
template float seq_loss_grad(const ModelParamsT<float>&, const std::vector<int>&,
                             const std::vector<int>&, float, ModelParamsT<float>&);
template double seq_loss_grad(const ModelParamsT<double>&, const std::vector<int>&,
                              const std::vector<int>&, double, ModelParamsT<double>&);
template float clip_global_norm(ModelParamsT<float>&, float);
template double clip_global_norm(ModelParamsT<double>&, double);
template LogZStats log_partition_stats(const ModelParamsT<float>&,
                                       const std::vector<SentencePair>&);
template LogZStats log_partition_stats(const ModelParamsT<double>&,
                                       const std::vector<SentencePair>&);

}  // namespace cubenmt
