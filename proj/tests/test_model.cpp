#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cubenmt/model.hpp"
#include "cubenmt/rng.hpp"

using namespace cubenmt;

namespace {

ModelParams make_params(int vocab, int d_emb, int d_hid, uint32_t seed) {
  ModelDims dims;
  dims.src_vocab = vocab;
  dims.tgt_vocab = vocab;
  dims.d_emb = d_emb;
  dims.d_hid = d_hid;
  dims.d_att = d_hid;
  dims.d_readout = d_emb;
  ModelParams p = ModelParams::sized(dims);
  p.init_uniform(seed);
  return p;
}

// Independent GRU oracle: scalar loops, 64-bit, written directly from the
// gate definitions.
std::vector<double> gru_oracle(const GruWeightsT<float>& w, const Tensor& x, const Tensor& h) {
  const int d = w.hidden_dim();
  const int in = w.input_dim();
  auto affine = [&](const Tensor& wm, const Tensor& um, const Tensor& b, int row,
                    const double* rh_override) {
    double acc = static_cast<double>(b[row]);
    for (int j = 0; j < in; ++j) acc += static_cast<double>(wm.at2(row, j)) * x[j];
    for (int j = 0; j < d; ++j) {
      const double hv = rh_override ? rh_override[j] : static_cast<double>(h[j]);
      acc += static_cast<double>(um.at2(row, j)) * hv;
    }
    return acc;
  };
  std::vector<double> z(d), r(d), rh(d), out(d);
  for (int i = 0; i < d; ++i) z[i] = 1.0 / (1.0 + std::exp(-affine(w.w_update, w.u_update, w.b_update, i, nullptr)));
  for (int i = 0; i < d; ++i) r[i] = 1.0 / (1.0 + std::exp(-affine(w.w_reset, w.u_reset, w.b_reset, i, nullptr)));
  for (int i = 0; i < d; ++i) rh[i] = r[i] * static_cast<double>(h[i]);
  for (int i = 0; i < d; ++i) {
    const double n = std::tanh(affine(w.w_cand, w.u_cand, w.b_cand, i, rh.data()));
    out[i] = (1.0 - z[i]) * n + z[i] * static_cast<double>(h[i]);
  }
  return out;
}

std::vector<int> argsort(const Tensor& v) {
  std::vector<int> idx(static_cast<size_t>(v.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (v[a] != v[b]) return v[a] < v[b];
    return a < b;
  });
  return idx;
}

}  // namespace

TEST_CASE("gru_step with all-zero weights halves the previous state") {
  GruWeightsT<float> w;
  w.resize(3, 4);
  Tensor x({3}, {1.0f, -2.0f, 0.5f});
  Tensor h({4}, {0.8f, -0.4f, 0.2f, 1.0f});
  Tensor out = gru_step(w, x, h);
  for (int i = 0; i < 4; ++i) CHECK(out[i] == doctest::Approx(0.5f * h[i]));
}

TEST_CASE("gru_step of all zeros stays zero") {
  GruWeightsT<float> w;
  w.resize(2, 3);
  Tensor out = gru_step(w, Tensor({2}), Tensor({3}));
  for (int i = 0; i < 3; ++i) CHECK(out[i] == doctest::Approx(0.0f));
}

TEST_CASE("gru_step matches an independent oracle on random instances") {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    GruWeightsT<float> w;
    w.resize(5, 6);
    GruWeightsT<float>* wp = &w;
    wp->for_each("g", [&](const std::string&, Tensor& t) {
      for (float& v : t.data) v = rng.uniform(-1.0f, 1.0f);
    });
    Tensor x({5}), h({6});
    for (float& v : x.data) v = rng.uniform(-1.5f, 1.5f);
    for (float& v : h.data) v = rng.uniform(-1.0f, 1.0f);
    Tensor out = gru_step(w, x, h);
    std::vector<double> want = gru_oracle(w, x, h);
    for (int i = 0; i < 6; ++i)
      CHECK(static_cast<double>(out[i]) == doctest::Approx(want[i]).epsilon(1e-5));
  }
}

TEST_CASE("gru_step validates operand shapes") {
  GruWeightsT<float> w;
  w.resize(3, 4);
  CHECK_THROWS_AS(gru_step(w, Tensor({2}), Tensor({4})), DimensionError);
  CHECK_THROWS_AS(gru_step(w, Tensor({3}), Tensor({5})), DimensionError);
}

TEST_CASE("encode produces one row per source position") {
  ModelParams p = make_params(9, 6, 8, 3);
  for (int len : {1, 2, 5}) {
    std::vector<int> src;
    for (int i = 0; i < len; ++i) src.push_back(3 + (i % 6));
    SourceEncoding enc = encode(p, src);
    CHECK(enc.states.rows() == len);
    CHECK(enc.states.cols() == 2 * p.dims.d_hid);
    CHECK(enc.att_cache.rows() == len);
  }
}

TEST_CASE("encode rejects empty and out-of-range sources") {
  ModelParams p = make_params(7, 4, 4, 4);
  CHECK_THROWS_AS(encode(p, std::vector<int>{}), InputError);
  CHECK_THROWS_AS(encode(p, std::vector<int>{3, 99}), VocabError);
}

TEST_CASE("reversing the source swaps state halves when directions share weights") {
  ModelParams p = make_params(10, 5, 7, 8);
  p.enc_bwd = p.enc_fwd;  // tie the two directions
  const int d = p.dims.d_hid;

  std::vector<int> src{3, 8, 4, 6, 5};
  std::vector<int> rev(src.rbegin(), src.rend());
  SourceEncoding a = encode(p, src);
  SourceEncoding b = encode(p, rev);
  const int m = static_cast<int>(src.size());
  for (int i = 0; i < m; ++i)
    for (int t = 0; t < d; ++t) {
      CHECK(b.states.at2(i, t) == doctest::Approx(a.states.at2(m - 1 - i, d + t)).epsilon(1e-6));
      CHECK(b.states.at2(i, d + t) == doctest::Approx(a.states.at2(m - 1 - i, t)).epsilon(1e-6));
    }

  // A palindrome is its own reverse, so each row equals the swapped-halves
  // mirror row of the same encoding.
  std::vector<int> pal{4, 7, 9, 7, 4};
  SourceEncoding e = encode(p, pal);
  for (int i = 0; i < 5; ++i)
    for (int t = 0; t < d; ++t)
      CHECK(e.states.at2(i, t) == doctest::Approx(e.states.at2(4 - i, d + t)).epsilon(1e-6));
}

TEST_CASE("attention over a single position is the identity") {
  ModelParams p = make_params(8, 4, 6, 9);
  SourceEncoding enc = encode(p, {5});
  Tensor q({6});
  for (int i = 0; i < 6; ++i) q[i] = 0.1f * static_cast<float>(i);
  auto [context, weights] = attention(p, enc, q);
  CHECK(weights.size() == 1);
  CHECK(weights[0] == doctest::Approx(1.0f));
  for (int t = 0; t < 12; ++t) CHECK(context[t] == doctest::Approx(enc.states.at2(0, t)));
}

TEST_CASE("attention over identical rows is uniform") {
  ModelParams p = make_params(8, 4, 6, 10);
  SourceEncoding enc = encode(p, {5, 5, 5});
  // Same word everywhere does not give identical states (positions differ),
  // so overwrite rows directly.
  for (int i = 1; i < 3; ++i)
    for (int t = 0; t < enc.states.cols(); ++t) enc.states.at2(i, t) = enc.states.at2(0, t);
  for (int i = 1; i < 3; ++i)
    for (int t = 0; t < enc.att_cache.cols(); ++t)
      enc.att_cache.at2(i, t) = enc.att_cache.at2(0, t);
  Tensor q({6});
  auto [context, weights] = attention(p, enc, q);
  for (int i = 0; i < 3; ++i) CHECK(weights[i] == doctest::Approx(1.0f / 3.0f).epsilon(1e-6));
  (void)context;
}

TEST_CASE("attention matches a direct 64-bit oracle") {
  ModelParams p = make_params(12, 5, 6, 11);
  std::vector<int> src{3, 9, 4, 11};
  SourceEncoding enc = encode(p, src);
  Rng rng(12);
  Tensor q({6});
  for (float& v : q.data) v = rng.uniform(-1.0f, 1.0f);

  const int m = 4, da = p.dims.d_att, dh2 = 12;
  std::vector<double> scores(m);
  for (int i = 0; i < m; ++i) {
    double s = 0.0;
    for (int k = 0; k < da; ++k) {
      double pre = 0.0;
      for (int j = 0; j < p.dims.d_hid; ++j)
        pre += static_cast<double>(p.att_query_w.at2(k, j)) * q[j];
      for (int j = 0; j < dh2; ++j)
        pre += static_cast<double>(p.att_enc_w.at2(k, j)) * enc.states.at2(i, j);
      s += static_cast<double>(p.att_score_v[k]) * std::tanh(pre);
    }
    scores[i] = s;
  }
  double mx = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double s : scores) z += std::exp(s - mx);
  std::vector<double> alpha(m);
  for (int i = 0; i < m; ++i) alpha[i] = std::exp(scores[i] - mx) / z;
  std::vector<double> ctx(dh2, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < dh2; ++j) ctx[j] += alpha[i] * static_cast<double>(enc.states.at2(i, j));

  auto [context, weights] = attention(p, enc, q);
  double sum = 0.0;
  for (int i = 0; i < m; ++i) {
    CHECK(static_cast<double>(weights[i]) == doctest::Approx(alpha[i]).epsilon(1e-5));
    CHECK(weights[i] >= 0.0f);
    sum += weights[i];
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  for (int j = 0; j < dh2; ++j)
    CHECK(static_cast<double>(context[j]) == doctest::Approx(ctx[j]).epsilon(1e-5));
}

TEST_CASE("init_decoder_state is deterministic, sized, and tanh-bounded") {
  ModelParams p = make_params(9, 4, 5, 13);
  SourceEncoding enc = encode(p, {3, 7, 8});
  Tensor a = init_decoder_state(p, enc);
  Tensor b = init_decoder_state(p, encode(p, {3, 7, 8}));
  CHECK(a.shape == std::vector<int>{5});
  for (int i = 0; i < 5; ++i) {
    CHECK(a[i] == b[i]);
    CHECK(a[i] > -1.0f);
    CHECK(a[i] < 1.0f);
  }
}

TEST_CASE("decode_step normalized scores exponentiate to a distribution") {
  ModelParams p = make_params(11, 6, 8, 14);
  SourceEncoding enc = encode(p, {4, 9});
  Tensor s0 = init_decoder_state(p, enc);
  StepOutput out = decode_step(p, enc, /*prev_word=*/0, s0, ScoreMode::normalized);
  double sum = 0.0;
  for (int i = 0; i < 11; ++i) sum += std::exp(-static_cast<double>(out.word_nll[i]));
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-5));
  double wsum = 0.0;
  for (int64_t i = 0; i < out.attention.size(); ++i) {
    CHECK(out.attention[i] >= 0.0f);
    wsum += out.attention[i];
  }
  CHECK(wsum == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("decode_step self-normalized scores are the negated raw scores") {
  ModelParams p = make_params(9, 5, 6, 15);
  SourceEncoding enc = encode(p, {3, 4, 5});
  Tensor s0 = init_decoder_state(p, enc);

  DecodeStepCache<float> cache;
  decode_step_cached(p, enc, 4, s0, cache);
  StepOutput sn = decode_step(p, enc, 4, s0, ScoreMode::self_normalized);
  for (int i = 0; i < 9; ++i) CHECK(sn.word_nll[i] == -cache.logits[i]);  // exact
}

TEST_CASE("both scoring modes rank words identically") {
  ModelParams p = make_params(13, 5, 7, 16);
  SourceEncoding enc = encode(p, {6, 10, 3});
  Tensor s0 = init_decoder_state(p, enc);
  StepOutput a = decode_step(p, enc, 5, s0, ScoreMode::normalized);
  StepOutput b = decode_step(p, enc, 5, s0, ScoreMode::self_normalized);
  CHECK(argsort(a.word_nll) == argsort(b.word_nll));
}

TEST_CASE("decode_step rejects out-of-range words") {
  ModelParams p = make_params(6, 4, 4, 17);
  SourceEncoding enc = encode(p, {3});
  Tensor s0 = init_decoder_state(p, enc);
  CHECK_THROWS_AS(decode_step(p, enc, 6, s0, ScoreMode::normalized), VocabError);
  CHECK_THROWS_AS(decode_step(p, enc, -1, s0, ScoreMode::normalized), VocabError);
}

TEST_CASE("encode and decode_step are deterministic") {
  ModelParams p = make_params(10, 5, 6, 18);
  std::vector<int> src{3, 8, 9};
  SourceEncoding e1 = encode(p, src);
  SourceEncoding e2 = encode(p, src);
  CHECK(e1.states.data == e2.states.data);
  Tensor s0 = init_decoder_state(p, e1);
  StepOutput o1 = decode_step(p, e1, 3, s0, ScoreMode::normalized);
  StepOutput o2 = decode_step(p, e2, 3, s0, ScoreMode::normalized);
  CHECK(o1.word_nll.data == o2.word_nll.data);
  CHECK(o1.next_state.data == o2.next_state.data);
}
