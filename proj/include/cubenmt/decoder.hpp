#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cubenmt/metrics.hpp"
#include "cubenmt/model.hpp"

namespace cubenmt {

enum class Strategy { nbs, ncp, acp };

const char* strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

// One beam item: accumulated NLL, decoder state, last emitted word, and the
// index of its parent in the previous beam.
struct Hypothesis {
  float nll = 0.0f;
  Tensor state;
  int word = 0;
  int backpointer = 0;
  bool finished = false;
};

// Counters and timers accumulated over one decode.
struct DecodeTrace {
  int64_t candidates = 0;       // word-level candidates popped into beams (N_w)
  int64_t sub_cubes = 0;        // sub-cube count (N_c); equals candidates for NBS
  int64_t forward_calls = 0;    // decode_step invocations
  int64_t rescore_columns = 0;  // NCP only: distinct (cube, column) pairs rescored
  std::vector<int> live_per_step;
  PhaseTimers phases;
  double search_ms = 0.0;
};

// Heap activity record, one entry per push/pop, used by fixture tests.
struct CubeEvent {
  enum class Kind { push, pop };
  Kind kind;
  float priority;
  int word;
  int cube, row, col;
};
using CubeAudit = std::vector<CubeEvent>;

// Equivalence class of beam items sharing the previous target word. One
// forward call on the best column's state supplies the approximate word
// scores and the representative next state for the whole class.
struct SubCube {
  int shared_word = 0;
  std::vector<int> columns;  // prev-beam indices, ascending by (nll, index)
  Tensor approx_word_nll;    // tgt_vocab
  Tensor next_state_repr;
  std::vector<int> row_order;  // word ids ascending by (approx nll, word); truncated lazily
};

// Forward interface the search operates through; wrapping the model behind a
// function keeps the cube machinery testable with synthetic score grids.
using ForwardFn = std::function<StepOutput(int prev_word, const Tensor& prev_state)>;

// Partitions the live beam by previous word. k bounds how many grid rows any
// cube can reach this step (k pops maximum), so row_order keeps min(V, k+1)
// entries.
std::vector<SubCube> group_sub_cubes(const std::vector<Hypothesis>& prev_beam, int k,
                                     const ForwardFn& forward);

// Lazy best-first walk over the cube grids: a min-heap is seeded with every
// cube's upper-left cell; each pop pushes its right (next word) and lower
// (next column) neighbours. NCP replaces popped scores with exact ones (one
// forward call per touched column, cached); ACP keeps the approximate scores
// and the representative state. Returns up to k items ranked by their NLL.
std::vector<Hypothesis> cube_prune_step(const std::vector<Hypothesis>& prev_beam,
                                        const std::vector<SubCube>& cubes, int k,
                                        Strategy strategy, const ForwardFn& forward,
                                        DecodeTrace* trace = nullptr, CubeAudit* audit = nullptr);

struct DecodeOptions {
  int beam_size = 10;
  ScoreMode mode = ScoreMode::normalized;
  Strategy strategy = Strategy::nbs;
  bool length_norm = false;
  int max_len = 0;                 // absolute cap; 0 derives it from the factor
  float max_len_factor = 2.0f;     // cap = floor(factor * |x|) + 5
  bool time_phases = false;
  bool keep_history = false;    // retain per-step beams in the result
  CubeAudit* audit = nullptr;   // heap activity log across all steps
};

struct ScoredSequence {
  std::vector<int> words;
  float score = 0.0f;
};

struct DecodeResult {
  std::vector<int> words;  // best translation, EOS-inclusive when one finished
  float score = 0.0f;
  std::vector<ScoredSequence> kbest;  // finished hypotheses, best first
  DecodeTrace trace;
  std::vector<std::vector<Hypothesis>> history;  // filled when keep_history
};

DecodeResult beam_search(const ModelParams& params, const SourceEncoding& enc,
                         const DecodeOptions& opt);

DecodeResult beam_search_nbs(const ModelParams& params, const SourceEncoding& enc, int beam_size,
                             ScoreMode mode, bool length_norm, int max_len);

DecodeResult beam_search_cp(const ModelParams& params, const SourceEncoding& enc, int beam_size,
                            ScoreMode mode, Strategy strategy, bool length_norm, int max_len);

// Walks backpointers from a hypothesis finalized at `step`; returns the words
// in generation order, BOS excluded.
std::vector<int> backtrack(const std::vector<std::vector<Hypothesis>>& history,
                           const Hypothesis& final_hyp, int step);

struct SentenceResult {
  DecodeResult decode;
  double wall_ms = 0.0;  // encode + search
};

SentenceResult translate_sentence(const ModelParams& params, const std::vector<int>& src,
                                  const DecodeOptions& opt);

// Decodes a corpus; results are ordered by input index regardless of threads.
std::vector<SentenceResult> translate_corpus(const ModelParams& params,
                                             const std::vector<std::vector<int>>& corpus,
                                             const DecodeOptions& opt, int threads = 1);

}  // namespace cubenmt
