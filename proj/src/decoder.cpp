#include "cubenmt/decoder.hpp"

#include <algorithm>
#include <atomic>
#include <memory>
#include <numeric>
#include <queue>
#include <thread>

#include "cubenmt/error.hpp"
#include "cubenmt/vocab.hpp"

namespace cubenmt {

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::nbs: return "nbs";
    case Strategy::ncp: return "ncp";
    case Strategy::acp: return "acp";
  }
  return "?";
}

Strategy strategy_from_name(const std::string& name) {
  if (name == "nbs") return Strategy::nbs;
  if (name == "ncp") return Strategy::ncp;
  if (name == "acp") return Strategy::acp;
  throw InputError("unknown search strategy '" + name + "'");
}

namespace {

// Word indices of the r smallest entries of nll, ties by word index.
std::vector<int> smallest_rows(const Tensor& nll, int r) {
  const int v = static_cast<int>(nll.size());
  std::vector<int> idx(v);
  std::iota(idx.begin(), idx.end(), 0);
  r = std::min(r, v);
  std::partial_sort(idx.begin(), idx.begin() + r, idx.end(), [&](int a, int b) {
    if (nll[a] != nll[b]) return nll[a] < nll[b];
    return a < b;
  });
  idx.resize(r);
  return idx;
}

struct Candidate {
  float nll;
  int parent;
  int word;
};

// One naive step: a forward call per live item, then the k best successors
// by accumulated NLL with (nll, parent, word) tie order.
std::vector<Hypothesis> nbs_expand(const std::vector<Hypothesis>& live, int k,
                                   const ForwardFn& forward) {
  std::vector<StepOutput> outs(live.size());
  std::vector<Candidate> cands;
  cands.reserve(live.size() * static_cast<size_t>(k));
  for (int i = 0; i < static_cast<int>(live.size()); ++i) {
    outs[i] = forward(live[i].word, live[i].state);
    for (int w : smallest_rows(outs[i].word_nll, k))
      cands.push_back({live[i].nll + outs[i].word_nll[w], i, w});
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.nll != b.nll) return a.nll < b.nll;
    if (a.parent != b.parent) return a.parent < b.parent;
    return a.word < b.word;
  });
  if (static_cast<int>(cands.size()) > k) cands.resize(k);

  std::vector<Hypothesis> next;
  next.reserve(cands.size());
  for (const Candidate& c : cands)
    next.push_back({c.nll, outs[c.parent].next_state, c.word, c.parent, false});
  return next;
}

float final_score(float nll, int length, bool length_norm) {
  return length_norm ? nll / static_cast<float>(length) : nll;
}

}  // namespace

std::vector<SubCube> group_sub_cubes(const std::vector<Hypothesis>& prev_beam, int k,
                                     const ForwardFn& forward) {
  if (prev_beam.empty()) throw InputError("group_sub_cubes: empty beam");

  // Partition indices by previous word, columns ascending by (nll, index).
  std::vector<int> order(prev_beam.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return prev_beam[a].nll < prev_beam[b].nll;
  });

  std::vector<SubCube> cubes;
  std::vector<int> words_seen;
  for (int idx : order) {
    const int w = prev_beam[idx].word;
    int cube = -1;
    for (size_t j = 0; j < words_seen.size(); ++j)
      if (words_seen[j] == w) {
        cube = static_cast<int>(j);
        break;
      }
    if (cube < 0) {
      words_seen.push_back(w);
      cubes.push_back({});
      cubes.back().shared_word = w;
      cube = static_cast<int>(cubes.size()) - 1;
    }
    cubes[static_cast<size_t>(cube)].columns.push_back(idx);
  }

  // Cubes inherit the order of their best columns, which matches the beam's
  // ranking; one forward call per cube on the best column's state.
  for (SubCube& cube : cubes) {
    const Hypothesis& rep = prev_beam[cube.columns.front()];
    StepOutput out = forward(cube.shared_word, rep.state);
    cube.row_order = smallest_rows(out.word_nll, k + 1);
    cube.approx_word_nll = std::move(out.word_nll);
    cube.next_state_repr = std::move(out.next_state);
  }
  return cubes;
}

namespace {

struct HeapCell {
  float priority;
  int cube, row, col;
};

struct CellAfter {
  bool operator()(const HeapCell& a, const HeapCell& b) const {
    if (a.priority != b.priority) return a.priority > b.priority;
    if (a.cube != b.cube) return a.cube > b.cube;
    if (a.row != b.row) return a.row > b.row;
    return a.col > b.col;
  }
};

}  // namespace

std::vector<Hypothesis> cube_prune_step(const std::vector<Hypothesis>& prev_beam,
                                        const std::vector<SubCube>& cubes, int k,
                                        Strategy strategy, const ForwardFn& forward,
                                        DecodeTrace* trace, CubeAudit* audit) {
  if (k < 1) throw InputError("cube_prune_step: k must be at least 1");
  if (strategy == Strategy::nbs) throw InputError("cube_prune_step: expects ncp or acp");

  std::priority_queue<HeapCell, std::vector<HeapCell>, CellAfter> heap;
  // visited[cube] is a rows-by-cols bitmap guarding against double pushes.
  std::vector<std::vector<uint8_t>> visited(cubes.size());
  // NCP: exact distributions per (cube, column), filled on first pop.
  std::vector<std::vector<std::unique_ptr<StepOutput>>> exact(cubes.size());

  auto cell_priority = [&](int c, int row, int col) {
    const SubCube& cube = cubes[c];
    return prev_beam[cube.columns[col]].nll + cube.approx_word_nll[cube.row_order[row]];
  };
  auto push = [&](int c, int row, int col) {
    const SubCube& cube = cubes[c];
    if (row >= static_cast<int>(cube.row_order.size())) return;
    if (col >= static_cast<int>(cube.columns.size())) return;
    uint8_t& flag = visited[c][static_cast<size_t>(row) * cube.columns.size() + col];
    if (flag) return;
    flag = 1;
    const float pr = cell_priority(c, row, col);
    heap.push({pr, c, row, col});
    if (audit) audit->push_back({CubeEvent::Kind::push, pr, cube.row_order[row], c, row, col});
  };

  for (int c = 0; c < static_cast<int>(cubes.size()); ++c) {
    visited[c].assign(cubes[c].row_order.size() * cubes[c].columns.size(), 0);
    exact[c].resize(cubes[c].columns.size());
    push(c, 0, 0);
  }

  std::vector<Hypothesis> popped;
  popped.reserve(static_cast<size_t>(k));
  while (static_cast<int>(popped.size()) < k && !heap.empty()) {
    const HeapCell cell = heap.top();
    heap.pop();
    const SubCube& cube = cubes[cell.cube];
    const int word = cube.row_order[cell.row];
    const int parent_index = cube.columns[cell.col];
    const Hypothesis& parent = prev_beam[parent_index];
    if (audit) audit->push_back({CubeEvent::Kind::pop, cell.priority, word, cell.cube, cell.row, cell.col});

    Hypothesis hyp;
    hyp.word = word;
    hyp.backpointer = parent_index;
    if (strategy == Strategy::ncp) {
      auto& slot = exact[cell.cube][cell.col];
      if (!slot) {
        slot = std::make_unique<StepOutput>(forward(cube.shared_word, parent.state));
        if (trace) ++trace->rescore_columns;
      }
      hyp.nll = parent.nll + slot->word_nll[word];
      hyp.state = slot->next_state;
    } else {
      hyp.nll = cell.priority;
      hyp.state = cube.next_state_repr;
    }
    popped.push_back(std::move(hyp));

    push(cell.cube, cell.row + 1, cell.col);
    push(cell.cube, cell.row, cell.col + 1);
  }

  // Rank by NLL (exact for NCP, approximate for ACP); stable keeps pop order
  // among ties.
  std::stable_sort(popped.begin(), popped.end(),
                   [](const Hypothesis& a, const Hypothesis& b) { return a.nll < b.nll; });
  return popped;
}

std::vector<int> backtrack(const std::vector<std::vector<Hypothesis>>& history,
                           const Hypothesis& final_hyp, int step) {
  if (step < 1 || step >= static_cast<int>(history.size()) + 1)
    throw Error("backtrack: step outside the recorded history");
  std::vector<int> words;
  words.push_back(final_hyp.word);
  int bp = final_hyp.backpointer;
  for (int j = step - 1; j >= 1; --j) {
    if (bp < 0 || bp >= static_cast<int>(history[j].size()))
      throw Error("backtrack: broken backpointer chain");
    const Hypothesis& h = history[static_cast<size_t>(j)][static_cast<size_t>(bp)];
    words.push_back(h.word);
    bp = h.backpointer;
  }
  if (bp != 0) throw Error("backtrack: chain does not reach the initial hypothesis");
  std::reverse(words.begin(), words.end());
  return words;
}

DecodeResult beam_search(const ModelParams& params, const SourceEncoding& enc,
                         const DecodeOptions& opt) {
  if (opt.beam_size < 1) throw InputError("beam size must be at least 1");
  const int max_len =
      opt.max_len > 0
          ? opt.max_len
          : static_cast<int>(opt.max_len_factor * static_cast<float>(enc.length())) + 5;

  DecodeResult result;
  DecodeTrace& trace = result.trace;
  const ForwardFn forward = [&](int word, const Tensor& state) {
    ++trace.forward_calls;
    return decode_step(params, enc, word, state, opt.mode,
                       opt.time_phases ? &trace.phases : nullptr);
  };

  const auto t_start = Clock::now();

  std::vector<std::vector<Hypothesis>> history;
  history.push_back({Hypothesis{0.0f, init_decoder_state(params, enc), Vocabulary::kBos, 0, false}});

  struct Finished {
    Hypothesis hyp;
    int step;
    float score;
  };
  std::vector<Finished> finished;

  for (int step = 1; step <= max_len; ++step) {
    const std::vector<Hypothesis>& live = history.back();
    if (live.empty()) break;
    const int k = opt.beam_size - static_cast<int>(finished.size());
    if (k <= 0) break;
    trace.live_per_step.push_back(static_cast<int>(live.size()));

    std::vector<Hypothesis> popped;
    if (opt.strategy == Strategy::nbs) {
      popped = nbs_expand(live, k, forward);
      trace.sub_cubes += static_cast<int64_t>(popped.size());
    } else {
      const std::vector<SubCube> cubes = group_sub_cubes(live, k, forward);
      trace.sub_cubes += static_cast<int64_t>(cubes.size());
      popped = cube_prune_step(live, cubes, k, opt.strategy, forward, &trace, opt.audit);
    }
    trace.candidates += static_cast<int64_t>(popped.size());

    std::vector<Hypothesis> next_live;
    next_live.reserve(popped.size());
    for (Hypothesis& h : popped) {
      if (h.word == Vocabulary::kEos) {
        h.finished = true;
        finished.push_back({h, step, final_score(h.nll, step, opt.length_norm)});
      } else {
        next_live.push_back(std::move(h));
      }
    }
    history.push_back(std::move(next_live));
  }

  // Nothing closed within the cap: fall back to the last live beam.
  if (finished.empty()) {
    const int last = static_cast<int>(history.size()) - 1;
    for (const Hypothesis& h : history[static_cast<size_t>(last)])
      finished.push_back({h, last, final_score(h.nll, last, opt.length_norm)});
  }
  std::stable_sort(finished.begin(), finished.end(),
                   [](const Finished& a, const Finished& b) { return a.score < b.score; });

  result.kbest.reserve(finished.size());
  for (const Finished& f : finished)
    result.kbest.push_back({backtrack(history, f.hyp, f.step), f.score});
  result.words = result.kbest.front().words;
  result.score = result.kbest.front().score;

  trace.search_ms = elapsed_ms(t_start, Clock::now());
  if (opt.keep_history) result.history = std::move(history);
  return result;
}

DecodeResult beam_search_nbs(const ModelParams& params, const SourceEncoding& enc, int beam_size,
                             ScoreMode mode, bool length_norm, int max_len) {
  DecodeOptions opt;
  opt.beam_size = beam_size;
  opt.mode = mode;
  opt.strategy = Strategy::nbs;
  opt.length_norm = length_norm;
  opt.max_len = max_len;
  return beam_search(params, enc, opt);
}

DecodeResult beam_search_cp(const ModelParams& params, const SourceEncoding& enc, int beam_size,
                            ScoreMode mode, Strategy strategy, bool length_norm, int max_len) {
  DecodeOptions opt;
  opt.beam_size = beam_size;
  opt.mode = mode;
  opt.strategy = strategy;
  opt.length_norm = length_norm;
  opt.max_len = max_len;
  return beam_search(params, enc, opt);
}

SentenceResult translate_sentence(const ModelParams& params, const std::vector<int>& src,
                                  const DecodeOptions& opt) {
  const auto t0 = Clock::now();
  const SourceEncoding enc = encode(params, src);
  SentenceResult r;
  r.decode = beam_search(params, enc, opt);
  r.wall_ms = elapsed_ms(t0, Clock::now());
  return r;
}

std::vector<SentenceResult> translate_corpus(const ModelParams& params,
                                             const std::vector<std::vector<int>>& corpus,
                                             const DecodeOptions& opt, int threads) {
  std::vector<SentenceResult> results(corpus.size());
  if (corpus.empty()) return results;
  threads = std::max(1, std::min<int>(threads, static_cast<int>(corpus.size())));
  if (threads == 1) {
    for (size_t i = 0; i < corpus.size(); ++i)
      results[i] = translate_sentence(params, corpus[i], opt);
    return results;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        const size_t i = next.fetch_add(1);
        if (i >= corpus.size()) return;
        results[i] = translate_sentence(params, corpus[i], opt);
      }
    });
  }
  for (auto& th : pool) th.join();
  return results;
}

}  // namespace cubenmt
