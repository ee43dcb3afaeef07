#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

namespace cubenmt {

struct DecodeTrace;  // decoder.hpp

// Wall time attributed to the four calculation units of one decode step:
// the recurrent/attention unit, the readout, the output projection, and the
// softmax normalization (zero in self-normalized mode).
struct PhaseTimers {
  double recurrence_ms = 0.0;
  double readout_ms = 0.0;
  double projection_ms = 0.0;
  double normalization_ms = 0.0;

  void add(const PhaseTimers& o) {
    recurrence_ms += o.recurrence_ms;
    readout_ms += o.readout_ms;
    projection_ms += o.projection_ms;
    normalization_ms += o.normalization_ms;
  }
  double total_ms() const {
    return recurrence_ms + readout_ms + projection_ms + normalization_ms;
  }
};

using Clock = std::chrono::steady_clock;

inline double elapsed_ms(Clock::time_point from, Clock::time_point to) {
  return std::chrono::duration<double, std::milli>(to - from).count();
}

// Average merging rate: total word-level candidates over total sub-cubes.
double amr(int64_t candidates, int64_t sub_cubes);
double amr(const DecodeTrace& trace);
double amr(const std::vector<DecodeTrace>& traces);

// Corpus-level 4-gram BLEU in [0,1]: modified n-gram precisions, geometric
// mean, brevity penalty, no smoothing. Any empty n-gram match level gives 0.
double bleu4(const std::vector<std::vector<std::string>>& candidates,
             const std::vector<std::vector<std::string>>& references,
             bool case_insensitive);

// One row of a benchmark sweep.
struct BenchRecord {
  std::string strategy;
  int beam_size = 0;
  bool self_norm = false;
  double amr = 0.0;
  int64_t forward_calls = 0;
  double ms_per_word = 0.0;
  double bleu = 0.0;
  int sentences = 0;
};

// CSV with '.' decimals: strategy,beam,self_norm,amr,forward_calls,ms_per_word,bleu
std::string bench_csv_header();
std::string bench_csv_row(const BenchRecord& r);

}  // namespace cubenmt
