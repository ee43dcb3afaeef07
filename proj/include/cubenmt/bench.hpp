#pragma once

#include <string>
#include <vector>

#include "cubenmt/decoder.hpp"
#include "cubenmt/metrics.hpp"
#include "cubenmt/vocab.hpp"

namespace cubenmt {

// One benchmark sweep: every (strategy, beam, self-norm) combination decodes
// the corpus and is scored for quality and cost.
struct BenchTask {
  std::vector<Strategy> strategies{Strategy::nbs, Strategy::ncp, Strategy::acp};
  std::vector<int> beams{1, 4, 10};
  std::vector<bool> self_norm{false};
  bool length_norm = true;
  int max_len = 0;
  int threads = 1;
  bool time_phases = false;
};

struct BenchOutcome {
  BenchRecord record;
  std::vector<DecodeTrace> traces;  // one per sentence, input order
};

std::vector<BenchOutcome> run_bench(const ModelParams& params,
                                    const std::vector<std::vector<int>>& sources,
                                    const std::vector<std::vector<std::string>>& references,
                                    const Vocabulary& vocab, const BenchTask& task);

void write_bench_csv(const std::string& path, const std::vector<BenchRecord>& records);

}  // namespace cubenmt
