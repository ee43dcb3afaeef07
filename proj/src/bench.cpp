#include "cubenmt/bench.hpp"

#include <fstream>

#include "cubenmt/corpus.hpp"
#include "cubenmt/error.hpp"

namespace cubenmt {

std::vector<BenchOutcome> run_bench(const ModelParams& params,
                                    const std::vector<std::vector<int>>& sources,
                                    const std::vector<std::vector<std::string>>& references,
                                    const Vocabulary& vocab, const BenchTask& task) {
  if (sources.empty()) throw InputError("benchmark corpus is empty");
  if (sources.size() != references.size())
    throw InputError("benchmark sources and references differ in line count");

  std::vector<BenchOutcome> outcomes;
  for (bool sn : task.self_norm) {
    for (Strategy strategy : task.strategies) {
      for (int beam : task.beams) {
        DecodeOptions opt;
        opt.beam_size = beam;
        opt.mode = sn ? ScoreMode::self_normalized : ScoreMode::normalized;
        opt.strategy = strategy;
        opt.length_norm = task.length_norm;
        opt.max_len = task.max_len;
        opt.time_phases = task.time_phases;

        const std::vector<SentenceResult> results =
            translate_corpus(params, sources, opt, task.threads);

        BenchOutcome outcome;
        outcome.traces.reserve(results.size());
        std::vector<std::vector<std::string>> outputs;
        outputs.reserve(results.size());
        double wall_ms = 0.0;
        int64_t words = 0;
        int64_t calls = 0;
        for (const SentenceResult& r : results) {
          outputs.push_back(to_tokens(vocab, r.decode.words));
          wall_ms += r.wall_ms;
          words += static_cast<int64_t>(r.decode.words.size());
          calls += r.decode.trace.forward_calls;
          outcome.traces.push_back(r.decode.trace);
        }

        BenchRecord& rec = outcome.record;
        rec.strategy = strategy_name(strategy);
        rec.beam_size = beam;
        rec.self_norm = sn;
        rec.amr = amr(outcome.traces);
        rec.forward_calls = calls;
        rec.ms_per_word = words > 0 ? wall_ms / static_cast<double>(words) : 0.0;
        rec.bleu = bleu4(outputs, references, /*case_insensitive=*/true);
        rec.sentences = static_cast<int>(sources.size());
        outcomes.push_back(std::move(outcome));
      }
    }
  }
  return outcomes;
}

void write_bench_csv(const std::string& path, const std::vector<BenchRecord>& records) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write benchmark CSV " + path);
  out << bench_csv_header() << '\n';
  for (const BenchRecord& r : records) out << bench_csv_row(r) << '\n';
}

}  // namespace cubenmt
