// Command-line surface: train a desk-scale model on a synthetic task, decode
// a corpus with one of the three search strategies, sweep a benchmark, or
// score translations with corpus BLEU.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cubenmt/bench.hpp"
#include "cubenmt/corpus.hpp"
#include "cubenmt/decoder.hpp"
#include "cubenmt/error.hpp"
#include "cubenmt/metrics.hpp"
#include "cubenmt/training.hpp"
#include "cubenmt/weight_io.hpp"

namespace {

using namespace cubenmt;

constexpr int kExitUsage = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitMismatch = 4;
constexpr int kExitLineCount = 5;

struct TrainArgs {
  std::string task = "copy";
  int vocab = 12;
  int len_min = 1, len_max = 8;
  int count = 2000;
  float alpha = 0.5f;
  int batch_size = 16;
  int epochs = 20;
  float rho = 0.95f, epsilon = 1e-6f, clip_norm = 1.0f;
  unsigned seed = 7;
  int emb_dim = 32, hidden_dim = 64;
  std::string output;
  std::string vocab_out;
  std::string log_path;
  std::string heldout_src, heldout_ref;
};

struct DecodeArgs {
  std::string model, vocab, input, output;
  std::string strategy = "nbs";
  int beam_size = 10;
  bool self_norm = false;
  bool length_norm = false;
  float max_len_factor = 2.0f;
  std::string trace_path;
  int threads = 1;
  unsigned seed = 0;  // accepted for interface stability; decoding is deterministic
};

struct BenchArgs {
  std::string model, vocab, input, refs, output;
  std::vector<int> beams{1, 4, 10};
  std::vector<std::string> strategies{"nbs", "ncp", "acp"};
  std::string self_norm = "both";
  bool length_norm = false;
  float max_len_factor = 2.0f;
  int threads = 1;
};

struct EvalArgs {
  std::string candidates, references;
  bool case_sensitive = false;
};

// Loads model + vocab and verifies they describe the same vocabulary.
ModelParams load_checked(const std::string& model_path, const Vocabulary& vocab) {
  ModelParams params = load_weights(model_path);
  if (params.dims.src_vocab != vocab.size() || params.dims.tgt_vocab != vocab.size()) {
    throw DimensionError("vocabulary has " + std::to_string(vocab.size()) +
                         " entries but the model expects src=" +
                         std::to_string(params.dims.src_vocab) +
                         " tgt=" + std::to_string(params.dims.tgt_vocab));
  }
  return params;
}

int run_train(const TrainArgs& a) {
  SyntheticTask task;
  task.kind = task_kind_from_name(a.task);
  task.vocab_size = a.vocab;
  task.min_len = a.len_min;
  task.max_len = a.len_max;
  task.count = a.count;
  task.seed = a.seed;

  TrainConfig cfg;
  cfg.alpha = a.alpha;
  cfg.batch_size = a.batch_size;
  cfg.rho = a.rho;
  cfg.epsilon = a.epsilon;
  cfg.clip_norm = a.clip_norm;
  cfg.max_epochs = a.epochs;
  cfg.seed = a.seed;
  cfg.d_emb = a.emb_dim;
  cfg.d_hid = a.hidden_dim;

  TrainResult result = train(cfg, task);
  save_weights(result.params, a.output);
  const std::string vocab_path = a.vocab_out.empty() ? a.output + ".vocab" : a.vocab_out;
  result.data.vocab.save(vocab_path);

  for (const EpochStats& e : result.epochs)
    std::printf("epoch %d loss %.6f heldout_mean_abs_log_z %.6f\n", e.epoch, e.train_loss,
                e.heldout_mean_abs_log_z);

  if (!a.log_path.empty()) {
    std::ofstream log(a.log_path);
    if (!log) throw IoError("cannot write training log " + a.log_path);
    log << "epoch,loss,heldout_mean_abs_log_z\n";
    for (const EpochStats& e : result.epochs) {
      char buf[128];
      std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f", e.epoch, e.train_loss,
                    e.heldout_mean_abs_log_z);
      log << buf << '\n';
    }
  }
  if (!a.heldout_src.empty() || !a.heldout_ref.empty()) {
    std::vector<std::vector<std::string>> src, ref;
    for (const SentencePair& pair : result.data.heldout) {
      src.push_back(to_tokens(result.data.vocab, pair.source, /*strip_eos=*/false));
      ref.push_back(to_tokens(result.data.vocab, pair.target, /*strip_eos=*/false));
    }
    if (!a.heldout_src.empty()) write_token_corpus(a.heldout_src, src);
    if (!a.heldout_ref.empty()) write_token_corpus(a.heldout_ref, ref);
  }
  std::fprintf(stderr, "wrote %s and %s\n", a.output.c_str(), vocab_path.c_str());
  return 0;
}

void write_trace_csv(const std::string& path, const std::vector<SentenceResult>& results) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trace CSV " + path);
  out << "sentence,n_w,n_c,forward_calls,rescore_columns,amr,search_ms\n";
  int64_t n_w = 0, n_c = 0, calls = 0, cols = 0;
  double ms = 0.0;
  for (size_t i = 0; i < results.size(); ++i) {
    const DecodeTrace& t = results[i].decode.trace;
    char buf[192];
    std::snprintf(buf, sizeof(buf), "%zu,%lld,%lld,%lld,%lld,%.6f,%.3f", i,
                  static_cast<long long>(t.candidates), static_cast<long long>(t.sub_cubes),
                  static_cast<long long>(t.forward_calls),
                  static_cast<long long>(t.rescore_columns), amr(t), t.search_ms);
    out << buf << '\n';
    n_w += t.candidates;
    n_c += t.sub_cubes;
    calls += t.forward_calls;
    cols += t.rescore_columns;
    ms += t.search_ms;
  }
  char buf[192];
  std::snprintf(buf, sizeof(buf), "total,%lld,%lld,%lld,%lld,%.6f,%.3f",
                static_cast<long long>(n_w), static_cast<long long>(n_c),
                static_cast<long long>(calls), static_cast<long long>(cols), amr(n_w, n_c), ms);
  out << buf << '\n';
}

int run_decode(const DecodeArgs& a) {
  const Vocabulary vocab = Vocabulary::load(a.vocab);
  const ModelParams params = load_checked(a.model, vocab);
  const auto corpus = map_corpus(read_token_corpus(a.input), vocab);

  DecodeOptions opt;
  opt.beam_size = a.beam_size;
  opt.mode = a.self_norm ? ScoreMode::self_normalized : ScoreMode::normalized;
  opt.strategy = strategy_from_name(a.strategy);
  opt.length_norm = a.length_norm;
  opt.max_len_factor = a.max_len_factor;

  const std::vector<SentenceResult> results = translate_corpus(params, corpus, opt, a.threads);

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!a.output.empty()) {
    file.open(a.output);
    if (!file) throw IoError("cannot write output file " + a.output);
    out = &file;
  }
  for (const SentenceResult& r : results) {
    const auto tokens = to_tokens(vocab, r.decode.words);
    for (size_t i = 0; i < tokens.size(); ++i) {
      if (i) *out << ' ';
      *out << tokens[i];
    }
    *out << '\n';
  }
  if (!a.trace_path.empty()) write_trace_csv(a.trace_path, results);
  return 0;
}

int run_bench(const BenchArgs& a) {
  const Vocabulary vocab = Vocabulary::load(a.vocab);
  const ModelParams params = load_checked(a.model, vocab);
  const auto sources = map_corpus(read_token_corpus(a.input), vocab);
  const auto refs = read_token_corpus(a.refs);
  if (sources.empty()) throw InputError("benchmark corpus is empty");
  if (sources.size() != refs.size()) {
    std::fprintf(stderr, "error: %zu source lines vs %zu reference lines\n", sources.size(),
                 refs.size());
    return kExitLineCount;
  }

  BenchTask task;
  task.strategies.clear();
  for (const std::string& s : a.strategies) task.strategies.push_back(strategy_from_name(s));
  task.beams = a.beams;
  if (a.self_norm == "both")
    task.self_norm = {false, true};
  else if (a.self_norm == "on")
    task.self_norm = {true};
  else if (a.self_norm == "off")
    task.self_norm = {false};
  else
    throw InputError("--self-norm must be one of both|on|off");
  task.length_norm = a.length_norm;
  task.threads = a.threads;

  const std::vector<BenchOutcome> outcomes = run_bench(params, sources, refs, vocab, task);
  std::vector<BenchRecord> records;
  records.reserve(outcomes.size());
  for (const BenchOutcome& o : outcomes) records.push_back(o.record);
  write_bench_csv(a.output, records);
  std::cout << bench_csv_header() << '\n';
  for (const BenchRecord& r : records) std::cout << bench_csv_row(r) << '\n';
  return 0;
}

int run_eval_bleu(const EvalArgs& a) {
  const auto cand = read_token_corpus(a.candidates);
  const auto refs = read_token_corpus(a.references);
  if (cand.size() != refs.size()) {
    std::fprintf(stderr, "error: %zu candidate lines vs %zu reference lines\n", cand.size(),
                 refs.size());
    return kExitLineCount;
  }
  if (cand.empty()) throw InputError("empty corpus");
  const double score = bleu4(cand, refs, /*case_insensitive=*/!a.case_sensitive);
  std::printf("%.2f\n", score * 100.0);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"attention-based encoder-decoder translator with naive beam search and cube-pruning decoding"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train a model on a synthetic task");
  train_cmd->add_option("--task", train_args.task, "copy|reverse")->default_val("copy");
  train_cmd->add_option("--vocab", train_args.vocab, "total vocabulary size incl. reserved tokens");
  train_cmd->add_option("--len-min", train_args.len_min);
  train_cmd->add_option("--len-max", train_args.len_max);
  train_cmd->add_option("--count", train_args.count, "number of generated pairs");
  train_cmd->add_option("--self-norm-alpha", train_args.alpha,
                        "self-normalization penalty weight; 0 trains plain CE");
  train_cmd->add_option("--batch-size", train_args.batch_size);
  train_cmd->add_option("--epochs", train_args.epochs);
  train_cmd->add_option("--rho", train_args.rho);
  train_cmd->add_option("--epsilon", train_args.epsilon);
  train_cmd->add_option("--clip-norm", train_args.clip_norm);
  train_cmd->add_option("--seed", train_args.seed);
  train_cmd->add_option("--emb-dim", train_args.emb_dim);
  train_cmd->add_option("--hidden-dim", train_args.hidden_dim);
  train_cmd->add_option("-o,--output", train_args.output, "weights file")->required();
  train_cmd->add_option("--vocab-out", train_args.vocab_out, "vocabulary file (default: <output>.vocab)");
  train_cmd->add_option("--log", train_args.log_path, "per-epoch CSV log");
  train_cmd->add_option("--dump-heldout-src", train_args.heldout_src);
  train_cmd->add_option("--dump-heldout-ref", train_args.heldout_ref);

  DecodeArgs decode_args;
  auto* decode_cmd = app.add_subcommand("decode", "translate a corpus");
  decode_cmd->add_option("--model", decode_args.model)->required();
  decode_cmd->add_option("--vocab", decode_args.vocab)->required();
  decode_cmd->add_option("--input", decode_args.input)->required();
  decode_cmd->add_option("-o,--output", decode_args.output, "default: stdout");
  decode_cmd->add_option("--strategy", decode_args.strategy, "nbs|ncp|acp");
  decode_cmd->add_option("--beam-size", decode_args.beam_size);
  decode_cmd->add_flag("--self-norm", decode_args.self_norm,
                       "score with raw output scores, skipping normalization");
  decode_cmd->add_flag("--length-norm", decode_args.length_norm);
  decode_cmd->add_option("--max-len-factor", decode_args.max_len_factor);
  decode_cmd->add_option("--trace", decode_args.trace_path, "per-sentence counters CSV");
  decode_cmd->add_option("--threads", decode_args.threads);
  decode_cmd->add_option("--seed", decode_args.seed);

  BenchArgs bench_args;
  auto* bench_cmd = app.add_subcommand("bench", "sweep strategies and beams, write a CSV report");
  bench_cmd->add_option("--model", bench_args.model)->required();
  bench_cmd->add_option("--vocab", bench_args.vocab)->required();
  bench_cmd->add_option("--input", bench_args.input)->required();
  bench_cmd->add_option("--refs", bench_args.refs)->required();
  bench_cmd->add_option("-o,--output", bench_args.output, "CSV report")->required();
  bench_cmd->add_option("--beams", bench_args.beams);
  bench_cmd->add_option("--strategies", bench_args.strategies);
  bench_cmd->add_option("--self-norm", bench_args.self_norm, "both|on|off");
  bench_cmd->add_flag("--length-norm", bench_args.length_norm);
  bench_cmd->add_option("--max-len-factor", bench_args.max_len_factor);
  bench_cmd->add_option("--threads", bench_args.threads);

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval-bleu", "corpus-level 4-gram BLEU, printed x100");
  eval_cmd->add_option("--candidates", eval_args.candidates)->required();
  eval_cmd->add_option("--references", eval_args.references)->required();
  eval_cmd->add_flag("--case-sensitive", eval_args.case_sensitive);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (app.got_subcommand(train_cmd)) return run_train(train_args);
    if (app.got_subcommand(decode_cmd)) return run_decode(decode_args);
    if (app.got_subcommand(bench_cmd)) return run_bench(bench_args);
    if (app.got_subcommand(eval_cmd)) return run_eval_bleu(eval_args);
  } catch (const TrainingError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitDiverged;
  } catch (const VocabError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitMismatch;
  } catch (const DimensionError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitMismatch;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const InputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
