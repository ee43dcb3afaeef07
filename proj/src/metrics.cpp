#include "cubenmt/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <unordered_map>

#include "cubenmt/decoder.hpp"
#include "cubenmt/error.hpp"

namespace cubenmt {

double amr(int64_t candidates, int64_t sub_cubes) {
  if (sub_cubes <= 0) throw InputError("amr undefined: no sub-cubes counted");
  return static_cast<double>(candidates) / static_cast<double>(sub_cubes);
}

double amr(const DecodeTrace& trace) { return amr(trace.candidates, trace.sub_cubes); }

double amr(const std::vector<DecodeTrace>& traces) {
  int64_t n_w = 0, n_c = 0;
  for (const auto& t : traces) {
    n_w += t.candidates;
    n_c += t.sub_cubes;
  }
  return amr(n_w, n_c);
}

namespace {

std::string fold(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// n-grams keyed by their tokens joined with an unlikely separator.
void count_ngrams(const std::vector<std::string>& sent, int n,
                  std::unordered_map<std::string, int>& counts) {
  const int len = static_cast<int>(sent.size());
  for (int i = 0; i + n <= len; ++i) {
    std::string key = sent[i];
    for (int j = 1; j < n; ++j) {
      key += '\x1f';
      key += sent[i + j];
    }
    ++counts[key];
  }
}

}  // namespace

double bleu4(const std::vector<std::vector<std::string>>& candidates,
             const std::vector<std::vector<std::string>>& references, bool case_insensitive) {
  if (candidates.empty()) throw InputError("bleu4: empty corpus");
  if (candidates.size() != references.size())
    throw InputError("bleu4: candidate and reference corpus sizes differ");

  int64_t matched[4] = {0, 0, 0, 0};
  int64_t total[4] = {0, 0, 0, 0};
  int64_t cand_len = 0, ref_len = 0;

  for (size_t s = 0; s < candidates.size(); ++s) {
    std::vector<std::string> cand = candidates[s];
    std::vector<std::string> ref = references[s];
    if (case_insensitive) {
      for (auto& t : cand) t = fold(t);
      for (auto& t : ref) t = fold(t);
    }
    cand_len += static_cast<int64_t>(cand.size());
    ref_len += static_cast<int64_t>(ref.size());
    for (int n = 1; n <= 4; ++n) {
      std::unordered_map<std::string, int> cg, rg;
      count_ngrams(cand, n, cg);
      count_ngrams(ref, n, rg);
      for (const auto& [key, c] : cg) {
        total[n - 1] += c;
        auto it = rg.find(key);
        if (it != rg.end()) matched[n - 1] += std::min(c, it->second);
      }
    }
  }

  if (cand_len == 0) return 0.0;
  double log_precision = 0.0;
  for (int n = 0; n < 4; ++n) {
    if (matched[n] == 0) return 0.0;  // no smoothing
    log_precision += std::log(static_cast<double>(matched[n]) / static_cast<double>(total[n]));
  }
  const double brevity = std::min(0.0, 1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));
  return std::exp(log_precision / 4.0 + brevity);
}

std::string bench_csv_header() {
  return "strategy,beam,self_norm,amr,forward_calls,ms_per_word,bleu";
}

std::string bench_csv_row(const BenchRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%d,%d,%.6f,%lld,%.6f,%.6f", r.strategy.c_str(), r.beam_size,
                r.self_norm ? 1 : 0, r.amr, static_cast<long long>(r.forward_calls),
                r.ms_per_word, r.bleu);
  return buf;
}

}  // namespace cubenmt
