#include "cubenmt/corpus.hpp"

#include <fstream>
#include <sstream>

#include "cubenmt/error.hpp"

namespace cubenmt {

std::vector<std::vector<std::string>> read_token_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file " + path);
  std::vector<std::vector<std::string>> corpus;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::vector<std::string> tokens;
    std::string tok;
    while (ls >> tok) tokens.push_back(tok);
    corpus.push_back(std::move(tokens));
  }
  return corpus;
}

void write_token_corpus(const std::string& path,
                        const std::vector<std::vector<std::string>>& corpus) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write corpus file " + path);
  for (const auto& sent : corpus) {
    for (size_t i = 0; i < sent.size(); ++i) {
      if (i) out << ' ';
      out << sent[i];
    }
    out << '\n';
  }
}

std::vector<std::vector<int>> map_corpus(const std::vector<std::vector<std::string>>& corpus,
                                         const Vocabulary& vocab) {
  std::vector<std::vector<int>> mapped;
  mapped.reserve(corpus.size());
  for (const auto& sent : corpus) {
    std::vector<int> ids;
    ids.reserve(sent.size());
    for (const auto& tok : sent) ids.push_back(vocab.lookup(tok));
    mapped.push_back(std::move(ids));
  }
  return mapped;
}

std::vector<std::string> to_tokens(const Vocabulary& vocab, const std::vector<int>& words,
                                   bool strip_eos) {
  std::vector<std::string> tokens;
  tokens.reserve(words.size());
  for (size_t i = 0; i < words.size(); ++i) {
    if (strip_eos && i + 1 == words.size() && words[i] == Vocabulary::kEos) break;
    tokens.push_back(vocab.token(words[i]));
  }
  return tokens;
}

}  // namespace cubenmt
