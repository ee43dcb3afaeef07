#pragma once

#include <string>
#include <vector>

#include "cubenmt/vocab.hpp"

namespace cubenmt {

// One pre-tokenized sentence per line, tokens space-separated, UTF-8.
std::vector<std::vector<std::string>> read_token_corpus(const std::string& path);
void write_token_corpus(const std::string& path,
                        const std::vector<std::vector<std::string>>& corpus);

// Token <-> index mapping; unknown tokens map to UNK.
std::vector<std::vector<int>> map_corpus(const std::vector<std::vector<std::string>>& corpus,
                                         const Vocabulary& vocab);
std::vector<std::string> to_tokens(const Vocabulary& vocab, const std::vector<int>& words,
                                   bool strip_eos = true);

}  // namespace cubenmt
