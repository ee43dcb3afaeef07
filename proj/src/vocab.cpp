#include "cubenmt/vocab.hpp"

#include <fstream>

#include "cubenmt/error.hpp"

namespace cubenmt {

namespace {
const char* kReserved[3] = {"<bos>", "<eos>", "<unk>"};
}

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{"<bos>", "<eos>", "<unk>"}) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < 3) throw VocabError("vocabulary needs the three reserved tokens");
  for (int i = 0; i < 3; ++i)
    if (tokens_[i] != kReserved[i])
      throw VocabError("vocabulary line " + std::to_string(i) + " must be " + kReserved[i]);
  for (int i = 0; i < static_cast<int>(tokens_.size()); ++i) {
    if (tokens_[i].empty()) throw VocabError("empty token at index " + std::to_string(i));
    auto [it, inserted] = index_.emplace(tokens_[i], i);
    if (!inserted) throw VocabError("duplicate token '" + tokens_[i] + "'");
  }
}

Vocabulary Vocabulary::with_generated_words(int total_size) {
  if (total_size < 3) throw VocabError("vocabulary size must be at least 3");
  std::vector<std::string> tokens = {"<bos>", "<eos>", "<unk>"};
  tokens.reserve(total_size);
  for (int i = 3; i < total_size; ++i) tokens.push_back("w" + std::to_string(i));
  return Vocabulary(std::move(tokens));
}

const std::string& Vocabulary::token(int index) const {
  if (index < 0 || index >= size())
    throw VocabError("token index " + std::to_string(index) + " outside vocabulary");
  return tokens_[index];
}

int Vocabulary::lookup(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(const std::string& token) const { return index_.count(token) > 0; }

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary file " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocabulary(std::move(tokens));
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocabulary file " + path);
  for (const auto& t : tokens_) out << t << '\n';
}

}  // namespace cubenmt
