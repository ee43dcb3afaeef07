#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace cubenmt {

// Token/index bijection with three reserved entries at fixed positions.
class Vocabulary {
 public:
  static constexpr int kBos = 0;
  static constexpr int kEos = 1;
  static constexpr int kUnk = 2;

  // Just the reserved tokens.
  Vocabulary();

  // Full token list; the first three entries must be the reserved literals.
  explicit Vocabulary(std::vector<std::string> tokens);

  // Reserved tokens followed by generated words w3..w{n-1}.
  static Vocabulary with_generated_words(int total_size);

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int index) const;
  // Index of the token, or kUnk when absent.
  int lookup(const std::string& token) const;
  bool contains(const std::string& token) const;

  // Plain text, one token per line, line N = index N.
  static Vocabulary load(const std::string& path);
  void save(const std::string& path) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace cubenmt
