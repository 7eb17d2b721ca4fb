#pragma once

// Tokenization, vocabulary, embedding table and the CNN sentence encoder.

#include "srlf/rng.hpp"
#include "srlf/tensor.hpp"

#include <filesystem>
#include <istream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace srlf {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace text {

inline constexpr int kPad = 0;
inline constexpr int kUnk = 1;
inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kUnkToken = "<unk>";

/// Lowercased, whitespace-separated tokens.
std::vector<std::string> tokenize(std::string_view text);

/// Keeps the first `length` ids, or left-pads with PAD up to `length`.
std::vector<int> pad_truncate(std::span<const int> ids, std::size_t length);

class Vocab {
 public:
  Vocab();

  /// Tokens seen at least `min_count` times get ids from 2 upwards, ordered
  /// by descending frequency then ascending token.
  static Vocab build(std::span<const std::string> texts, int min_count = 1);
  static Vocab from_tokens(std::vector<std::string> tokens);

  int id(std::string_view token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// tokenize -> ids (UNK for unknown) -> pad_truncate.
  std::vector<int> encode(std::string_view text, std::size_t length) const;

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

/// V x d_w table: PAD row zero, rows of tokens found in the file copied, all
/// other rows uniform on +-sqrt(6 / d_w).
Matrix load_pretrained(std::istream& in, const Vocab& vocab, Rng& rng);
Matrix load_pretrained(const std::filesystem::path& path, const Vocab& vocab, Rng& rng);

/// Random table with the same initialization rule as out-of-vocabulary rows.
Matrix random_embeddings(std::size_t vocab_size, Eigen::Index width, Rng& rng);

/// Convolution banks: one (h * d_w) x m matrix per kernel size h, column j
/// being kernel j flattened row-major from its h x d_w shape.
struct EncoderParams {
  std::vector<int> kernel_sizes;
  std::vector<Parameter> banks;

  static EncoderParams init(std::span<const int> kernel_sizes, Eigen::Index word_dim, Eigen::Index output_dim,
                            Rng& rng);
  Eigen::Index output_dim() const;
  std::vector<Parameter*> all();
};

/// Encodes S texts of `length` ids each (flattened row-major in `ids`) to an
/// S x d matrix: per kernel, conv -> relu -> max over time; pooled values are
/// grouped by kernel size, then kernel index.
Var encode_texts(const Var& embedding, std::span<const Var> banks, std::span<const int> kernel_sizes,
                 std::span<const int> ids, std::size_t length);

/// Single-text convenience returning a 1 x d row.
Var encode_text(const Var& embedding, std::span<const Var> banks, std::span<const int> kernel_sizes,
                std::span<const int> ids);

}  // namespace text
}  // namespace srlf
