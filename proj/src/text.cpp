#include "srlf/text.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace srlf::text {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<int> pad_truncate(std::span<const int> ids, std::size_t length) {
  std::vector<int> out(length, kPad);
  if (ids.size() >= length) {
    std::copy_n(ids.begin(), length, out.begin());
  } else {
    std::copy(ids.begin(), ids.end(), out.begin() + static_cast<std::ptrdiff_t>(length - ids.size()));
  }
  return out;
}

Vocab::Vocab() {
  tokens_ = {std::string(kPadToken), std::string(kUnkToken)};
  index_ = {{tokens_[0], kPad}, {tokens_[1], kUnk}};
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  Vocab v;
  v.index_.clear();
  for (auto& t : tokens) {
    if (t == kPadToken || t == kUnkToken) continue;
    v.tokens_.push_back(std::move(t));
  }
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (!v.index_.emplace(v.tokens_[i], static_cast<int>(i)).second) {
      throw ParseError("vocabulary: duplicate token '" + v.tokens_[i] + "'");
    }
  }
  return v;
}

Vocab Vocab::build(std::span<const std::string> texts, int min_count) {
  if (min_count < 1) throw std::invalid_argument("build_vocab: min_count must be >= 1");
  std::map<std::string, long> counts;
  for (const auto& t : texts) {
    for (auto& tok : tokenize(t)) ++counts[tok];
  }
  std::vector<std::pair<std::string, long>> kept;
  for (auto& [tok, n] : counts) {
    if (n >= min_count && tok != kPadToken && tok != kUnkToken) kept.emplace_back(tok, n);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& [tok, n] : kept) tokens.push_back(tok);
  return from_tokens(std::move(tokens));
}

int Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

std::vector<int> Vocab::encode(std::string_view text, std::size_t length) const {
  std::vector<int> ids;
  for (const auto& tok : tokenize(text)) ids.push_back(id(tok));
  return pad_truncate(ids, length);
}

Matrix random_embeddings(std::size_t vocab_size, Eigen::Index width, Rng& rng) {
  Matrix table = uniform_matrix(static_cast<Eigen::Index>(vocab_size), width,
                                std::sqrt(6.0 / static_cast<double>(width)), rng);
  if (table.rows() > 0) table.row(kPad).setZero();
  return table;
}

Matrix load_pretrained(std::istream& in, const Vocab& vocab, Rng& rng) {
  std::string line;
  long line_no = 1;
  if (!std::getline(in, line)) throw ParseError("embeddings:1: missing header 'V d_w'");
  long count = 0;
  long width = 0;
  {
    std::istringstream header(line);
    std::string extra;
    if (!(header >> count >> width) || (header >> extra) || count < 0 || width < 1) {
      throw ParseError("embeddings:1: malformed header, expected 'V d_w'");
    }
  }
  Matrix table = random_embeddings(vocab.size(), width, rng);
  for (long i = 0; i < count; ++i) {
    ++line_no;
    if (!std::getline(in, line)) {
      throw ParseError("embeddings:" + std::to_string(line_no) + ": expected " + std::to_string(count) +
                       " vectors, file ended early");
    }
    std::istringstream row(line);
    std::string token;
    if (!(row >> token)) throw ParseError("embeddings:" + std::to_string(line_no) + ": empty line");
    Eigen::RowVectorXd vec(width);
    for (long j = 0; j < width; ++j) {
      std::string field;
      if (!(row >> field)) {
        throw ParseError("embeddings:" + std::to_string(line_no) + ": expected " + std::to_string(width) +
                         " values for '" + token + "'");
      }
      try {
        std::size_t used = 0;
        vec(j) = std::stod(field, &used);
        if (used != field.size() || !std::isfinite(vec(j))) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw ParseError("embeddings:" + std::to_string(line_no) + ": bad number '" + field + "'");
      }
    }
    std::string extra;
    if (row >> extra) {
      throw ParseError("embeddings:" + std::to_string(line_no) + ": more than " + std::to_string(width) + " values");
    }
    const int id = vocab.id(token);
    if (id != kUnk && id != kPad) table.row(id) = vec;
  }
  return table;
}

Matrix load_pretrained(const std::filesystem::path& path, const Vocab& vocab, Rng& rng) {
  std::ifstream in(path);
  if (!in) throw ParseError("embeddings: cannot open " + path.string());
  return load_pretrained(in, vocab, rng);
}

EncoderParams EncoderParams::init(std::span<const int> kernel_sizes, Eigen::Index word_dim, Eigen::Index output_dim,
                                  Rng& rng) {
  if (kernel_sizes.empty()) throw std::invalid_argument("encoder: no kernel sizes");
  const auto groups = static_cast<Eigen::Index>(kernel_sizes.size());
  if (output_dim % groups != 0) throw std::invalid_argument("encoder: d must be divisible by the number of kernel sizes");
  const Eigen::Index per = output_dim / groups;
  EncoderParams p;
  p.kernel_sizes.assign(kernel_sizes.begin(), kernel_sizes.end());
  for (int h : kernel_sizes) {
    if (h < 1) throw std::invalid_argument("encoder: kernel size must be positive");
    p.banks.emplace_back("conv" + std::to_string(h), glorot_uniform(h * word_dim, per, rng));
  }
  return p;
}

Eigen::Index EncoderParams::output_dim() const {
  Eigen::Index d = 0;
  for (const auto& b : banks) d += b.value.cols();
  return d;
}

std::vector<Parameter*> EncoderParams::all() {
  std::vector<Parameter*> out;
  for (auto& b : banks) out.push_back(&b);
  return out;
}

Var encode_texts(const Var& embedding, std::span<const Var> banks, std::span<const int> kernel_sizes,
                 std::span<const int> ids, std::size_t length) {
  if (banks.size() != kernel_sizes.size()) throw DimensionError("encode_texts: bank/kernel size count differs");
  if (length == 0 || ids.size() % length != 0) throw DimensionError("encode_texts: ids not a multiple of length");
  const auto len = static_cast<Eigen::Index>(length);
  auto x = gather_rows(embedding, ids, kPad);
  std::vector<Var> pooled;
  pooled.reserve(banks.size());
  for (std::size_t k = 0; k < banks.size(); ++k) {
    const Eigen::Index h = kernel_sizes[k];
    auto feature_map = relu(matmul(windows(x, h, len), banks[k]));
    pooled.push_back(max_over_time(feature_map, len - h + 1));
  }
  return concat_cols(std::span<const Var>(pooled));
}

Var encode_text(const Var& embedding, std::span<const Var> banks, std::span<const int> kernel_sizes,
                std::span<const int> ids) {
  return encode_texts(embedding, banks, kernel_sizes, ids, ids.size());
}

}  // namespace srlf::text
