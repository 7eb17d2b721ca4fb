#include "srlf/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace srlf {

namespace {

static_assert(std::numeric_limits<double>::is_iec559, "binary64 doubles required");

template <typename U>
void put_uint(std::ostream& out, U v) {
  unsigned char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <typename U>
U get_uint(std::istream& in) {
  unsigned char bytes[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(U))) throw CheckpointError("checkpoint truncated");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes[i]) << (8 * i);
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put_uint<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in, std::uint64_t limit) {
  const auto n = get_uint<std::uint64_t>(in);
  if (n > limit) throw CheckpointError("checkpoint string length out of range");
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), static_cast<std::streamsize>(n))) throw CheckpointError("checkpoint truncated");
  return s;
}

constexpr char kMagic[8] = {'S', 'R', 'L', 'F', 'C', 'K', 'P', 'T'};
constexpr std::uint64_t kMaxString = std::uint64_t{1} << 30;
constexpr std::uint64_t kMaxCount = std::uint64_t{1} << 32;

}  // namespace

Checkpoint snapshot(Model& model, std::string config_echo) {
  Checkpoint c;
  c.config_echo = std::move(config_echo);
  c.vocab = model.vocab.tokens();
  for (auto* p : model.all()) c.parameters.push_back(NamedMatrix{p->name, p->value});
  return c;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  put_uint<std::uint32_t>(out, kCheckpointVersion);
  put_string(out, checkpoint.config_echo);
  put_uint<std::uint64_t>(out, checkpoint.vocab.size());
  for (const auto& token : checkpoint.vocab) put_string(out, token);
  put_uint<std::uint64_t>(out, checkpoint.parameters.size());
  for (const auto& p : checkpoint.parameters) {
    put_string(out, p.name);
    put_uint<std::uint32_t>(out, 2);
    put_uint<std::uint64_t>(out, static_cast<std::uint64_t>(p.value.rows()));
    put_uint<std::uint64_t>(out, static_cast<std::uint64_t>(p.value.cols()));
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      put_uint<std::uint64_t>(out, std::bit_cast<std::uint64_t>(p.value.data()[i]));
    }
  }
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw CheckpointError(path.string() + " is not a checkpoint");
  }
  const auto version = get_uint<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  c.config_echo = get_string(in, kMaxString);
  const auto vocab_size = get_uint<std::uint64_t>(in);
  if (vocab_size > kMaxCount) throw CheckpointError("vocabulary size out of range");
  for (std::uint64_t i = 0; i < vocab_size; ++i) c.vocab.push_back(get_string(in, kMaxString));
  const auto count = get_uint<std::uint64_t>(in);
  if (count > kMaxCount) throw CheckpointError("parameter count out of range");
  for (std::uint64_t k = 0; k < count; ++k) {
    NamedMatrix p;
    p.name = get_string(in, kMaxString);
    if (get_uint<std::uint32_t>(in) != 2) throw CheckpointError("parameter " + p.name + ": expected 2 dimensions");
    const auto rows = get_uint<std::uint64_t>(in);
    const auto cols = get_uint<std::uint64_t>(in);
    if (rows > kMaxCount || cols > kMaxCount || rows * cols > kMaxString) {
      throw CheckpointError("parameter " + p.name + ": shape out of range");
    }
    p.value.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = std::bit_cast<double>(get_uint<std::uint64_t>(in));
    c.parameters.push_back(std::move(p));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError("trailing bytes after checkpoint");
  return c;
}

void restore(Model& model, const Checkpoint& checkpoint) {
  auto params = model.all();
  if (params.size() != checkpoint.parameters.size()) {
    throw CheckpointError("checkpoint has " + std::to_string(checkpoint.parameters.size()) + " parameters, model has " +
                          std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& saved = checkpoint.parameters[i];
    auto* p = params[i];
    if (saved.name != p->name) {
      throw CheckpointError("parameter " + std::to_string(i) + ": checkpoint has '" + saved.name + "', model expects '" +
                            p->name + "'");
    }
    if (saved.value.rows() != p->value.rows() || saved.value.cols() != p->value.cols()) {
      throw CheckpointError("parameter " + p->name + ": checkpoint shape " + std::to_string(saved.value.rows()) + "x" +
                            std::to_string(saved.value.cols()) + " does not match model shape " +
                            std::to_string(p->value.rows()) + "x" + std::to_string(p->value.cols()));
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = checkpoint.parameters[i].value;
}

}  // namespace srlf
