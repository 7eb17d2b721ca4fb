#pragma once

// Binary checkpoint layout (all integers little-endian):
//   magic "SRLFCKPT" (8 bytes), u32 version = 1
//   u64 n, n bytes        config echo (key=value text)
//   u64 V, then V x (u64 n, n bytes)   vocabulary tokens in id order
//   u64 P, then P x parameter:
//     u64 n, n bytes      name
//     u32 ndim = 2, u64 rows, u64 cols
//     rows*cols f64       row-major values, IEEE-754 binary64 little-endian

#include "srlf/model.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace srlf {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedMatrix {
  std::string name;
  Matrix value;
};

struct Checkpoint {
  std::string config_echo;
  std::vector<std::string> vocab;
  std::vector<NamedMatrix> parameters;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

Checkpoint snapshot(Model& model, std::string config_echo);
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Copies checkpoint values into `model`; names, order and shapes must agree.
void restore(Model& model, const Checkpoint& checkpoint);

}  // namespace srlf
