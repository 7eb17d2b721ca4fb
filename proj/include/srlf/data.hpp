#pragma once

// Threads with weak stance labels: JSON-lines I/O, stratified splitting and
// the synthetic corpus generator.

#include "srlf/labels.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace srlf {

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Comment {
  std::string text;
  Stance stance = Stance::comment;
  std::optional<bool> corrupted;  // synthetic ground truth only

  bool operator==(const Comment&) const = default;
};

struct Thread {
  std::string id;
  std::string source;
  Veracity label = Veracity::NR;
  std::vector<Comment> comments;  // temporal order

  bool operator==(const Thread&) const = default;
};

/// One JSON object per line: {"id", "source", "label", "comments": [{"text", "stance", "corrupted"?}]}.
/// Blank lines are skipped. Errors carry the 1-based line number.
std::vector<Thread> load_threads(std::istream& in);
std::vector<Thread> load_threads(const std::filesystem::path& path);

std::string to_json_line(const Thread& thread);
void write_threads(std::ostream& out, std::span<const Thread> threads);
void write_threads(const std::filesystem::path& path, std::span<const Thread> threads);

struct DataSplit {
  std::vector<Thread> train;
  std::vector<Thread> val;
  std::vector<Thread> test;
};

/// floor(10%) validation, then floor(25%) of the rest as test, remainder
/// train. Each class is shuffled and spread evenly over the ordering before
/// the cut, so every split keeps the global class mix.
DataSplit split_threads(std::span<const Thread> threads, std::uint64_t seed);

struct SynthConfig {
  std::size_t threads = 400;
  std::size_t comments = 8;   // N_gen
  std::size_t vocab = 200;
  std::size_t tokens = 12;    // per text
  double signal = 0.9;        // s: comment text
  double source_signal = 0.9; // source text
  double noise = 0.4;         // p: weak-stance corruption rate
  std::uint64_t seed = 1;

  /// Empty when valid, otherwise one message per problem.
  std::vector<std::string> validate() const;
};

/// Probability of each true stance given the veracity class, ordered
/// support, deny, query, comment.
const std::array<double, kStanceCount>& stance_distribution(Veracity label);

/// Deterministic in the config: thread i draws from its own stream (seed, i).
std::vector<Thread> generate(const SynthConfig& config);

}  // namespace srlf
