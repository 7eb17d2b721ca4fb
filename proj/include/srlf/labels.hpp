#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace srlf {

enum class Stance : int { support = 0, deny = 1, query = 2, comment = 3 };
enum class Veracity : int { NR = 0, FR = 1, TR = 2, UR = 3 };

inline constexpr int kStanceCount = 4;
inline constexpr int kClassCount = 4;

inline constexpr std::array<std::string_view, kStanceCount> kStanceNames{"support", "deny", "query", "comment"};
inline constexpr std::array<std::string_view, kClassCount> kVeracityNames{"NR", "FR", "TR", "UR"};

inline std::string_view to_string(Stance s) { return kStanceNames[static_cast<std::size_t>(s)]; }
inline std::string_view to_string(Veracity v) { return kVeracityNames[static_cast<std::size_t>(v)]; }

inline std::optional<Stance> parse_stance(std::string_view s) {
  for (int i = 0; i < kStanceCount; ++i) {
    if (kStanceNames[static_cast<std::size_t>(i)] == s) return static_cast<Stance>(i);
  }
  return std::nullopt;
}

inline std::optional<Veracity> parse_veracity(std::string_view s) {
  for (int i = 0; i < kClassCount; ++i) {
    if (kVeracityNames[static_cast<std::size_t>(i)] == s) return static_cast<Veracity>(i);
  }
  return std::nullopt;
}

}  // namespace srlf
