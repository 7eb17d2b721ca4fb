#include "srlf/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace srlf {

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += "\n  " + s;
  return out;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::optional<double> parse_double(std::string_view s) {
  std::string tmp(s);
  try {
    std::size_t used = 0;
    double v = std::stod(tmp, &used);
    if (used != tmp.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

template <typename Int>
std::optional<Int> parse_int(std::string_view s) {
  Int v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// Shortest text that parses back to the same double.
std::string format_double(double v) {
  char buf[40];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

using Setter = std::function<std::optional<std::string>(RunConfig&, std::string_view)>;

struct Entry {
  std::string_view description;
  Setter set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Entry size_entry(std::string_view description, T RunConfig::*, std::function<T&(RunConfig&)> ref, bool allow_zero) {
  return Entry{description,
               [ref, allow_zero](RunConfig& c, std::string_view v) -> std::optional<std::string> {
                 auto parsed = parse_int<long long>(v);
                 if (!parsed || *parsed < (allow_zero ? 0 : 1)) {
                   return std::string(allow_zero ? "expected a non-negative integer" : "expected a positive integer");
                 }
                 ref(c) = static_cast<T>(*parsed);
                 return std::nullopt;
               },
               [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); }};
}

Entry count_entry(std::string_view description, std::function<std::size_t&(RunConfig&)> ref) {
  return Entry{description,
               [ref](RunConfig& c, std::string_view v) -> std::optional<std::string> {
                 auto parsed = parse_int<long long>(v);
                 if (!parsed || *parsed < 1) return std::string("expected a positive integer");
                 ref(c) = static_cast<std::size_t>(*parsed);
                 return std::nullopt;
               },
               [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); }};
}

Entry index_entry(std::string_view description, std::function<Eigen::Index&(RunConfig&)> ref) {
  return Entry{description,
               [ref](RunConfig& c, std::string_view v) -> std::optional<std::string> {
                 auto parsed = parse_int<long long>(v);
                 if (!parsed || *parsed < 1) return std::string("expected a positive integer");
                 ref(c) = static_cast<Eigen::Index>(*parsed);
                 return std::nullopt;
               },
               [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); }};
}

Entry int_entry(std::string_view description, std::function<int&(RunConfig&)> ref, int minimum) {
  return Entry{description,
               [ref, minimum](RunConfig& c, std::string_view v) -> std::optional<std::string> {
                 auto parsed = parse_int<int>(v);
                 if (!parsed || *parsed < minimum) return "expected an integer >= " + std::to_string(minimum);
                 ref(c) = *parsed;
                 return std::nullopt;
               },
               [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); }};
}

Entry real_entry(std::string_view description, std::function<double&(RunConfig&)> ref, double lo, double hi) {
  return Entry{description,
               [ref, lo, hi](RunConfig& c, std::string_view v) -> std::optional<std::string> {
                 auto parsed = parse_double(v);
                 if (!parsed || !(*parsed >= lo && *parsed <= hi)) {
                   return "expected a number in [" + format_double(lo) + ", " + format_double(hi) + "]";
                 }
                 ref(c) = *parsed;
                 return std::nullopt;
               },
               [ref](const RunConfig& c) { return format_double(ref(const_cast<RunConfig&>(c))); }};
}

template <typename E, std::size_t N>
Entry enum_entry(std::string_view description, std::function<E&(RunConfig&)> ref,
                 std::array<std::pair<std::string_view, E>, N> names) {
  return Entry{description,
               [ref, names](RunConfig& c, std::string_view v) -> std::optional<std::string> {
                 for (const auto& [name, value] : names) {
                   if (name == v) {
                     ref(c) = value;
                     return std::nullopt;
                   }
                 }
                 std::string allowed;
                 for (const auto& [name, value] : names) allowed += (allowed.empty() ? "" : "|") + std::string(name);
                 return "expected one of " + allowed;
               },
               [ref, names](const RunConfig& c) {
                 for (const auto& [name, value] : names) {
                   if (value == ref(const_cast<RunConfig&>(c))) return std::string(name);
                 }
                 return std::string("?");
               }};
}

Entry path_entry(std::string_view description, std::function<std::optional<std::filesystem::path>&(RunConfig&)> ref) {
  return Entry{description,
               [ref](RunConfig& c, std::string_view v) -> std::optional<std::string> {
                 if (v.empty()) {
                   ref(c).reset();
                 } else {
                   ref(c) = std::filesystem::path(std::string(v));
                 }
                 return std::nullopt;
               },
               [ref](const RunConfig& c) {
                 const auto& p = ref(const_cast<RunConfig&>(c));
                 return p ? p->string() : std::string();
               }};
}

// Ordered: echo() prints in this order.
const std::vector<std::pair<std::string_view, Entry>>& registry() {
  static const std::vector<std::pair<std::string_view, Entry>> entries = [] {
    std::vector<std::pair<std::string_view, Entry>> e;
    e.emplace_back("d", index_entry("encoder output width d", [](RunConfig& c) -> Eigen::Index& {
                     return c.train.dims.hidden_dim;
                   }));
    e.emplace_back("d_w", index_entry("word embedding width d_w", [](RunConfig& c) -> Eigen::Index& {
                     return c.train.dims.word_dim;
                   }));
    e.emplace_back("max_len", count_entry("tokens per text L (left-pad / truncate)", [](RunConfig& c) -> std::size_t& {
                     return c.train.dims.max_len;
                   }));
    e.emplace_back("max_comments",
                   count_entry("comment capacity N per thread", [](RunConfig& c) -> std::size_t& {
                     return c.train.dims.max_comments;
                   }));
    e.emplace_back("lstm_hidden", index_entry("hidden size h_l of each LSTM direction", [](RunConfig& c) -> Eigen::Index& {
                     return c.train.dims.lstm_hidden;
                   }));
    e.emplace_back("classes", int_entry("number of veracity classes r (must be 4)",
                                        [](RunConfig& c) -> int& { return c.train.dims.classes; }, 1));
    e.emplace_back(
        "kernel_sizes",
        Entry{"comma-separated convolution kernel sizes",
              [](RunConfig& c, std::string_view v) -> std::optional<std::string> {
                std::vector<int> sizes;
                std::string s(v);
                std::stringstream ss(s);
                std::string item;
                while (std::getline(ss, item, ',')) {
                  auto parsed = parse_int<int>(trim(item));
                  if (!parsed || *parsed < 1) return std::string("expected comma-separated positive integers");
                  sizes.push_back(*parsed);
                }
                if (sizes.empty()) return std::string("expected at least one kernel size");
                c.train.dims.kernel_sizes = sizes;
                return std::nullopt;
              },
              [](const RunConfig& c) {
                std::string out;
                for (int h : c.train.dims.kernel_sizes) out += (out.empty() ? "" : ",") + std::to_string(h);
                return out;
              }});
    e.emplace_back("episodes", int_entry("episodes K per agent sample", [](RunConfig& c) -> int& {
                     return c.train.agent.episodes;
                   }, 1));
    e.emplace_back("gamma", real_entry("discount factor in [0, 1]", [](RunConfig& c) -> double& {
                     return c.train.agent.gamma;
                   }, 0.0, 1.0));
    e.emplace_back("lambda", real_entry("L2 regularization factor", [](RunConfig& c) -> double& {
                     return c.train.lambda;
                   }, 0.0, 1e300));
    e.emplace_back("lr", real_entry("initial Adam learning rate", [](RunConfig& c) -> double& {
                     return c.train.learning_rate;
                   }, 1e-300, 1e300));
    e.emplace_back("lr_decay", real_entry("learning-rate multiplier applied after each epoch",
                                          [](RunConfig& c) -> double& { return c.train.lr_decay; }, 1e-300, 1e300));
    e.emplace_back("batch_size", count_entry("threads per mini-batch", [](RunConfig& c) -> std::size_t& {
                     return c.train.batch_size;
                   }));
    e.emplace_back("epochs", int_entry("training epochs", [](RunConfig& c) -> int& { return c.train.epochs; }, 0));
    e.emplace_back("return_mode",
                   enum_entry<ReturnMode, 2>("literal | return_to_go",
                                             [](RunConfig& c) -> ReturnMode& { return c.train.agent.return_mode; },
                                             {{{"literal", ReturnMode::literal},
                                               {"return_to_go", ReturnMode::return_to_go}}}));
    e.emplace_back("ablation", enum_entry<Ablation, 3>("full | no_pl | no_dl",
                                                       [](RunConfig& c) -> Ablation& { return c.train.ablation; },
                                                       {{{"full", Ablation::full},
                                                         {"no_pl", Ablation::no_pl},
                                                         {"no_dl", Ablation::no_dl}}}));
    e.emplace_back("no_pl_actions",
                   enum_entry<NoPolicyActions, 2>(
                       "actions under no_pl: retain_all | frozen_policy",
                       [](RunConfig& c) -> NoPolicyActions& { return c.train.no_pl_actions; },
                       {{{"retain_all", NoPolicyActions::retain_all},
                         {"frozen_policy", NoPolicyActions::frozen_policy}}}));
    e.emplace_back("agent_view", enum_entry<AgentView, 2>(
                                     "policy input: proposal (c + stance) | state (current modified rows)",
                                     [](RunConfig& c) -> AgentView& { return c.train.agent.view; },
                                     {{{"proposal", AgentView::proposal}, {"state", AgentView::state}}}));
    e.emplace_back("min_count", int_entry("minimum token frequency for the vocabulary",
                                          [](RunConfig& c) -> int& { return c.train.min_count; }, 1));
    e.emplace_back("seed", Entry{"run seed (initialization, shuffling, sampling, synthesis)",
                                 [](RunConfig& c, std::string_view v) -> std::optional<std::string> {
                                   auto parsed = parse_int<std::uint64_t>(v);
                                   if (!parsed) return std::string("expected a non-negative integer");
                                   c.train.seed = *parsed;
                                   c.synth.seed = *parsed;
                                   return std::nullopt;
                                 },
                                 [](const RunConfig& c) { return std::to_string(c.train.seed); }});
    e.emplace_back("data", path_entry("thread file (JSON lines)", [](RunConfig& c) -> std::optional<std::filesystem::path>& {
                     return c.data;
                   }));
    e.emplace_back("embeddings",
                   path_entry("optional pretrained embedding file", [](RunConfig& c) -> std::optional<std::filesystem::path>& {
                     return c.embeddings;
                   }));
    e.emplace_back("out", Entry{"output directory",
                                [](RunConfig& c, std::string_view v) -> std::optional<std::string> {
                                  if (v.empty()) return std::string("expected a path");
                                  c.out = std::string(v);
                                  return std::nullopt;
                                },
                                [](const RunConfig& c) { return c.out.string(); }});
    e.emplace_back("synth_threads", count_entry("synthetic corpus: thread count",
                                                [](RunConfig& c) -> std::size_t& { return c.synth.threads; }));
    e.emplace_back("synth_comments", count_entry("synthetic corpus: comments per thread",
                                                 [](RunConfig& c) -> std::size_t& { return c.synth.comments; }));
    e.emplace_back("synth_vocab", count_entry("synthetic corpus: vocabulary size",
                                              [](RunConfig& c) -> std::size_t& { return c.synth.vocab; }));
    e.emplace_back("synth_tokens", count_entry("synthetic corpus: tokens per text",
                                               [](RunConfig& c) -> std::size_t& { return c.synth.tokens; }));
    e.emplace_back("synth_signal", real_entry("synthetic corpus: comment signal strength s",
                                              [](RunConfig& c) -> double& { return c.synth.signal; }, 0.0, 1.0));
    e.emplace_back("synth_source_signal",
                   real_entry("synthetic corpus: source-text signal strength",
                              [](RunConfig& c) -> double& { return c.synth.source_signal; }, 0.0, 1.0));
    e.emplace_back("synth_noise", real_entry("synthetic corpus: weak-stance corruption rate p",
                                             [](RunConfig& c) -> double& { return c.synth.noise; }, 0.0, 1.0));
    return e;
  }();
  return entries;
}

const Entry* find_entry(std::string_view key) {
  for (const auto& [k, e] : registry()) {
    if (k == key) return &e;
  }
  return nullptr;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error("invalid configuration:" + join(problems)), problems_(std::move(problems)) {}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& [k, e] : registry()) out.push_back(ConfigKey{k, e.description});
    return out;
  }();
  return keys;
}

std::optional<std::string> apply_setting(RunConfig& config, std::string_view key, std::string_view value) {
  const Entry* entry = find_entry(key);
  if (entry == nullptr) return "unknown key '" + std::string(key) + "'";
  if (auto err = entry->set(config, value)) return std::string(key) + ": " + *err + " (got '" + std::string(value) + "')";
  return std::nullopt;
}

RunConfig parse_config(std::istream& in, RunConfig base) {
  std::vector<std::string> problems;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      problems.push_back("line " + std::to_string(line_no) + ": expected key=value");
      continue;
    }
    if (auto err = apply_setting(base, trim(view.substr(0, eq)), trim(view.substr(eq + 1)))) {
      problems.push_back("line " + std::to_string(line_no) + ": " + *err);
    }
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return base;
}

RunConfig parse_config_file(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open config file " + path.string()});
  return parse_config(in, std::move(base));
}

void apply_overrides(RunConfig& config, const std::vector<std::string>& overrides) {
  std::vector<std::string> problems;
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) {
      problems.push_back("override '" + o + "': expected key=value");
      continue;
    }
    if (auto err = apply_setting(config, trim(std::string_view(o).substr(0, eq)),
                                 trim(std::string_view(o).substr(eq + 1)))) {
      problems.push_back(*err);
    }
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
}

std::vector<std::string> validate(const RunConfig& config) {
  auto problems = config.train.validate();
  for (auto& p : config.synth.validate()) problems.push_back(std::move(p));
  return problems;
}

std::string echo(const RunConfig& config) {
  std::string out;
  for (const auto& [k, e] : registry()) out += std::string(k) + "=" + e.get(config) + "\n";
  return out;
}

std::string_view to_string(Ablation a) {
  switch (a) {
    case Ablation::full: return "full";
    case Ablation::no_pl: return "no_pl";
    case Ablation::no_dl: return "no_dl";
  }
  return "?";
}

std::string_view to_string(ReturnMode m) { return m == ReturnMode::literal ? "literal" : "return_to_go"; }
std::string_view to_string(AgentView v) { return v == AgentView::proposal ? "proposal" : "state"; }
std::string_view to_string(NoPolicyActions a) {
  return a == NoPolicyActions::retain_all ? "retain_all" : "frozen_policy";
}

}  // namespace srlf
