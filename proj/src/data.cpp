#include "srlf/data.hpp"

#include "srlf/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <tuple>

namespace srlf {

using ordered_json = nlohmann::ordered_json;

namespace {

[[noreturn]] void fail(long line, const std::string& what) {
  throw ValidationError("line " + std::to_string(line) + ": " + what);
}

const nlohmann::json& field(const nlohmann::json& obj, const char* name, long line) {
  auto it = obj.find(name);
  if (it == obj.end()) fail(line, std::string("missing field '") + name + "'");
  return *it;
}

std::string string_field(const nlohmann::json& obj, const char* name, long line) {
  const auto& v = field(obj, name, line);
  if (!v.is_string()) fail(line, std::string("field '") + name + "' must be a string");
  return v.get<std::string>();
}

}  // namespace

std::vector<Thread> load_threads(std::istream& in) {
  std::vector<Thread> threads;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(line_no, std::string("malformed record: ") + e.what());
    }
    if (!record.is_object()) fail(line_no, "record must be an object");
    Thread t;
    t.id = string_field(record, "id", line_no);
    t.source = string_field(record, "source", line_no);
    const std::string label = string_field(record, "label", line_no);
    auto veracity = parse_veracity(label);
    if (!veracity) fail(line_no, "field 'label' has unknown value '" + label + "' (expected NR|FR|TR|UR)");
    t.label = *veracity;
    const auto& comments = field(record, "comments", line_no);
    if (!comments.is_array()) fail(line_no, "field 'comments' must be an array");
    for (const auto& c : comments) {
      if (!c.is_object()) fail(line_no, "each comment must be an object");
      Comment comment;
      comment.text = string_field(c, "text", line_no);
      const std::string stance = string_field(c, "stance", line_no);
      auto parsed = parse_stance(stance);
      if (!parsed) {
        fail(line_no, "field 'stance' has unknown value '" + stance + "' (expected support|deny|query|comment)");
      }
      comment.stance = *parsed;
      if (auto it = c.find("corrupted"); it != c.end() && !it->is_null()) {
        if (!it->is_boolean()) fail(line_no, "field 'corrupted' must be true or false");
        comment.corrupted = it->get<bool>();
      }
      t.comments.push_back(std::move(comment));
    }
    threads.push_back(std::move(t));
  }
  return threads;
}

std::vector<Thread> load_threads(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open thread file " + path.string());
  return load_threads(in);
}

std::string to_json_line(const Thread& thread) {
  ordered_json record;
  record["id"] = thread.id;
  record["source"] = thread.source;
  record["label"] = std::string(to_string(thread.label));
  auto comments = ordered_json::array();
  for (const auto& c : thread.comments) {
    ordered_json entry;
    entry["text"] = c.text;
    entry["stance"] = std::string(to_string(c.stance));
    if (c.corrupted) entry["corrupted"] = *c.corrupted;
    comments.push_back(std::move(entry));
  }
  record["comments"] = std::move(comments);
  return record.dump();
}

void write_threads(std::ostream& out, std::span<const Thread> threads) {
  for (const auto& t : threads) out << to_json_line(t) << '\n';
}

void write_threads(const std::filesystem::path& path, std::span<const Thread> threads) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write thread file " + path.string());
  write_threads(out, threads);
  if (!out) throw ValidationError("write failed for " + path.string());
}

DataSplit split_threads(std::span<const Thread> threads, std::uint64_t seed) {
  const std::size_t n = threads.size();
  if (n < 8) throw ValidationError("split: need at least 8 threads, got " + std::to_string(n));
  Rng rng = make_rng(seed, Stream::split);

  std::array<std::vector<std::size_t>, kClassCount> by_class;
  for (std::size_t i = 0; i < n; ++i) by_class[static_cast<std::size_t>(threads[i].label)].push_back(i);

  // Rank each item by its evenly spaced position within its (shuffled) class.
  std::vector<std::tuple<double, int, std::size_t>> order;
  order.reserve(n);
  for (int c = 0; c < kClassCount; ++c) {
    auto& members = by_class[static_cast<std::size_t>(c)];
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t j = 0; j < members.size(); ++j) {
      const double position = (static_cast<double>(j) + 0.5) / static_cast<double>(members.size());
      order.emplace_back(position, c, members[j]);
    }
  }
  std::sort(order.begin(), order.end());

  const std::size_t n_val = n / 10;
  const std::size_t n_test = (n - n_val) / 4;
  DataSplit out;
  for (std::size_t i = 0; i < n; ++i) {
    const Thread& t = threads[std::get<2>(order[i])];
    if (i < n_val) {
      out.val.push_back(t);
    } else if (i < n_val + n_test) {
      out.test.push_back(t);
    } else {
      out.train.push_back(t);
    }
  }
  return out;
}

std::vector<std::string> SynthConfig::validate() const {
  std::vector<std::string> errors;
  if (threads == 0) errors.emplace_back("synth threads must be positive");
  if (comments == 0) errors.emplace_back("synth comments must be positive");
  if (tokens == 0) errors.emplace_back("synth tokens must be positive");
  if (vocab < 4 * 2 * 2 + 1) errors.emplace_back("synth vocab must be at least 17");
  for (auto [name, v] : {std::pair{"signal", signal}, std::pair{"source_signal", source_signal},
                         std::pair{"noise", noise}}) {
    if (!(v >= 0.0 && v <= 1.0)) errors.push_back(std::string("synth ") + name + " must lie in [0, 1]");
  }
  return errors;
}

const std::array<double, kStanceCount>& stance_distribution(Veracity label) {
  //                                                       support deny  query comment
  static const std::array<std::array<double, kStanceCount>, kClassCount> table{{
      {0.10, 0.10, 0.10, 0.70},  // NR
      {0.10, 0.45, 0.30, 0.15},  // FR
      {0.60, 0.10, 0.10, 0.20},  // TR
      {0.10, 0.10, 0.50, 0.30},  // UR
  }};
  return table[static_cast<std::size_t>(label)];
}

namespace {

struct SynthVocabulary {
  std::array<std::vector<std::string>, kClassCount> class_tokens;
  std::array<std::vector<std::string>, kStanceCount> stance_tokens;
  std::vector<std::string> background;
};

// Token names are shuffled so ids carry no hint of their role.
SynthVocabulary make_vocabulary(const SynthConfig& cfg) {
  const std::size_t per_set = std::max<std::size_t>(2, cfg.vocab / 25);
  std::vector<std::size_t> names(cfg.vocab);
  std::iota(names.begin(), names.end(), 0);
  Rng rng = make_rng(cfg.seed, Stream::synth, ~std::uint64_t{0});
  std::shuffle(names.begin(), names.end(), rng);
  auto name = [&](std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "w%03zu", names[i]);
    return std::string(buf);
  };
  SynthVocabulary v;
  std::size_t next = 0;
  for (auto& set : v.class_tokens) {
    for (std::size_t j = 0; j < per_set; ++j) set.push_back(name(next++));
  }
  for (auto& set : v.stance_tokens) {
    for (std::size_t j = 0; j < per_set; ++j) set.push_back(name(next++));
  }
  while (next < cfg.vocab) v.background.push_back(name(next++));
  return v;
}

std::string draw_text(const std::vector<std::string>& signature, const std::vector<std::string>& background,
                      double signal, std::size_t tokens, Rng& rng) {
  std::string out;
  for (std::size_t i = 0; i < tokens; ++i) {
    const bool from_signature = uniform01(rng) < signal;
    const auto& pool = from_signature ? signature : background;
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    if (!out.empty()) out.push_back(' ');
    out += pool[pick(rng)];
  }
  return out;
}

int draw_categorical(const std::array<double, kStanceCount>& probs, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (int i = 0; i < kStanceCount; ++i) {
    acc += probs[static_cast<std::size_t>(i)];
    if (u < acc) return i;
  }
  return kStanceCount - 1;
}

}  // namespace

std::vector<Thread> generate(const SynthConfig& cfg) {
  if (auto errors = cfg.validate(); !errors.empty()) throw ValidationError(errors.front());
  const SynthVocabulary vocab = make_vocabulary(cfg);
  std::vector<Thread> threads;
  threads.reserve(cfg.threads);
  for (std::size_t i = 0; i < cfg.threads; ++i) {
    Rng rng = make_rng(cfg.seed, Stream::synth, i);
    Thread t;
    char id[32];
    std::snprintf(id, sizeof id, "t%05zu", i);
    t.id = id;
    t.label = static_cast<Veracity>(std::uniform_int_distribution<int>(0, kClassCount - 1)(rng));
    t.source = draw_text(vocab.class_tokens[static_cast<std::size_t>(t.label)], vocab.background, cfg.source_signal,
                         cfg.tokens, rng);
    const auto& dist = stance_distribution(t.label);
    for (std::size_t j = 0; j < cfg.comments; ++j) {
      const int truth = draw_categorical(dist, rng);
      Comment c;
      c.text = draw_text(vocab.stance_tokens[static_cast<std::size_t>(truth)], vocab.background, cfg.signal,
                         cfg.tokens, rng);
      // Both draws happen for every comment so texts do not depend on p.
      const bool corrupt = uniform01(rng) < cfg.noise;
      const int offset = std::uniform_int_distribution<int>(1, kStanceCount - 1)(rng);
      c.stance = static_cast<Stance>(corrupt ? (truth + offset) % kStanceCount : truth);
      c.corrupted = corrupt;
      t.comments.push_back(std::move(c));
    }
    threads.push_back(std::move(t));
  }
  return threads;
}

}  // namespace srlf
