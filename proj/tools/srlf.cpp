#include "srlf/checkpoint.hpp"
#include "srlf/config.hpp"
#include "srlf/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace srlf;
using json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitNumeric = 2;

struct CommonOptions {
  std::string config;
  std::string preset;
  std::string data;
  std::string out;
  std::string ablation;
  std::string return_mode;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> settings;
};

struct CommandOptions {
  std::string checkpoint;
  std::string split = "test";
  std::string parameter;
  std::string values;
  std::string fault;
  bool parallel = false;
  bool sampled = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "key=value config file");
  cmd->add_option("--preset", o.preset, "starting defaults")->check(CLI::IsMember({"desk", "paper", "tiny"}));
  cmd->add_option("--data", o.data, "thread file (JSON lines)");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--seed", o.seed, "run seed");
  cmd->add_option("--ablation", o.ablation, "full | no_pl | no_dl");
  cmd->add_option("--return-mode", o.return_mode, "literal | return_to_go");
  cmd->add_option("--set", o.settings, "extra key=value setting (repeatable)");
}

RunConfig preset(const std::string& name) {
  RunConfig c;
  if (name == "paper") c.train = TrainConfig::paper();
  if (name == "tiny") {
    c.train = TrainConfig::tiny();
    c.synth.threads = 8;
    c.synth.comments = 3;
    c.synth.vocab = 20;
    c.synth.tokens = 8;
  }
  return c;
}

RunConfig assemble(const CommonOptions& o, RunConfig base) {
  if (!o.preset.empty()) base = preset(o.preset);
  if (!o.config.empty()) base = parse_config_file(o.config, std::move(base));
  std::vector<std::string> flags;
  if (!o.data.empty()) flags.push_back("data=" + o.data);
  if (!o.out.empty()) flags.push_back("out=" + o.out);
  if (o.seed) flags.push_back("seed=" + std::to_string(*o.seed));
  if (!o.ablation.empty()) flags.push_back("ablation=" + o.ablation);
  if (!o.return_mode.empty()) flags.push_back("return_mode=" + o.return_mode);
  flags.insert(flags.end(), o.settings.begin(), o.settings.end());
  apply_overrides(base, flags);
  if (auto problems = validate(base); !problems.empty()) throw ConfigError(std::move(problems));
  return base;
}

// Config text stored in artifacts. The output directory is left out so that
// identical runs written to different places produce identical files.
std::string artifact_echo(RunConfig c) {
  c.out = RunConfig{}.out;
  return echo(c);
}

json config_json(const RunConfig& c) {
  json out = json::object();
  std::istringstream lines(artifact_echo(c));
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find('=');
    out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

void prepare_out(const RunConfig& c) {
  std::error_code ec;
  std::filesystem::create_directories(c.out, ec);
  if (ec || !std::filesystem::is_directory(c.out)) {
    throw ValidationError("cannot create output directory " + c.out.string());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) throw ValidationError("cannot write " + path.string());
}

std::vector<Thread> load_data(const RunConfig& c) {
  if (!c.data) throw ValidationError("no data file given (use --data or data=...)");
  return load_threads(*c.data);
}

const std::vector<Thread>& pick_split(const DataSplit& split, const std::string& name) {
  if (name == "train") return split.train;
  if (name == "val") return split.val;
  if (name == "test") return split.test;
  throw ValidationError("unknown split '" + name + "' (expected train, val or test)");
}

json metrics_json(const Metrics& m) {
  json out;
  out["accuracy"] = m.accuracy;
  for (int k = 0; k < kClassCount; ++k) {
    std::string key = "f1_" + std::string(to_string(static_cast<Veracity>(k)));
    for (auto& ch : key) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    out[key] = m.f1[static_cast<std::size_t>(k)];
  }
  out["macro_f1"] = m.macro_f1;
  return out;
}

json confusion_json(const Confusion& confusion) {
  json rows = json::array();
  for (int t = 0; t < confusion.classes(); ++t) {
    json row = json::array();
    for (int p = 0; p < confusion.classes(); ++p) row.push_back(confusion.at(t, p));
    rows.push_back(row);
  }
  return rows;
}

json epoch_json(const EpochRecord& r) {
  json out;
  out["epoch"] = r.epoch;
  out["split"] = r.split;
  out["loss"] = r.loss;
  out.update(metrics_json(r.metrics));
  return out;
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError("sweep: cannot parse value '" + item + "'");
    }
  }
  if (values.empty()) throw ValidationError("sweep: no values given");
  return values;
}

Model load_model(const std::string& path, RunConfig& config, const CommonOptions& o) {
  if (path.empty()) throw ValidationError("no checkpoint given (use --checkpoint)");
  auto checkpoint = read_checkpoint(path);
  std::istringstream saved(checkpoint.config_echo);
  config = assemble(o, parse_config(saved));
  Model model = Model::init(config.train.dims, text::Vocab::from_tokens(checkpoint.vocab), config.train.seed);
  restore(model, checkpoint);
  return model;
}

int cmd_synth(const CommonOptions& o) {
  auto config = assemble(o, {});
  prepare_out(config);
  const auto threads = generate(config.synth);
  const auto path = config.out / "threads.jsonl";
  write_threads(path, threads);

  long comments = 0;
  long corrupted = 0;
  std::array<long, kClassCount> labels{};
  for (const auto& t : threads) {
    ++labels[static_cast<std::size_t>(t.label)];
    for (const auto& c : t.comments) {
      ++comments;
      corrupted += c.corrupted.value_or(false) ? 1 : 0;
    }
  }
  json manifest;
  manifest["config"] = config_json(config);
  manifest["seed"] = config.synth.seed;
  manifest["threads"] = threads.size();
  manifest["comments"] = comments;
  manifest["corrupted_count"] = corrupted;
  json per_label;
  for (int k = 0; k < kClassCount; ++k) per_label[std::string(to_string(static_cast<Veracity>(k)))] = labels[k];
  manifest["labels"] = per_label;
  manifest["thread_file"] = path.filename().string();
  write_text(config.out / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "wrote " << threads.size() << " threads (" << corrupted << " of " << comments
            << " stance labels corrupted) to " << path.string() << "\n";
  return kExitOk;
}

int cmd_train(const CommonOptions& o) {
  auto config = assemble(o, {});
  const auto threads = load_data(config);
  const auto split = split_threads(threads, config.train.seed);
  prepare_out(config);

  std::ofstream history(config.out / "history.jsonl", std::ios::binary | std::ios::trunc);
  if (!history) throw ValidationError("cannot write history file in " + config.out.string());
  history << json{{"config", config_json(config)}}.dump() << "\n";
  auto on_epoch = [&history](const EpochRecord& train_record, const EpochRecord& val_record) {
    history << epoch_json(train_record).dump() << "\n" << epoch_json(val_record).dump() << "\n";
    history.flush();
    std::cout << "epoch " << train_record.epoch << "  train loss " << train_record.loss << " acc "
              << train_record.metrics.accuracy << "  val loss " << val_record.loss << " acc "
              << val_record.metrics.accuracy << "\n";
  };
  auto initial = initial_model(config.train, split.train, config.embeddings);
  auto result = train(config.train, std::move(initial), split.train, split.val, on_epoch);
  write_checkpoint(config.out / "checkpoint.bin", snapshot(result.model, artifact_echo(config)));
  std::cout << "best epoch " << result.best_epoch << " val accuracy " << result.best_val_accuracy << "\n";
  return kExitOk;
}

int cmd_eval(const CommonOptions& o, const CommandOptions& c) {
  RunConfig config;
  Model model = load_model(c.checkpoint, config, o);
  const auto threads = load_data(config);
  const auto split = split_threads(threads, config.train.seed);
  const auto& chosen = pick_split(split, c.split);
  if (chosen.empty()) throw ValidationError("the " + c.split + " split is empty");
  const auto metrics = evaluate(model, config.train, chosen);
  const double loss = evaluation_loss(model, config.train, chosen);

  json record;
  record["config"] = config_json(config);
  record["split"] = c.split;
  record["threads"] = chosen.size();
  record["loss"] = loss;
  record.update(metrics_json(metrics));
  record["confusion"] = confusion_json(metrics.confusion);
  prepare_out(config);
  write_text(config.out / ("metrics_" + c.split + ".json"), record.dump(2) + "\n");

  std::printf("split %s (%zu threads)\nloss %.6f\naccuracy %.4f\n", c.split.c_str(), chosen.size(), loss,
              metrics.accuracy);
  for (int k = 0; k < kClassCount; ++k) {
    std::printf("f1 %s %.4f\n", std::string(to_string(static_cast<Veracity>(k))).c_str(),
                metrics.f1[static_cast<std::size_t>(k)]);
  }
  std::printf("macro_f1 %.4f\nconfusion (rows = truth NR FR TR UR)\n", metrics.macro_f1);
  for (int t = 0; t < kClassCount; ++t) {
    for (int p = 0; p < kClassCount; ++p) std::printf("%6ld", metrics.confusion.at(t, p));
    std::printf("\n");
  }
  return kExitOk;
}

int cmd_gradcheck(const CommonOptions& o, const CommandOptions& c) {
  auto config = assemble(o, preset("tiny"));
  const auto& dims = config.train.dims;
  if (dims.hidden_dim > 12 || dims.word_dim > 12 || dims.max_comments > 3 || dims.max_len > 8) {
    throw ValidationError("gradcheck needs a tiny config (d, d_w <= 12, max_comments <= 3, max_len <= 8)");
  }
  std::optional<Op> fault;
  if (!c.fault.empty()) {
    fault = op_from_name(c.fault);
    if (!fault) throw ValidationError("unknown op '" + c.fault + "' for --inject-fault");
  }
  std::vector<Thread> threads = config.data ? load_data(config) : generate(config.synth);
  if (threads.size() > 4) threads.resize(4);
  auto model = initial_model(config.train, threads, config.embeddings);
  const auto check = model_gradcheck(model, config.train, threads, fault);

  auto print = [](const char* set, const GradCheckReport& report) {
    for (const auto& g : report.groups) {
      std::printf("%s %-14s entries %5ld  kinks %2ld  max_rel_error %.3e  %s\n", set, g.name.c_str(),
                  static_cast<long>(g.entries), static_cast<long>(g.kinks), g.max_rel_error,
                  g.max_rel_error < report.tolerance ? "ok" : "FAIL");
    }
  };
  print("theta1", check.theta1);
  print("theta2", check.theta2);
  std::printf("overall max_rel_error %.3e (tolerance %.0e): %s\n",
              std::max(check.theta1.max_rel_error(), check.theta2.max_rel_error()), check.theta1.tolerance,
              check.passed() ? "PASS" : "FAIL");
  return check.passed() ? kExitOk : kExitNumeric;
}

int cmd_sweep(const CommonOptions& o, const CommandOptions& c) {
  auto config = assemble(o, {});
  SweepParameter parameter;
  if (c.parameter == "gamma") {
    parameter = SweepParameter::gamma;
  } else if (c.parameter == "lambda") {
    parameter = SweepParameter::lambda;
  } else {
    throw ValidationError("sweep: --param must be gamma or lambda");
  }
  const auto values = parse_values(c.values);
  const auto threads = load_data(config);
  const auto split = split_threads(threads, config.train.seed);
  const auto rows = sweep(config.train, parameter, values, split, c.parallel);

  std::ostringstream table;
  std::istringstream lines(artifact_echo(config));
  std::string line;
  while (std::getline(lines, line)) table << "# " << line << "\n";
  table << "parameter\tvalue\tbest_val_accuracy\taccuracy\tf1_nr\tf1_fr\tf1_tr\tf1_ur\tmacro_f1\n";
  char buf[64];
  auto num = [&buf](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    table << c.parameter << "\t" << num(r.value) << "\t" << num(r.best_val_accuracy) << "\t" << num(r.test.accuracy);
    for (double f : r.test.f1) table << "\t" << num(f);
    table << "\t" << num(r.test.macro_f1) << "\n";
  }
  prepare_out(config);
  const auto path = config.out / ("sweep_" + c.parameter + ".tsv");
  write_text(path, table.str());
  for (const auto& r : rows) {
    std::printf("%s=%g  val %.4f  test accuracy %.4f  macro_f1 %.4f\n", c.parameter.c_str(), r.value,
                r.best_val_accuracy, r.test.accuracy, r.test.macro_f1);
  }
  std::cout << "wrote " << path.string() << "\n";
  return kExitOk;
}

int cmd_audit(const CommonOptions& o, const CommandOptions& c) {
  RunConfig config;
  Model model = load_model(c.checkpoint, config, o);
  const auto threads = load_data(config);
  const auto split = split_threads(threads, config.train.seed);
  const auto& chosen = pick_split(split, c.split);
  const auto report = agent_audit(model, config.train, chosen, c.sampled, config.train.seed);

  auto optional_number = [](std::optional<double> v) { return v ? json(*v) : json(nullptr); };
  json record;
  record["config"] = config_json(config);
  record["split"] = c.split;
  record["mode"] = c.sampled ? "sampled" : "greedy";
  record["clean_total"] = report.clean_total;
  record["clean_retained"] = report.clean_retained;
  record["corrupted_total"] = report.corrupted_total;
  record["corrupted_retained"] = report.corrupted_retained;
  record["clean_retain_rate"] = optional_number(report.clean_rate());
  record["corrupted_retain_rate"] = optional_number(report.corrupted_rate());
  record["gap"] = optional_number(report.gap());
  prepare_out(config);
  write_text(config.out / "audit.json", record.dump(2) + "\n");

  auto show = [](std::optional<double> v) { return v ? std::to_string(*v) : std::string("absent"); };
  std::cout << "retain rate clean " << show(report.clean_rate()) << " (" << report.clean_total << " comments)\n"
            << "retain rate corrupted " << show(report.corrupted_rate()) << " (" << report.corrupted_total
            << " comments)\n"
            << "gap " << show(report.gap()) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stance-aware reinforcement learning rumor detection"};
  app.require_subcommand(1);
  CommonOptions common;
  CommandOptions options;

  auto* synth = app.add_subcommand("synth", "generate a synthetic thread corpus");
  auto* train_cmd = app.add_subcommand("train", "train a model and write checkpoint + history");
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on one split");
  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of both objectives");
  auto* sweep_cmd = app.add_subcommand("sweep", "train once per gamma or lambda value");
  auto* audit = app.add_subcommand("audit", "retain rates for clean vs corrupted stance labels");
  for (auto* cmd : {synth, train_cmd, eval, grad, sweep_cmd, audit}) add_common(cmd, common);
  for (auto* cmd : {eval, audit}) {
    cmd->add_option("--checkpoint", options.checkpoint, "checkpoint written by train")->required();
    cmd->add_option("--split", options.split, "train | val | test");
  }
  grad->add_option("--inject-fault", options.fault, "scale the backward rule of one op (test hook)");
  sweep_cmd->add_option("--param", options.parameter, "gamma | lambda")->required();
  sweep_cmd->add_option("--values", options.values, "comma-separated values")->required();
  sweep_cmd->add_flag("--parallel", options.parallel, "run values concurrently");
  audit->add_flag("--sampled", options.sampled, "sample actions instead of greedy");
  app.footer([] {
    std::string keys = "Config keys:\n";
    for (const auto& k : config_keys()) keys += "  " + std::string(k.key) + "  " + std::string(k.description) + "\n";
    return keys;
  }());

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*synth) return cmd_synth(common);
    if (*train_cmd) return cmd_train(common);
    if (*eval) return cmd_eval(common, options);
    if (*grad) return cmd_gradcheck(common, options);
    if (*sweep_cmd) return cmd_sweep(common, options);
    if (*audit) return cmd_audit(common, options);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}
