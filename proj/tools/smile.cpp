// smile: data generation, training, evaluation, sweeps and gradient checks.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "cli_config.hpp"
#include "smile/checkpoint.hpp"
#include "smile/error.hpp"
#include "smile/glyph_data.hpp"
#include "smile/gradcheck.hpp"
#include "smile/metrics.hpp"
#include "smile/trainer.hpp"

namespace fs = std::filesystem;
using namespace smile;

namespace {

struct Invocation {
  std::string command;
  std::map<std::string, std::string> flags;
  std::string config_path;
  std::vector<std::string> entries;  // compare: name=checkpoint
};

void add_flags(CLI::App* sub, Invocation& inv) {
  for (const auto& key : cli::known_keys()) sub->add_option("--" + key, inv.flags[key]);
  sub->add_option("--config", inv.config_path, "key=value file; flags override it");
}

cli::Settings resolve(CLI::App* sub, const Invocation& inv) {
  cli::Settings from_file;
  if (!inv.config_path.empty()) from_file = cli::load_config_file(inv.config_path);
  cli::Settings from_flags;
  for (const auto& key : cli::known_keys()) {
    if (sub->count("--" + key) > 0) from_flags[key] = inv.flags.at(key);
  }
  return cli::merge(from_file, from_flags);
}

void print_resolved(const std::string& command, const cli::Settings& s, const TrainConfig& cfg) {
  std::cout << "# resolved configuration\ncommand=" << command << "\npreset=" << cli::preset_name(s) << '\n'
            << cfg.describe() << "threads=" << threads_from_env() << '\n'
            << std::flush;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ContractError("cannot write " + path);
  f << text;
  if (!f) throw ContractError("write failed for " + path);
}

int gen_data(const cli::Settings& s, const TrainConfig& cfg) {
  if (cfg.out_path.empty()) throw ContractError("gen-data: --out <directory> is required");
  const Preset p = preset(cli::preset_name(s));
  const PresetCorpora c = generate_preset(p, cfg.seed);
  fs::create_directories(cfg.out_path);
  const fs::path dir(cfg.out_path);
  save_corpus(c.source, dir / "source.smc");
  save_corpus(c.source_val, dir / "source_val.smc");
  save_corpus(c.target, dir / "target.smc");
  save_corpus(c.target_labeled, dir / "target_labeled.smc");
  save_corpus(c.target_test, dir / "test.smc");
  std::cout << "wrote " << p.name << " corpora to " << dir.string() << ": source " << c.source.size()
            << ", source_val " << c.source_val.size() << ", target " << c.target.size() << ", test "
            << c.target_test.size() << '\n';
  return 0;
}

void print_eval(const std::string& name, const EvalResult& r) {
  std::printf("%s: word_acc=%.4f char_acc=%.4f mean_entropy=%.6f n=%zu\n", name.c_str(), r.word_accuracy,
              r.char_accuracy, r.mean_entropy, r.count);
}

int train_cmd(const TrainConfig& cfg) {
  const TrainResult r = train(cfg);
  for (const auto& row : r.log.rows) {
    if (row.eval) print_eval("step " + std::to_string(row.step), *row.eval);
  }
  if (!cfg.out_path.empty()) std::cout << "checkpoint written to " << cfg.out_path << '\n';
  return 0;
}

int eval_cmd(const TrainConfig& cfg) {
  if (cfg.checkpoint_path.empty()) throw ContractError("eval: --checkpoint is required");
  if (cfg.test_path.empty()) throw ContractError("eval: --test is required");
  const EvalResult r = evaluate(load_checkpoint(cfg.checkpoint_path), load_corpus(cfg.test_path), threads_from_env());
  print_eval(cfg.checkpoint_path, r);
  if (!cfg.out_path.empty()) {
    const NamedResult named{cfg.checkpoint_path, r};
    write_text(cfg.out_path, compare_report({&named, 1}).csv);
  }
  return 0;
}

int compare_cmd(const TrainConfig& cfg, const std::vector<std::string>& entries) {
  if (cfg.test_path.empty()) throw ContractError("compare: --test is required");
  if (entries.empty()) throw ContractError("compare: expected one or more name=checkpoint arguments");
  const Corpus test = load_corpus(cfg.test_path);
  std::vector<NamedResult> results;
  for (const auto& e : entries) {
    const auto eq = e.find('=');
    const std::string name = eq == std::string::npos ? e : e.substr(0, eq);
    const std::string path = eq == std::string::npos ? e : e.substr(eq + 1);
    results.push_back({name, evaluate(load_checkpoint(path), test, threads_from_env())});
  }
  const Report rep = compare_report(results);
  std::cout << rep.text;
  if (!cfg.out_path.empty()) write_text(cfg.out_path, rep.csv);
  return 0;
}

int sweep_cmd(TrainConfig cfg) {
  if (cfg.checkpoint_path.empty()) throw ContractError("sweep: --checkpoint (pre-trained) is required");
  if (cfg.source_path.empty() || cfg.target_path.empty() || cfg.test_path.empty()) {
    throw ContractError("sweep: --source, --target and --test are required");
  }
  const Corpus source = load_corpus(cfg.source_path);
  const UnlabeledImages target(load_corpus(cfg.target_path));
  const Corpus test = load_corpus(cfg.test_path);
  const Checkpoint pre = load_checkpoint(cfg.checkpoint_path);
  TrainData data;
  data.source = &source;
  data.target = &target;
  // Cells are scored once, at their last step.
  const std::string out = cfg.out_path;
  cfg.out_path.clear();
  cfg.eval_every = std::max<std::size_t>(cfg.steps, 1);
  data.test = &test;
  const auto grid = sensitivity_grid();
  const SweepReport rep = sweep(grid, cfg, data, pre);
  std::cout << rep.text();
  if (!out.empty()) write_text(out, rep.csv());
  return 0;
}

int gradcheck_cmd(const TrainConfig& cfg) {
  GradcheckOptions opts;
  opts.seed = cfg.seed;
  const auto cases = run_gradcheck(opts);
  bool ok = true;
  for (const auto& c : cases) {
    std::printf("%-24s %s  max_rel_error=%.3e  coords=%zu\n", c.name.c_str(), c.passed ? "PASS" : "FAIL",
                c.max_rel_error, c.checked);
    ok = ok && c.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"smile: self-paced entropy minimization for text recognizers"};
  app.require_subcommand(1);
  Invocation inv;
  std::map<std::string, CLI::App*> subs;
  const std::pair<const char*, const char*> commands[] = {
      {"gen-data", "write source, target and test corpora for a preset"},
      {"train", "train in base, smile or finetune mode"},
      {"eval", "evaluate a checkpoint on a labeled corpus"},
      {"compare", "evaluate several checkpoints and tabulate"},
      {"sweep", "run every pacing cell of the sensitivity grid"},
      {"gradcheck", "finite-difference check of all backward rules"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_flags(sub, inv);
    subs[name] = sub;
  }
  subs["compare"]->add_option("entries", inv.entries, "name=checkpoint pairs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  for (const auto& [name, sub] : subs) {
    if (sub->parsed()) inv.command = name;
  }
  CLI::App* sub = subs.at(inv.command);
  try {
    const cli::Settings s = resolve(sub, inv);
    const TrainConfig cfg = cli::to_train_config(s);
    print_resolved(inv.command, s, cfg);
    if (inv.command == "gen-data") return gen_data(s, cfg);
    if (inv.command == "train") return train_cmd(cfg);
    if (inv.command == "eval") return eval_cmd(cfg);
    if (inv.command == "compare") return compare_cmd(cfg, inv.entries);
    if (inv.command == "sweep") return sweep_cmd(cfg);
    return gradcheck_cmd(cfg);
  } catch (const NumericalError& e) {
    std::cerr << "smile " << inv.command << ": numerical abort: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "smile " << inv.command << ": error: " << e.what() << '\n';
    return 1;
  }
}
