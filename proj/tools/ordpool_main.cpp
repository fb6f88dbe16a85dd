// ordpool: train, compare, sweep, analyze, gradcheck, export
//
// Every invocation writes its fully resolved configuration (config.json) next
// to its results, so any output directory can be replayed exactly.
//
// Exit codes: 0 success, 1 verification/training failure, 2 usage error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ordpool/analysis.hpp"
#include "ordpool/experiment.hpp"
#include "ordpool/gradcheck.hpp"
#include "ordpool/mnist.hpp"
#include "ordpool/network.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ordpool;

namespace {

struct TrainFlags {
  std::string network = "baseline";
  std::string pooling = "ordinal";  // arm selector: avg|max|min|ordinal
  std::string init = "average";
  std::string activation = "relu";
  std::uint64_t seed = 1;
  int seeds = 5;  // compare/sweep only
  int epochs = 5;
  double lr = 0.01;
  double momentum = 0.9;
  int batch = 64;
  std::int64_t train_size = 10000;
  std::int64_t test_size = 2000;
  std::string data_dir;
  std::string out = "out";
};

void add_hyper_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--network", f.network, "Network architecture")
      ->check(CLI::IsMember({"baseline", "baseline2", "lenet5"}))
      ->capture_default_str();
  cmd->add_option("--init", f.init, "Ordinal kernel initialization")
      ->check(CLI::IsMember({"average", "max", "min", "uniform"}))
      ->capture_default_str();
  cmd->add_option("--activation", f.activation, "Pre-pool activation")
      ->check(CLI::IsMember({"none", "relu", "tanh"}))
      ->capture_default_str();
  cmd->add_option("--epochs", f.epochs, "Training epochs (0 = evaluate only)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--lr", f.lr, "SGD learning rate")->capture_default_str();
  cmd->add_option("--momentum", f.momentum, "SGD momentum")->capture_default_str();
  cmd->add_option("--batch", f.batch, "Batch size")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--train-size", f.train_size, "Training subset size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--test-size", f.test_size, "Test subset size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--data-dir", f.data_dir, "MNIST IDX directory (default: $ORD_DATA_DIR)");
  cmd->add_option("--out", f.out, "Output directory")->capture_default_str();
}

std::string resolve_data_dir(const TrainFlags& f) {
  if (!f.data_dir.empty()) return f.data_dir;
  if (const char* env = std::getenv("ORD_DATA_DIR"); env && *env) return env;
  throw ConfigError("no data directory: pass --data-dir or set ORD_DATA_DIR");
}

ExperimentConfig to_config(const TrainFlags& f) {
  ExperimentConfig cfg;
  cfg.network = f.network;
  cfg.classic_pooling = f.pooling == "ordinal" ? PoolingChoice::classic_avg
                                               : pooling_choice_from_string(f.pooling);
  cfg.ordinal_init = init_scheme_from_string(f.init);
  cfg.activation = activation_from_string(f.activation);
  cfg.epochs = f.epochs;
  cfg.batch_size = f.batch;
  cfg.lr = f.lr;
  cfg.momentum = f.momentum;
  cfg.train_size = f.train_size;
  cfg.test_size = f.test_size;
  return cfg;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << content;
}

json flags_json(const std::string& command, const TrainFlags& f, bool with_seed, bool with_seeds) {
  json j;
  j["command"] = command;
  j["network"] = f.network;
  j["pooling"] = f.pooling;
  j["init"] = f.init;
  j["activation"] = f.activation;
  if (with_seed) j["seed"] = f.seed;
  if (with_seeds) j["seeds"] = f.seeds;
  j["epochs"] = f.epochs;
  j["lr"] = f.lr;
  j["momentum"] = f.momentum;
  j["batch"] = f.batch;
  j["train_size"] = f.train_size;
  j["test_size"] = f.test_size;
  j["data_dir"] = f.data_dir;
  j["out"] = f.out;
  return j;
}

void prepare_out(const TrainFlags& f, const json& config) {
  fs::create_directories(f.out);
  write_file(fs::path(f.out) / "config.json", config.dump(2) + "\n");
}

int cmd_train(TrainFlags& f) {
  f.data_dir = resolve_data_dir(f);
  prepare_out(f, flags_json("train", f, true, false));

  const ExperimentConfig cfg = to_config(f);
  const Dataset train = load_mnist_dir(f.data_dir, "train").subset(cfg.train_size);
  const Dataset test = load_mnist_dir(f.data_dir, "test").subset(cfg.test_size);

  NetworkPair<float> pair = build_paired<float>(cfg.classic_spec(), cfg.ordinal_spec(), f.seed);
  Network<float>& net = f.pooling == "ordinal" ? pair.ordinal : pair.classic;
  const auto orders = batch_orders(f.seed, train.count(), cfg.epochs);
  const ArmMetrics arm = train_arm(net, f.pooling == "ordinal" ? "ordinal" : "classic", train, test, cfg,
                                   orders);

  std::string csv = "run_id,arm,epoch,train_loss,test_loss,test_error\n";
  csv += metrics_csv_single("seed" + std::to_string(f.seed), arm);
  write_file(fs::path(f.out) / "metrics.csv", csv);

  json kernels = json::array();
  for (const auto& k : arm.kernel_json) kernels.push_back(json::parse(k));
  write_file(fs::path(f.out) / "kernels.json", kernels.dump(2) + "\n");

  std::cout << "trained " << f.network << " (" << f.pooling << ") seed " << f.seed << ": final train loss "
            << format_double(arm.final_train_loss) << ", test error " << format_double(arm.final_test_error)
            << "%\n";
  return 0;
}

int cmd_compare(TrainFlags& f) {
  f.data_dir = resolve_data_dir(f);
  prepare_out(f, flags_json("compare", f, false, true));

  const ExperimentConfig cfg = to_config(f);
  const Dataset train = load_mnist_dir(f.data_dir, "train").subset(cfg.train_size);
  const Dataset test = load_mnist_dir(f.data_dir, "test").subset(cfg.test_size);

  std::vector<PairedRunResult> runs;
  for (int s = 1; s <= f.seeds; ++s) {
    runs.push_back(paired_run(cfg, train, test, static_cast<std::uint64_t>(s)));
    const auto& r = runs.back();
    std::cout << "seed " << s << ": classic train " << format_double(r.classic_arm.final_train_loss)
              << " / err " << format_double(r.classic_arm.final_test_error) << "%  |  ordinal train "
              << format_double(r.ordinal_arm.final_train_loss) << " / err "
              << format_double(r.ordinal_arm.final_test_error) << "%\n";
  }

  write_file(fs::path(f.out) / "metrics.csv", metrics_csv(runs));
  write_file(fs::path(f.out) / "kernels.json", kernels_json(runs) + "\n");
  write_file(fs::path(f.out) / "summary.json", summary_json(cfg, runs) + "\n");

  int wins = 0;
  for (const auto& r : runs)
    if (r.ordinal_arm.final_train_loss < r.classic_arm.final_train_loss) ++wins;
  std::cout << "ordinal wins final training loss in " << wins << "/" << f.seeds << " seeds\n";
  return 0;
}

int cmd_sweep(TrainFlags& f, const std::string& config_path, std::vector<std::string>& init_list,
              std::vector<std::string>& act_list, std::vector<std::string>& arm_list) {
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw IoError(config_path + ": cannot open sweep config");
    std::stringstream ss;
    ss << in.rdbuf();
    json j = json::parse(ss.str(), nullptr, false);
    if (j.is_discarded()) throw IoError(config_path + ": sweep config is not valid JSON");
    if (j.contains("network")) f.network = j["network"].get<std::string>();
    if (j.contains("epochs")) f.epochs = j["epochs"].get<int>();
    if (j.contains("lr")) f.lr = j["lr"].get<double>();
    if (j.contains("momentum")) f.momentum = j["momentum"].get<double>();
    if (j.contains("batch")) f.batch = j["batch"].get<int>();
    if (j.contains("train_size")) f.train_size = j["train_size"].get<std::int64_t>();
    if (j.contains("test_size")) f.test_size = j["test_size"].get<std::int64_t>();
    if (j.contains("seeds")) f.seeds = j["seeds"].get<int>();
    if (j.contains("inits")) init_list = j["inits"].get<std::vector<std::string>>();
    if (j.contains("activations")) act_list = j["activations"].get<std::vector<std::string>>();
    if (j.contains("arms")) arm_list = j["arms"].get<std::vector<std::string>>();
  }

  f.data_dir = resolve_data_dir(f);
  json config = flags_json("sweep", f, false, true);
  config["inits"] = init_list;
  config["activations"] = act_list;
  config["arms"] = arm_list;
  prepare_out(f, config);

  const ExperimentConfig base = to_config(f);
  const Dataset train = load_mnist_dir(f.data_dir, "train").subset(base.train_size);
  const Dataset test = load_mnist_dir(f.data_dir, "test").subset(base.test_size);

  std::vector<InitScheme> inits;
  for (const auto& s : init_list) inits.push_back(init_scheme_from_string(s));
  std::vector<Activation> acts;
  for (const auto& s : act_list) acts.push_back(activation_from_string(s));
  std::vector<std::uint64_t> seeds;
  for (int s = 1; s <= f.seeds; ++s) seeds.push_back(static_cast<std::uint64_t>(s));

  const auto cells = sweep(base, inits, acts, arm_list, seeds, train, test);
  write_file(fs::path(f.out) / "sweep.csv", sweep_csv(cells));
  for (const auto& c : cells) {
    std::cout << to_string(c.init) << " / " << to_string(c.activation) << " / " << c.arm << ": ";
    if (c.skipped)
      std::cout << "skipped\n";
    else
      std::cout << format_double(c.mean_test_error) << "% mean test error\n";
  }
  return 0;
}

int cmd_analyze(const std::vector<std::string>& kernel_paths, const std::string& out_dir) {
  fs::create_directories(out_dir);
  json config;
  config["command"] = "analyze";
  config["kernels"] = kernel_paths;
  config["out"] = out_dir;
  write_file(fs::path(out_dir) / "config.json", config.dump(2) + "\n");

  // each input is either one kernel-set document or a compare-style dump
  // [{run_id, layers: [...]}, ...]; kernels land in per-layer groups
  std::vector<std::vector<OrdinalKernelSet>> layers;  // [layer][set]
  std::vector<std::vector<std::string>> run_ids;
  const auto add_set = [&](std::size_t layer, OrdinalKernelSet k, const std::string& run) {
    if (layers.size() <= layer) {
      layers.resize(layer + 1);
      run_ids.resize(layer + 1);
    }
    layers[layer].push_back(std::move(k));
    run_ids[layer].push_back(run);
  };

  for (const auto& path : kernel_paths) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path + ": cannot open kernel file");
    std::stringstream ss;
    ss << in.rdbuf();
    json doc = json::parse(ss.str(), nullptr, false);
    if (doc.is_discarded()) throw IoError(path + ": not valid JSON");
    if (doc.is_array()) {
      for (const auto& run : doc) {
        const std::string run_id = run.contains("run_id") ? run["run_id"].get<std::string>() : path;
        const auto& jl = run.at("layers");
        for (std::size_t l = 0; l < jl.size(); ++l)
          add_set(l, kernel_set_from_json(jl[l].dump()), run_id);
      }
    } else {
      add_set(0, kernel_set_from_json(doc.dump()), path);
    }
  }
  if (layers.empty()) throw ConfigError("analyze: no kernel sets found in the given files");

  for (std::size_t l = 0; l < layers.size(); ++l) {
    std::vector<const OrdinalKernelSet*> ptrs;
    for (const auto& k : layers[l]) ptrs.push_back(&k);
    const bool enumerable = layers[l].front().ranks() <= 16;
    const KernelDistribution dist =
        distribution(ptrs, enumerable ? GroupBy::support_size : GroupBy::argmax, run_ids[l]);
    const std::string csv = distribution_csv(dist);
    write_file(fs::path(out_dir) / ("distributions_layer" + std::to_string(l) + ".csv"), csv);
    if (layers.size() == 1) write_file(fs::path(out_dir) / "distributions.csv", csv);
    std::cout << "layer " << l << ": " << dist.total << " kernels classified into " << dist.rows.size()
              << " groups\n";
  }
  return 0;
}

int cmd_gradcheck(int trials, std::uint64_t seed, bool break_gradient, const std::string& out_dir) {
  GradCheckOptions opts;
  opts.trials = trials;
  opts.seed = seed;
  opts.inject_fault = break_gradient;
  std::cout << "config: trials=" << trials << " seed=" << seed << " step=1e-5 break_gradient="
            << (break_gradient ? "true" : "false") << "\n";
  const auto reports = run_gradcheck(opts);

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    json config;
    config["command"] = "gradcheck";
    config["trials"] = trials;
    config["seed"] = seed;
    config["break_gradient"] = break_gradient;
    config["out"] = out_dir;
    write_file(fs::path(out_dir) / "config.json", config.dump(2) + "\n");
  }

  bool ok = true;
  for (const auto& r : reports) {
    const bool pass = r.max_rel_err <= 1e-5;
    ok = ok && pass;
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << r.kind << ": max rel err "
              << format_double(r.max_rel_err) << " over " << r.trials << " trials\n";
  }
  std::cout << "max relative error: " << format_double(max_rel_err(reports)) << (ok ? " (<= 1e-5)" : " (> 1e-5)")
            << "\n";
  return ok ? 0 : 1;
}

int cmd_export(TrainFlags& f) {
  prepare_out(f, flags_json("export", f, true, false));
  const ExperimentConfig cfg = to_config(f);
  NetworkPair<float> pair = build_paired<float>(cfg.classic_spec(), cfg.ordinal_spec(), f.seed);
  Network<float>& net = f.pooling == "ordinal" ? pair.ordinal : pair.classic;

  write_file(fs::path(f.out) / "network.json", network_to_json(net) + "\n");
  json kernels = json::array();
  for (auto* k : net.ordinal_kernels()) kernels.push_back(json::parse(kernel_set_to_json(*k)));
  write_file(fs::path(f.out) / "kernels.json", kernels.dump(2) + "\n");
  std::cout << "exported " << f.network << " (" << f.pooling << ") with " << net.param_count()
            << " parameters\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ordinal pooling experiment harness"};
  app.require_subcommand(1);

  TrainFlags train_flags, compare_flags, sweep_flags, export_flags;

  auto* train = app.add_subcommand("train", "Train one arm and record its metrics");
  add_hyper_flags(train, train_flags);
  train->add_option("--pooling", train_flags.pooling, "Pooling arm")
      ->check(CLI::IsMember({"avg", "max", "min", "ordinal"}))
      ->capture_default_str();
  train->add_option("--seed", train_flags.seed, "Run seed")->capture_default_str();

  auto* compare = app.add_subcommand("compare", "Paired classic-vs-ordinal runs over several seeds");
  add_hyper_flags(compare, compare_flags);
  compare->add_option("--pooling", compare_flags.pooling, "Classic arm pooling")
      ->check(CLI::IsMember({"avg", "max", "min"}))
      ->capture_default_str();
  compare->add_option("--seeds", compare_flags.seeds, "Number of paired seeds (1..N)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  compare_flags.pooling = "avg";

  auto* sweep_cmd = app.add_subcommand("sweep", "Initialization x activation x arm grid");
  add_hyper_flags(sweep_cmd, sweep_flags);
  sweep_flags.pooling = "avg";
  std::vector<std::string> sweep_inits{"average", "max", "min"};
  std::vector<std::string> sweep_acts{"none", "relu", "tanh"};
  std::vector<std::string> sweep_arms{"classic", "ordinal"};
  std::string sweep_config_path;
  sweep_cmd->add_option("--seeds", sweep_flags.seeds, "Seeds per cell")->check(CLI::PositiveNumber)->capture_default_str();
  sweep_cmd->add_option("--inits", sweep_inits, "Initializations to sweep")->delimiter(',');
  sweep_cmd->add_option("--activations", sweep_acts, "Activations to sweep")->delimiter(',');
  sweep_cmd->add_option("--arms", sweep_arms, "Arms to run")->delimiter(',');
  sweep_cmd->add_option("--config", sweep_config_path, "JSON file overriding sweep settings");

  auto* analyze = app.add_subcommand("analyze", "Classify learned kernels against the template taxonomy");
  std::vector<std::string> kernel_paths;
  std::string analyze_out = "out";
  analyze->add_option("--kernels", kernel_paths, "Kernel JSON files")->required()->expected(-1);
  analyze->add_option("--out", analyze_out, "Output directory")->capture_default_str();

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference verification of every layer kind");
  int gc_trials = 50;
  std::uint64_t gc_seed = 1234;
  bool gc_break = false;
  std::string gc_out;
  gradcheck->add_option("--trials", gc_trials, "Trials per layer kind")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gradcheck->add_option("--seed", gc_seed, "Probe seed")->capture_default_str();
  gradcheck->add_flag("--break-gradient", gc_break, "Testing aid: corrupt one gradient (must exit 1)");
  gradcheck->add_option("--out", gc_out, "Optional output directory for the config snapshot");

  auto* export_cmd = app.add_subcommand("export", "Write a freshly initialized network as JSON");
  add_hyper_flags(export_cmd, export_flags);
  export_cmd->add_option("--pooling", export_flags.pooling, "Pooling arm")
      ->check(CLI::IsMember({"avg", "max", "min", "ordinal"}))
      ->capture_default_str();
  export_cmd->add_option("--seed", export_flags.seed, "Init seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(train)) return cmd_train(train_flags);
    if (app.got_subcommand(compare)) return cmd_compare(compare_flags);
    if (app.got_subcommand(sweep_cmd))
      return cmd_sweep(sweep_flags, sweep_config_path, sweep_inits, sweep_acts, sweep_arms);
    if (app.got_subcommand(analyze)) return cmd_analyze(kernel_paths, analyze_out);
    if (app.got_subcommand(gradcheck)) return cmd_gradcheck(gc_trials, gc_seed, gc_break, gc_out);
    if (app.got_subcommand(export_cmd)) return cmd_export(export_flags);
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
