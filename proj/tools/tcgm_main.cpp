// Command-line entry point: dataset generation, training, oracle
// verification, sweeps over label rates and seeds, and checkpoint
// evaluation. Every command is deterministic given its flags; the --seed
// value fans out to sub-seeds by stable hashing of component names.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tcgm/datagen.hpp"
#include "tcgm/metrics.hpp"
#include "tcgm/net.hpp"
#include "tcgm/rng.hpp"
#include "tcgm/trainer.hpp"
#include "tcgm/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitUsage = 2;

// CLI11 config reader for flat JSON files; command-line flags win.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override {
    return "{}\n";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    input >> j;
    if (!j.is_object()) {
      throw CLI::FileError("config file must hold a flat JSON object");
    }
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : j.items()) {
      CLI::ConfigItem item;
      item.name = {key};
      if (value.is_array()) {
        for (const auto& v : value) {
          item.inputs.push_back(v.is_string() ? v.get<std::string>() : v.dump());
        }
      } else if (value.is_string()) {
        item.inputs.push_back(value.get<std::string>());
      } else {
        item.inputs.push_back(value.dump());
      }
      items.push_back(std::move(item));
    }
    return items;
  }
};

std::string format_double(double v) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

struct SpecFlags {
  std::string preset = "gaussian3";
  int modalities = 3;
  int classes = 3;
  int dim = 2;
  double radius = 2.5;
  double sigma = 1.0;
};

void add_spec_flags(CLI::App* cmd, SpecFlags& flags) {
  cmd->add_option("--preset", flags.preset, "Generator preset (gaussian3)")
      ->check(CLI::IsMember({"gaussian3"}));
  cmd->add_option("--modalities", flags.modalities, "Modality count")->check(CLI::PositiveNumber);
  cmd->add_option("--classes", flags.classes, "Class count")->check(CLI::PositiveNumber);
  cmd->add_option("--dim", flags.dim, "Feature dimensions per modality");
  cmd->add_option("--radius", flags.radius, "Class-mean circle radius");
  cmd->add_option("--sigma", flags.sigma, "Per-dimension standard deviation");
}

tcgm::GaussianModalitySpec build_spec(const SpecFlags& flags) {
  // The lone preset is the circle family; the numeric flags refine it.
  return tcgm::GaussianModalitySpec::circle(flags.modalities, flags.classes, flags.dim,
                                            flags.radius, flags.sigma);
}

struct TrainFlags {
  std::string method = "tcgm";
  int epochs = 50;
  int batch_size = 32;
  double gamma_l = 0.01;
  double gamma_u = 0.0001;
  std::string optimizer = "adam";
  std::string prior = "estimated";
  std::string penalty = "sampled";
  int penalty_samples = 0;
  int hidden = 32;
  std::string activation = "relu";
  bool reestimate_prior = false;
};

void add_train_flags(CLI::App* cmd, TrainFlags& flags) {
  cmd->add_option("--method", flags.method, "tcgm or ce (ce is tcgm with gamma-u 0)")
      ->check(CLI::IsMember({"tcgm", "ce"}));
  cmd->add_option("--epochs", flags.epochs, "Training epochs")->check(CLI::NonNegativeNumber);
  cmd->add_option("--batch-size", flags.batch_size, "Batch size")->check(CLI::PositiveNumber);
  cmd->add_option("--gamma-l", flags.gamma_l, "Learning rate for the labeled phase");
  cmd->add_option("--gamma-u", flags.gamma_u, "Learning rate for the unlabeled phase");
  cmd->add_option("--optimizer", flags.optimizer, "adam or sgd")
      ->check(CLI::IsMember({"adam", "sgd"}));
  cmd->add_option("--prior", flags.prior, "Prior mode: estimated or uniform")
      ->check(CLI::IsMember({"estimated", "uniform"}));
  cmd->add_option("--penalty", flags.penalty, "Penalty plan: sampled or full")
      ->check(CLI::IsMember({"sampled", "full"}));
  cmd->add_option("--penalty-samples", flags.penalty_samples,
                  "Tuples per batch in sampled mode (0 = batch size)");
  cmd->add_option("--hidden", flags.hidden, "Hidden width (0 = linear softmax)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--activation", flags.activation, "relu or tanh")
      ->check(CLI::IsMember({"relu", "tanh"}));
  cmd->add_flag("--reestimate-prior", flags.reestimate_prior,
                "Re-estimate the prior from labels every epoch");
}

tcgm::TrainConfig build_config(const TrainFlags& flags, double label_rate,
                               std::uint64_t seed) {
  tcgm::TrainConfig config;
  config.epochs = flags.epochs;
  config.batch_size = flags.batch_size;
  config.lr_labeled = flags.gamma_l;
  config.lr_unlabeled = flags.method == "ce" ? 0.0 : flags.gamma_u;
  config.optimizer = flags.optimizer == "sgd" ? tcgm::OptimizerState::Kind::kSgd
                                              : tcgm::OptimizerState::Kind::kAdam;
  config.prior_mode = flags.prior == "uniform" ? tcgm::PriorMode::kFixedUniform
                                               : tcgm::PriorMode::kEstimatedFromLabeled;
  config.reestimate_prior_per_epoch = flags.reestimate_prior;
  config.penalty_mode = flags.penalty == "full"
                            ? tcgm::PenaltySamplingPlan::Mode::kFullEnumeration
                            : tcgm::PenaltySamplingPlan::Mode::kSampled;
  config.penalty_samples = flags.penalty_samples;
  config.label_rate = label_rate;
  config.seed = seed;
  return config;
}

std::vector<tcgm::ClassifierNet> build_nets(const tcgm::MultiModalDataset& data, int hidden,
                                            const std::string& activation, std::uint64_t seed) {
  const tcgm::Activation act =
      activation == "tanh" ? tcgm::Activation::kTanh : tcgm::Activation::kReLU;
  std::vector<tcgm::ClassifierNet> nets;
  for (int m = 0; m < data.modality_count; ++m) {
    std::vector<int> dims{data.dims[static_cast<std::size_t>(m)]};
    if (hidden > 0) dims.push_back(hidden);
    dims.push_back(data.class_count);
    nets.push_back(tcgm::ClassifierNet::init(
        dims, act, tcgm::derive_seed(seed, "net", static_cast<std::uint64_t>(m))));
  }
  return nets;
}

tcgm::MultiModalDataset load_data_arg(const std::string& data_arg) {
  fs::path path(data_arg);
  if (fs::is_directory(path)) path /= "dataset.jsonl";
  if (!fs::exists(path)) {
    throw std::invalid_argument("dataset not found: " + path.string());
  }
  tcgm::MultiModalDataset data = tcgm::load_dataset(path.string());
  // The manifest pins the class count even when the stored labels do not
  // cover every class.
  const fs::path manifest = path.parent_path() / "manifest.json";
  if (fs::exists(manifest)) {
    const json j = json::parse(read_file(manifest));
    if (j.contains("class_count")) data.class_count = j["class_count"].get<int>();
  }
  data.validate();
  return data;
}

double effective_label_rate(const tcgm::MultiModalDataset& data) {
  const auto train = data.split_indices(tcgm::Split::kTrain);
  if (train.empty()) return 1.0;
  return static_cast<double>(data.labeled_train_count()) / static_cast<double>(train.size());
}

int run_gen(const SpecFlags& spec_flags, const std::string& table_path, int n, double label_rate,
            std::uint64_t seed, const std::string& out_dir) {
  if (!(label_rate > 0.0) || label_rate > 1.0) {
    throw std::invalid_argument("--label-rate must be in (0, 1]");
  }
  fs::create_directories(out_dir);

  tcgm::MultiModalDataset data;
  std::string generator_json;
  if (!table_path.empty()) {
    const auto table = tcgm::JointTable::from_json(read_file(table_path));
    data = tcgm::generate_discrete(table, n, seed, label_rate);
    json g;
    g["kind"] = "discrete";
    g["table"] = json::parse(table.to_json());
    generator_json = g.dump();
  } else {
    const auto spec = build_spec(spec_flags);
    data = tcgm::generate_gaussian(spec, n, seed, label_rate);
    generator_json = tcgm::gaussian_spec_to_json(spec);
  }

  const fs::path dir(out_dir);
  tcgm::save_dataset(data, (dir / "dataset.jsonl").string());
  tcgm::save_manifest((dir / "manifest.json").string(), data, generator_json, seed, label_rate);

  std::cout << "wrote " << (dir / "dataset.jsonl").string() << "\n"
            << "records=" << data.records.size() << " modalities=" << data.modality_count
            << " classes=" << data.class_count << " label_rate=" << format_double(label_rate)
            << "\n";
  return kExitOk;
}

int run_train(const std::string& data_arg, const TrainFlags& flags, double label_rate_flag,
              std::uint64_t seed, const std::string& out_dir) {
  tcgm::MultiModalDataset data = load_data_arg(data_arg);
  double label_rate = effective_label_rate(data);
  if (label_rate_flag > 0.0) {
    tcgm::apply_label_rate(data, label_rate_flag, seed);
    label_rate = label_rate_flag;
  }

  auto nets = build_nets(data, flags.hidden, flags.activation, seed);
  const tcgm::TrainConfig config = build_config(flags, label_rate, seed);
  const tcgm::RunReport report = tcgm::train(data, nets, config);

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  write_file(dir / "report.json", report.to_json(flags.method));
  write_file(dir / "report.csv", report.to_csv(flags.method));

  json manifest;
  manifest["modality_count"] = data.modality_count;
  manifest["class_count"] = data.class_count;
  manifest["method"] = flags.method;
  manifest["seed"] = seed;
  manifest["prior"] = report.prior.weights();
  json files = json::array();
  for (std::size_t m = 0; m < nets.size(); ++m) {
    const std::string name = "checkpoint_m" + std::to_string(m + 1) + ".json";
    write_file(dir / name, tcgm::checkpoint_to_json(nets[m]));
    files.push_back(name);
  }
  manifest["checkpoints"] = std::move(files);
  write_file(dir / "checkpoints.json", manifest.dump(2) + "\n");

  std::cout << "test aggregator accuracy " << format_double(report.test.aggregator_accuracy);
  if (report.test.auc) std::cout << " auc " << format_double(*report.test.auc);
  std::cout << "\nreport: " << (dir / "report.csv").string() << "\n";
  return kExitOk;
}

int run_verify(std::uint64_t seed, bool perturb, const std::vector<std::string>& checks,
               const std::string& json_out) {
  tcgm::VerifyOptions options;
  options.seed = seed;
  options.perturb = perturb;
  options.only = checks;
  const auto results = tcgm::run_verification(options);
  if (results.empty()) {
    throw std::invalid_argument("no checks match the requested filter");
  }
  for (const auto& r : results) {
    std::cout << (r.pass ? "PASS" : "FAIL") << "  " << r.name << "  max_error="
              << format_double(r.max_error) << " tolerance=" << format_double(r.tolerance)
              << " cases=" << r.cases << "\n";
  }
  const std::string report = tcgm::verify_report_json(results);
  if (!json_out.empty()) {
    write_file(json_out, report + "\n");
  } else {
    std::cout << report << "\n";
  }
  return tcgm::all_passed(results) ? kExitOk : kExitCheckFailure;
}

struct SweepRow {
  std::string method;
  double label_rate = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> modality_accuracy;
  double aggregator_accuracy = 0.0;
  double aligned_accuracy = 0.0;
  std::optional<double> auc;
};

int run_sweep(const SpecFlags& spec_flags, const TrainFlags& flags, int n,
              const std::vector<double>& label_rates, int seed_count, std::uint64_t base_seed,
              const std::vector<std::string>& methods, int jobs, const std::string& out_dir) {
  if (label_rates.empty() || methods.empty() || seed_count < 1 || n < 1) {
    throw std::invalid_argument("sweep needs label rates, methods, seeds and n");
  }
  for (double rate : label_rates) {
    if (!(rate > 0.0) || rate > 1.0) {
      throw std::invalid_argument("--label-rates entries must be in (0, 1]");
    }
  }
  for (const auto& method : methods) {
    if (method != "tcgm" && method != "ce") {
      throw std::invalid_argument("unknown method: " + method);
    }
  }

  const auto spec = build_spec(spec_flags);
  struct Job {
    std::string method;
    double rate;
    std::uint64_t seed;
  };
  std::vector<Job> grid;
  for (const auto& method : methods) {
    for (double rate : label_rates) {
      for (int s = 0; s < seed_count; ++s) {
        grid.push_back({method, rate, base_seed + static_cast<std::uint64_t>(s)});
      }
    }
  }

  std::vector<SweepRow> rows(grid.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&]() {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= grid.size()) return;
      const Job& job = grid[k];
      auto data = tcgm::generate_gaussian(spec, n, job.seed, 1.0);
      tcgm::apply_label_rate(data, job.rate, job.seed);
      TrainFlags job_flags = flags;
      job_flags.method = job.method;
      auto nets = build_nets(data, flags.hidden, flags.activation, job.seed);
      const auto report = tcgm::train(data, nets, build_config(job_flags, job.rate, job.seed));
      SweepRow row;
      row.method = job.method;
      row.label_rate = job.rate;
      row.seed = job.seed;
      row.modality_accuracy = report.test.modality_accuracy;
      row.aggregator_accuracy = report.test.aggregator_accuracy;
      row.aligned_accuracy = report.test.aligned_accuracy;
      row.auc = report.test.auc;
      rows[k] = std::move(row);
    }
  };

  const int worker_count = std::max(1, std::min<int>(jobs, static_cast<int>(grid.size())));
  std::vector<std::thread> pool;
  for (int w = 0; w < worker_count; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  std::ostringstream detail;
  const int modalities = spec.modality_count();
  detail << "method,label_rate,seed";
  for (int m = 1; m <= modalities; ++m) detail << ",acc_m" << m;
  detail << ",acc_agg,acc_aligned,auc\n";
  for (const auto& row : rows) {
    detail << row.method << ',' << format_double(row.label_rate) << ',' << row.seed;
    for (double acc : row.modality_accuracy) detail << ',' << format_double(acc);
    detail << ',' << format_double(row.aggregator_accuracy) << ','
           << format_double(row.aligned_accuracy) << ','
           << (row.auc ? format_double(*row.auc) : "") << '\n';
  }
  write_file(dir / "sweep_detail.csv", detail.str());

  std::ostringstream aggregate;
  aggregate << "method,label_rate,n_seeds,mean_acc_agg,std_acc_agg\n";
  for (const auto& method : methods) {
    for (double rate : label_rates) {
      std::vector<double> values;
      for (const auto& row : rows) {
        if (row.method == method && row.label_rate == rate) {
          values.push_back(row.aggregator_accuracy);
        }
      }
      double mean = 0.0;
      for (double v : values) mean += v;
      mean /= static_cast<double>(values.size());
      double var = 0.0;
      for (double v : values) var += (v - mean) * (v - mean);
      const double stddev =
          values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1)) : 0.0;
      aggregate << method << ',' << format_double(rate) << ',' << values.size() << ','
                << format_double(mean) << ',' << format_double(stddev) << '\n';
    }
  }
  write_file(dir / "sweep_aggregate.csv", aggregate.str());

  std::cout << "wrote " << (dir / "sweep_detail.csv").string() << " (" << rows.size()
            << " rows) and " << (dir / "sweep_aggregate.csv").string() << "\n";
  return kExitOk;
}

int run_eval(const std::string& data_arg, const std::string& checkpoint_dir,
             const std::string& split_name, const std::string& out_path) {
  const tcgm::MultiModalDataset data = load_data_arg(data_arg);
  const tcgm::Split split = tcgm::split_from_string(split_name);

  const fs::path dir(checkpoint_dir);
  const json manifest = json::parse(read_file(dir / "checkpoints.json"));
  std::vector<tcgm::ClassifierNet> nets;
  for (const auto& name : manifest.at("checkpoints")) {
    nets.push_back(
        tcgm::checkpoint_from_json(read_file(dir / name.get<std::string>())).net);
  }
  const tcgm::SimplexVector prior(manifest.at("prior").get<std::vector<double>>());

  const auto indices = data.split_indices(split);
  std::vector<int> predictions, labels;
  std::vector<double> scores;
  for (const std::size_t idx : indices) {
    const auto& record = data.records[idx];
    if (!record.label) continue;
    const auto p = tcgm::predict(nets, prior, record.features);
    predictions.push_back(p.label);
    scores.push_back(p.distribution.size() == 2 ? p.distribution[1] : 0.0);
    labels.push_back(*record.label);
  }
  if (predictions.empty()) {
    throw std::invalid_argument("eval: the requested split has no labeled records");
  }
  const tcgm::Metrics metrics =
      tcgm::compute_metrics(predictions, scores, labels, data.class_count);

  json j;
  j["split"] = split_name;
  j["count"] = predictions.size();
  j["accuracy"] = metrics.accuracy;
  j["aligned_accuracy"] = tcgm::aligned_accuracy(predictions, labels, data.class_count);
  if (metrics.auc) j["auc"] = *metrics.auc;
  const std::string text = j.dump(2);
  std::cout << text << "\n";
  if (!out_path.empty()) write_file(out_path, text + "\n");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Total correlation gain maximization for semi-supervised multi-modal data"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  SpecFlags gen_spec;
  add_spec_flags(gen, gen_spec);
  std::string gen_table;
  int gen_n = 1000;
  double gen_label_rate = 1.0;
  std::uint64_t gen_seed = 7;
  std::string gen_out = "out";
  gen->add_option("--table", gen_table, "Joint table JSON for a discrete dataset")
      ->check(CLI::ExistingFile);
  gen->add_option("--n", gen_n, "Record count")->check(CLI::PositiveNumber);
  gen->add_option("--label-rate", gen_label_rate, "Labeled fraction of the train split")
      ->check(CLI::Range(0.0, 1.0));
  gen->add_option("--seed", gen_seed, "Base seed");
  gen->add_option("--out", gen_out, "Output directory");
  gen->set_config("--config", "", "Flat JSON config; explicit flags override");
  gen->config_formatter(std::make_shared<JsonConfig>());

  // train
  auto* train_cmd = app.add_subcommand("train", "Train classifiers on a dataset");
  TrainFlags train_flags;
  add_train_flags(train_cmd, train_flags);
  std::string train_data;
  std::string train_out = "out";
  double train_label_rate = 0.0;
  std::uint64_t train_seed = 7;
  train_cmd->add_option("--data", train_data, "Dataset directory or JSONL path")->required();
  train_cmd->add_option("--out", train_out, "Output directory");
  train_cmd->add_option("--label-rate", train_label_rate,
                        "Re-mask the train split to this rate (0 keeps the stored labels)")
      ->check(CLI::Range(0.0, 1.0));
  train_cmd->add_option("--seed", train_seed, "Base seed");
  train_cmd->set_config("--config", "", "Flat JSON config; explicit flags override");
  train_cmd->config_formatter(std::make_shared<JsonConfig>());

  // verify
  auto* verify = app.add_subcommand("verify", "Run the oracle identity checks");
  std::uint64_t verify_seed = 7;
  bool verify_perturb = false;
  std::vector<std::string> verify_checks;
  std::string verify_json;
  verify->add_option("--seed", verify_seed, "Base seed");
  verify->add_flag("--perturb", verify_perturb, "Include the perturbation dominance checks");
  verify->add_option("--checks", verify_checks,
                     "Run only checks whose name starts with one of these prefixes")
      ->delimiter(',');
  verify->add_option("--json", verify_json, "Write the JSON report to this file");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Grid of (method, label rate, seed) runs");
  SpecFlags sweep_spec;
  TrainFlags sweep_flags;
  add_spec_flags(sweep, sweep_spec);
  add_train_flags(sweep, sweep_flags);
  int sweep_n = 1000;
  std::vector<double> sweep_rates;
  int sweep_seeds = 5;
  std::uint64_t sweep_seed = 7;
  std::vector<std::string> sweep_methods{"tcgm", "ce"};
  int sweep_jobs = static_cast<int>(std::thread::hardware_concurrency());
  std::string sweep_out = "out";
  sweep->add_option("--n", sweep_n, "Records per generated dataset")->check(CLI::PositiveNumber);
  sweep->add_option("--label-rates", sweep_rates, "Label rates to sweep")
      ->delimiter(',')
      ->required();
  sweep->add_option("--seeds", sweep_seeds, "Number of seeds")->check(CLI::PositiveNumber);
  sweep->add_option("--seed", sweep_seed, "First seed of the run");
  sweep->add_option("--methods", sweep_methods, "Methods to compare")->delimiter(',');
  sweep->add_option("--jobs", sweep_jobs, "Worker threads");
  sweep->add_option("--out", sweep_out, "Output directory");
  sweep->set_config("--config", "", "Flat JSON config; explicit flags override");
  sweep->config_formatter(std::make_shared<JsonConfig>());

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate checkpoints on a dataset split");
  std::string eval_data, eval_ckpt, eval_out;
  std::string eval_split = "test";
  eval->add_option("--data", eval_data, "Dataset directory or JSONL path")->required();
  eval->add_option("--checkpoints", eval_ckpt, "Directory with checkpoints.json")->required();
  eval->add_option("--split", eval_split, "train, val or test")
      ->check(CLI::IsMember({"train", "val", "test"}));
  eval->add_option("--out", eval_out, "Optional JSON output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) {
      return run_gen(gen_spec, gen_table, gen_n, gen_label_rate, gen_seed, gen_out);
    }
    if (train_cmd->parsed()) {
      return run_train(train_data, train_flags, train_label_rate, train_seed, train_out);
    }
    if (verify->parsed()) {
      return run_verify(verify_seed, verify_perturb, verify_checks, verify_json);
    }
    if (sweep->parsed()) {
      return run_sweep(sweep_spec, sweep_flags, sweep_n, sweep_rates, sweep_seeds, sweep_seed,
                       sweep_methods, sweep_jobs, sweep_out);
    }
    if (eval->parsed()) {
      return run_eval(eval_data, eval_ckpt, eval_split, eval_out);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckFailure;
  }
  return kExitUsage;
}
