/*
 * Copyright 2026 The DSS Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// dss: command-line front end. Subcommands optimize, benchmark, landscape,
// gen-data and report. Exit status 0 on success, 1 on usage errors, 2 on
// runtime failures. Log verbosity on stderr follows DSS_LOG.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "dss/dss.hpp"

namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void setup_logging() {
  auto logger = spdlog::stderr_logger_mt("dss");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  const char* env = std::getenv("DSS_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") spdlog::set_level(spdlog::level::err);
  else if (level == "debug") spdlog::set_level(spdlog::level::debug);
  else spdlog::set_level(spdlog::level::info);
  if (level != "error" && level != "info" && level != "debug")
    spdlog::warn("DSS_LOG='{}' not one of error|info|debug; using info", level);
}

// Writes to `path`, or to stdout when path is empty.
void emit(const std::string& path, const std::function<void(std::ostream&)>& writer) {
  if (path.empty()) {
    writer(std::cout);
    std::cout.flush();
  } else {
    dss::write_file_atomic(path, writer);
    spdlog::info("wrote {}", path);
  }
}

struct FfmDataFlags {
  std::string data_dir;
  std::uint64_t data_seed = 1;
  std::size_t n_train = 50000;
  std::size_t n_valid = 10000;
};

struct LoadedObjective {
  std::string name;
  dss::ConfigSpace space;
  dss::Objective fn;
  std::optional<dss::SyntheticObjective> synthetic;
  bool is_ffm = false;
};

LoadedObjective load_objective(const std::string& spec, const FfmDataFlags& data) {
  LoadedObjective out;
  auto synthetic = [&](dss::SyntheticObjective s) {
    out.name = s.name;
    out.space = s.space;
    out.fn = dss::as_objective(s);
    out.synthetic = std::move(s);
  };
  if (spec == "branin") {
    synthetic(dss::branin());
  } else if (spec == "styblinski") {
    synthetic(dss::styblinski_tang_2d());
  } else if (spec.starts_with("grid:")) {
    std::istringstream in(dss::read_file(spec.substr(5)));
    synthetic(dss::interpolated_grid(dss::parse_landscape_csv(in)));
  } else if (spec == "ffm") {
    dss::ffm::Dataset train, valid;
    if (!data.data_dir.empty()) {
      train = dss::ffm::parse_dataset(dss::read_file(fs::path(data.data_dir) / "train.ffm"));
      valid = dss::ffm::parse_dataset(dss::read_file(fs::path(data.data_dir) / "valid.ffm"));
      // Both files must agree on dimensions.
      const auto nf = std::max(train.n_fields, valid.n_fields);
      const auto nx = std::max(train.n_features, valid.n_features);
      train.n_fields = valid.n_fields = nf;
      train.n_features = valid.n_features = nx;
    } else {
      dss::ffm::GeneratorOptions g;
      g.n_train = data.n_train;
      g.n_valid = data.n_valid;
      auto d = dss::ffm::generate_ctr_data(data.data_seed, g);
      train = std::move(d.train);
      valid = std::move(d.valid);
    }
    spdlog::info("ffm data: {} train / {} valid instances, {} fields, {} features", train.size(),
                 valid.size(), train.n_fields, train.n_features);
    out.name = "ffm";
    out.space = dss::ffm::tuning_space();
    out.fn = dss::ffm::make_objective(std::make_shared<const dss::ffm::Dataset>(std::move(train)),
                                      std::make_shared<const dss::ffm::Dataset>(std::move(valid)));
    out.is_ffm = true;
  } else {
    throw UsageError("--objective must be branin, styblinski, ffm or grid:PATH (got '" + spec +
                     "')");
  }
  return out;
}

// Search space and pool: --space overrides the objective's canonical space;
// its optional "pool" section is used unless --pool is given.
void resolve_space_and_pool(const std::string& space_path, const std::string& pool_path,
                            LoadedObjective& obj, std::vector<dss::SurrogateSpec>& pool) {
  pool = dss::default_pool();
  if (!space_path.empty()) {
    const auto doc = nlohmann::json::parse(dss::read_file(space_path), nullptr, false);
    if (doc.is_discarded()) throw dss::SpaceError(dss::SpaceError::Kind::schema, "", space_path + ": invalid JSON");
    obj.space = dss::space_from_json(doc);
    if (doc.contains("pool")) pool = dss::pool_from_json(doc["pool"]);
  }
  if (!pool_path.empty()) {
    const auto doc = nlohmann::json::parse(dss::read_file(pool_path), nullptr, false);
    if (doc.is_discarded()) throw std::invalid_argument(pool_path + ": invalid JSON");
    pool = dss::pool_from_json(doc);
  }
}

struct CommonFlags {
  std::string objective = "branin";
  std::string space;
  std::string pool;
  std::optional<std::size_t> budget;
  std::size_t parallel_slots = 4;
  std::size_t workers = 0;
  double exploit_fraction = 0.75;
  std::size_t folds = 3;
  int resolution = 16;
  FfmDataFlags data;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--objective", f.objective, "branin | styblinski | ffm | grid:PATH")
      ->capture_default_str();
  cmd->add_option("--space", f.space, "Search space JSON (default: the objective's own space)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--pool", f.pool, "Surrogate pool JSON (default: built-in 14-spec pool)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--budget", f.budget, "Engine evaluations [default: 40, or 20 for ffm]")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--parallel-slots", f.parallel_slots, "Evaluations per batch")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--workers", f.workers, "Evaluation threads per batch (0 = parallel slots)")
      ->capture_default_str();
  cmd->add_option("--exploit-fraction", f.exploit_fraction, "Share of each batch from the ranking")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--folds", f.folds, "Cross-validation folds for surrogate selection")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{2}, std::size_t{100}));
  cmd->add_option("--resolution", f.resolution, "Exploration memory strata per parameter")
      ->capture_default_str()
      ->check(CLI::Range(1, 1 << 20));
  cmd->add_option("--data-dir", f.data.data_dir, "ffm: directory with train.ffm and valid.ffm")
      ->check(CLI::ExistingDirectory);
  cmd->add_option("--data-seed", f.data.data_seed, "ffm: generator seed when no --data-dir")
      ->capture_default_str();
  cmd->add_option("--train", f.data.n_train, "ffm: generated training instances")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--valid", f.data.n_valid, "ffm: generated validation instances")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
}

dss::OptimizerOptions optimizer_options(const CommonFlags& f) {
  dss::OptimizerOptions o;
  o.parallel_slots = f.parallel_slots;
  o.workers = f.workers;
  o.cv_folds = f.folds;
  o.resolution = f.resolution;
  o.acquisition.exploit_fraction = f.exploit_fraction;
  return o;
}

std::size_t budget_for(const CommonFlags& f, const LoadedObjective& obj) {
  const std::size_t b = f.budget.value_or(obj.is_ffm ? 20 : 40);
  const std::size_t n_init = dss::initial_design_size(obj.space);
  if (b < n_init)
    throw UsageError("--budget " + std::to_string(b) + " is below the initial design size " +
                     std::to_string(n_init));
  return b;
}

int cmd_optimize(const CommonFlags& f, std::uint64_t seed, const std::string& out,
                 const std::string& json_out, const std::string& dump_memory) {
  auto obj = load_objective(f.objective, f.data);
  std::vector<dss::SurrogateSpec> pool;
  resolve_space_and_pool(f.space, f.pool, obj, pool);
  const std::size_t budget = budget_for(f, obj);
  spdlog::info("optimize {} budget={} seed={} parallel_slots={} pool={}", obj.name, budget, seed,
               f.parallel_slots, pool.size());
  const auto result = dss::run(obj.fn, obj.space, pool, {budget}, optimizer_options(f), seed);
  for (const auto& it : result.trace)
    spdlog::debug("iteration {}: surrogate={} exploit={} explore={} anomaly={} incumbent={}",
                  it.iteration, it.selected ? it.selected->summary() : "none", it.n_exploit,
                  it.n_explore, it.anomaly, it.incumbent);
  std::ostringstream cfg;
  for (std::size_t i = 0; i < obj.space.size(); ++i)
    cfg << (i ? " " : "") << obj.space[i].name << "=" << result.best.config.values[i];
  spdlog::info("best score {} at evaluation {} ({})", result.best.score, result.best.eval_index,
               cfg.str());
  emit(out, [&](std::ostream& os) { dss::write_trace_csv(os, result); });
  if (!json_out.empty())
    emit(json_out, [&](std::ostream& os) { os << dss::to_json(result).dump(2) << '\n'; });
  if (!dump_memory.empty())
    emit(dump_memory, [&](std::ostream& os) { result.memory.write_csv(os, obj.space); });
  return 0;
}

int cmd_benchmark(const CommonFlags& f, const std::vector<std::string>& strategy_names,
                  const std::vector<std::uint64_t>& seeds, std::size_t cell_workers,
                  const std::string& out, const std::string& summary_out) {
  std::vector<dss::Strategy> strategies;
  for (const auto& s : strategy_names) {
    try {
      strategies.push_back(dss::Strategy::parse(s));
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string("--strategy: ") + e.what());
    }
  }
  auto obj = load_objective(f.objective, f.data);
  std::vector<dss::SurrogateSpec> pool;
  resolve_space_and_pool(f.space, f.pool, obj, pool);
  const std::size_t budget = budget_for(f, obj);
  spdlog::info("benchmark {}: {} strategies x {} seeds, budget {}", obj.name, strategies.size(),
               seeds.size(), budget);
  dss::BenchmarkOptions bo;
  bo.optimizer = optimizer_options(f);
  bo.cell_workers = cell_workers;
  const auto table =
      dss::run_benchmark(strategies, obj.fn, obj.name, obj.space, pool, {budget}, seeds, bo);
  for (const auto& r : table.rows)
    if (r.failed) spdlog::error("{} seed {} failed: {}", r.strategy, r.seed, r.error);
  const auto summary = dss::summarize(table);
  for (const auto& s : summary)
    spdlog::info("{:>10}: median best {:.6g}  IQR {:.3g}  median evals-to-best {}", s.strategy,
                 s.median_best, s.iqr_best, s.median_evals_to_best);
  emit(out, [&](std::ostream& os) { dss::write_benchmark_csv(os, table); });
  if (!summary_out.empty())
    emit(summary_out, [&](std::ostream& os) { dss::write_summary_csv(os, summary); });
  return 0;
}

int cmd_landscape(const std::string& objective, std::size_t resolution, const std::string& out) {
  const auto obj = load_objective(objective, {});
  if (!obj.synthetic || obj.space.size() != 2)
    throw UsageError("landscape needs a two-parameter synthetic objective");
  const auto oracle = dss::grid_oracle(*obj.synthetic, resolution);
  spdlog::info("grid minimum {} at x1={} x2={}", oracle.best_value, oracle.best_config.values[0],
               oracle.best_config.values[1]);
  emit(out, [&](std::ostream& os) { dss::write_landscape_csv(os, oracle); });
  return 0;
}

int cmd_gen_data(std::uint64_t seed, const dss::ffm::GeneratorOptions& g, const std::string& dir) {
  fs::create_directories(dir);
  const auto d = dss::ffm::generate_ctr_data(seed, g);
  emit((fs::path(dir) / "train.ffm").string(),
       [&](std::ostream& os) { dss::ffm::write_dataset(os, d.train); });
  emit((fs::path(dir) / "valid.ffm").string(),
       [&](std::ostream& os) { dss::ffm::write_dataset(os, d.valid); });
  spdlog::info("ground-truth validation RIG {:.4f}", dss::ffm::evaluate(d.ground_truth, d.valid).rig);
  return 0;
}

int cmd_report(const std::string& in_path, const std::string& out) {
  std::istringstream in(dss::read_file(in_path));
  const auto summary = dss::summarize(dss::read_benchmark_csv(in));
  emit(out, [&](std::ostream& os) { dss::write_summary_csv(os, summary); });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Dynamic surrogate switching hyperparameter optimization"};
  app.require_subcommand(1);

  CommonFlags opt_flags;
  std::uint64_t opt_seed = 0;
  std::string opt_out, opt_json, opt_memory;
  auto* optimize = app.add_subcommand("optimize", "Run one optimization and export its trace");
  add_common(optimize, opt_flags);
  optimize->add_option("--seed", opt_seed, "Master seed")->capture_default_str();
  optimize->add_option("--out", opt_out, "Trace CSV (default: stdout)");
  optimize->add_option("--json", opt_json, "Full run result as JSON");
  optimize->add_option("--dump-memory", opt_memory, "Visited memory cells as CSV");

  CommonFlags bench_flags;
  std::vector<std::string> bench_strategies = {"dss", "fixed_rf", "fixed_gp", "fixed_gbm", "random"};
  std::vector<std::uint64_t> bench_seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::size_t cell_workers = 1;
  std::string bench_out, bench_summary;
  auto* benchmark = app.add_subcommand("benchmark", "Compare strategies over seeds");
  add_common(benchmark, bench_flags);
  benchmark->add_option("--strategy", bench_strategies, "Comma-separated strategies")
      ->delimiter(',')
      ->capture_default_str();
  benchmark->add_option("--seeds", bench_seeds, "Comma-separated master seeds")
      ->delimiter(',')
      ->capture_default_str();
  benchmark->add_option("--cell-workers", cell_workers, "(strategy, seed) cells run concurrently")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  benchmark->add_option("--out", bench_out, "Benchmark CSV (default: stdout)");
  benchmark->add_option("--summary", bench_summary, "Per-strategy summary CSV");

  std::string land_objective = "branin";
  std::size_t land_resolution = 101;
  std::string land_out;
  auto* landscape = app.add_subcommand("landscape", "Export a grid of objective values");
  landscape->add_option("--objective", land_objective, "branin | styblinski | grid:PATH")
      ->capture_default_str();
  landscape->add_option("--resolution", land_resolution, "Grid points per axis")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{2}, std::size_t{100000}));
  landscape->add_option("--out", land_out, "Landscape CSV (default: stdout)");

  std::uint64_t gen_seed = 1;
  dss::ffm::GeneratorOptions gen;
  std::string gen_dir;
  auto* gen_data = app.add_subcommand("gen-data", "Write synthetic CTR data in libffm format");
  gen_data->add_option("--seed", gen_seed, "Generator seed")->capture_default_str();
  gen_data->add_option("--train", gen.n_train, "Training instances")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  gen_data->add_option("--valid", gen.n_valid, "Validation instances")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  gen_data->add_option("--fields", gen.n_fields, "Fields per instance")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  gen_data->add_option("--features-per-field", gen.features_per_field, "Features per field")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  gen_data->add_option("--noise", gen.noise, "Logit noise standard deviation")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  gen_data->add_option("--out-dir", gen_dir, "Output directory")->required();

  std::string report_in, report_out;
  auto* report = app.add_subcommand("report", "Summarize a benchmark CSV per strategy");
  report->add_option("--in", report_in, "Benchmark CSV")->required()->check(CLI::ExistingFile);
  report->add_option("--out", report_out, "Summary CSV (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*optimize) return cmd_optimize(opt_flags, opt_seed, opt_out, opt_json, opt_memory);
    if (*benchmark)
      return cmd_benchmark(bench_flags, bench_strategies, bench_seeds, cell_workers, bench_out,
                           bench_summary);
    if (*landscape) return cmd_landscape(land_objective, land_resolution, land_out);
    if (*gen_data) return cmd_gen_data(gen_seed, gen, gen_dir);
    if (*report) return cmd_report(report_in, report_out);
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    std::cerr << "Run with --help for usage.\n";
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 1;
}
