#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <string>

#include "ctomics/error.hpp"
#include "ctomics/fio.hpp"
#include "ctomics/pipeline.hpp"

using namespace ctomics;

int main(int argc, char** argv) {
  CLI::App app{"calcium- and fat-omics pipeline over non-contrast CT"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config, out = ".";
  uint64_t seed = 0;
  int threads = 1;
  app.add_option("--config", config, "JSON config for the subcommand")->required();
  auto* seed_opt =
      app.add_option("--seed", seed, "master seed, overrides the config's");
  app.add_option("--threads", threads, "worker threads; never affects outputs")
      ->check(CLI::PositiveNumber);
  app.add_option("--out", out, "output directory (default .)");

  const std::map<std::string,
                 std::pair<const char*, std::function<RunSummary(const PipelineIO&)>>>
      commands = {
          {"extract", {"extract calcium, fat and clinical features", run_extract}},
          {"select", {"rank features by cross-validated mean |SHAP|", run_select}},
          {"train", {"fit a gradient-boosted model", run_train}},
          {"evaluate", {"repeated stratified cross-validation report", run_evaluate}},
          {"compare", {"paired DeLong and McNemar comparison", run_compare}},
          {"gridsearch", {"cross-validated hyperparameter grid", run_gridsearch}},
          {"phantom", {"generate a synthetic phantom dataset", run_phantom}},
      };
  for (const auto& [name, cmd] : commands) app.add_subcommand(name, cmd.first);

  CLI11_PARSE(app, argc, argv);
  const std::string name = app.get_subcommands().front()->get_name();

  PipelineIO io;
  io.config_path = config;
  io.out_dir = out;
  io.seed = seed;
  io.seed_overridden = seed_opt->count() > 0;
  io.threads = threads;

  try {
    const RunSummary s = commands.at(name).second(io);
    for (const std::string& f : s.failures)
      std::fprintf(stderr, "failed: %s\n", f.c_str());
    std::printf("%s: %d of %d items ok, %zu artifacts in %s\n", name.c_str(),
                s.items - int(s.failures.size()), s.items, s.artifacts.size(),
                out.c_str());
    return s.failures.empty() ? 0 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    // the run summary is still owed, even when the command aborts
    try {
      RunSummary s;
      s.command = name;
      s.seed = seed;
      s.items = 1;
      s.failures.push_back(std::string("config: ") + e.what());
      std::filesystem::create_directories(out);
      write_file_atomic(
          (std::filesystem::path(out) / (name + "_summary.json")).string(),
          s.json());
    } catch (...) {
    }
    return 2;
  }
}
