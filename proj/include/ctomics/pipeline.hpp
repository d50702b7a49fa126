#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctomics/feature_table.hpp"

namespace ctomics {

// CAD-RADS 4A, 4B and 5 form the positive class; 0 through 3 are negative.
// Anything else is rejected.
int cad_rads_to_label(const std::string& category);

// Nested model groups by column prefix: "clinical" keeps clin_ columns,
// "clinical+calcium" adds ca_, "clinical+calcium+fat" adds fat_. Order
// follows the given name list; an empty selection is rejected.
std::vector<std::string> model_group_columns(const std::string& group,
                                             const std::vector<std::string>& names);

// One command invocation: a JSON config, an output directory, the master
// seed and the thread count. The config's "seed" key applies unless the
// flag overrode it; threads never reach any emitted artifact.
struct PipelineIO {
  std::string config_path;
  std::string out_dir = ".";
  uint64_t seed = 0;
  bool seed_overridden = false;
  int threads = 1;
};

struct RunSummary {
  std::string command;
  uint64_t seed = 0;
  int items = 0;                      // per-item units the command processed
  std::vector<std::string> failures;  // "item: reason", in item order
  std::vector<std::string> artifacts; // file names relative to out_dir
  std::string json() const;
};

// Each command parses its config, writes its artifacts plus
// <command>_summary.json into out_dir, and returns the summary. Per-item
// failures are recorded and skipped; config and schema problems throw.
RunSummary run_extract(const PipelineIO& io);
RunSummary run_select(const PipelineIO& io);
RunSummary run_train(const PipelineIO& io);
RunSummary run_evaluate(const PipelineIO& io);
RunSummary run_compare(const PipelineIO& io);
RunSummary run_gridsearch(const PipelineIO& io);
RunSummary run_phantom(const PipelineIO& io);

}  // namespace ctomics
