#include <cstdio>
#include <exception>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "nowcast/error.hpp"
#include "nowcast/kernels.hpp"
#include "nowcast/pipeline.hpp"

namespace {

struct CliState {
  std::string config_path;
  std::map<std::string, std::string> overrides;
  std::string stage;
};

void attach_options(CLI::App* cmd, CliState& state) {
  cmd->add_option("--config", state.config_path, "key = value configuration file");

  auto bind = [cmd, &state](const std::string& flag, const std::string& key,
                            const std::string& help) {
    cmd->add_option_function<std::string>(
        flag, [&state, key](const std::string& value) { state.overrides[key] = value; }, help);
  };

  bind("--out", "paths.out", "output directory (default: out)");
  bind("--workers", "runtime.workers", "data-parallel worker cap (env NOWCAST_WORKERS)");
  bind("--seed", "seed", "master seed; required for randomized stages");

  bind("--cdr", "paths.cdr", "CDR CSV (timestamp,tower,caller,callee)");
  bind("--towers", "paths.towers", "tower CSV (tower,latitude,longitude)");
  bind("--regions", "paths.regions", "region CSV");
  bind("--mapping", "paths.mapping", "explicit tower→region CSV");
  bind("--geometry", "paths.geometry", "region GeoJSON FeatureCollection");

  bind("--start", "observation.start", "observation window start date (YYYY-MM-DD)");
  bind("--end", "observation.end", "observation window end date, exclusive");
  bind("--min-rate", "filter.min_rate", "calls-per-day retention threshold (default 0.5)");
  bind("--night-start", "night.start", "night window start (default 22:00)");
  bind("--night-end", "night.end", "night window end (default 07:00)");
  bind("--geo-mode", "geo.mode", "wgs84 or planar coordinates");

  bind("--population-floor", "territory.population_floor", "exclude regions at or below this population");
  bind("--min-users", "territory.min_users", "minimum users per aggregated region");
  bind("--centroid-cutoff-km", "territory.centroid_cutoff_km", "fallback centroid assignment cutoff");

  bind("--nm-reps", "nullmodel.repetitions", "null model repetitions (default 100)");
  bind("--cv-reps", "cv.repetitions", "cross-validation experiments (default 1000)");
  bind("--train-fraction", "cv.train_fraction", "training fraction for CV (default 0.6)");
  bind("--trees", "forest.trees", "random forest size (default 200)");
  bind("--mtry", "forest.features_per_split", "features per split (default floor(sqrt(p)))");
  bind("--min-leaf", "forest.min_leaf", "minimum leaf size (default 1)");

  bind("--users", "synth.users", "synth: user count");
  bind("--region-count", "synth.regions", "synth: region count");
  bind("--towers-per-region", "synth.towers_per_region", "synth: towers per region");
  bind("--days", "synth.days", "synth: observation days (default 45)");
  bind("--calls-min", "synth.calls_min", "synth: minimum calls per user");
  bind("--calls-max", "synth.calls_max", "synth: maximum calls per user");
  bind("--tolerance", "synth.tolerance", "synth: SD/MD realization tolerance (default 0.05)");
  cmd->add_flag_function(
      "--null",
      [&state](std::int64_t count) {
        if (count > 0) state.overrides["synth.null"] = "true";
      },
      "synth: draw indicators independently of all measures");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nowcast: behavioral measures from call records, aggregated over regions,\n"
               "with correlation, null-model, regression and classification reports"};
  app.require_subcommand(1);

  CliState state;
  const std::map<std::string, std::string> stage_help = {
      {"ingest", "parse CDRs, filter users, build trajectories and the call graph"},
      {"measures", "compute per-user social/mobility measures and home towers"},
      {"aggregate", "assign users to regions and average the measures"},
      {"correlate", "measure/indicator correlations and decile tables"},
      {"nullmodel", "user-reassignment and indicator-shuffle baselines"},
      {"regress", "linear models with importance decomposition and CV"},
      {"classify", "tertile random-forest classifiers with Gini importances"},
      {"synth", "generate a synthetic corpus with planted relationships"},
      {"report", "consolidated JSON bundle from all stage artifacts"},
      {"pipeline", "run every stage in order (requires --seed)"},
  };
  for (const auto& [name, help] : stage_help) {
    CLI::App* cmd = app.add_subcommand(name, help);
    attach_options(cmd, state);
    cmd->callback([&state, stage = name] { state.stage = stage; });
  }

  CLI11_PARSE(app, argc, argv);

  try {
    nowcast::pipeline::Config config;
    if (!state.config_path.empty())
      config = nowcast::pipeline::Config::from_file(state.config_path);
    for (const auto& [key, value] : state.overrides) config.set(key, value);

    nowcast::pipeline::run_stage(state.stage, config);
    std::fprintf(stderr, "%s: done (simd backend: %s)\n", state.stage.c_str(),
                 nowcast::simd::backend_name(nowcast::simd::active_backend()));
    return nowcast::kExitOk;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return nowcast::exit_code_for(e);
  }
}
