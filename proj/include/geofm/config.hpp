#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "geofm/harness.hpp"
#include "geofm/qc_aggregate.hpp"
#include "geofm/synth.hpp"

namespace geofm {

struct DataPaths {
  std::string catchments;
  std::string facilities;
  std::map<EmbeddingSource, std::string> embeddings;
};

/// INI file with sections [data], [split], [grid], [baselines], [qc] and an
/// optional [indicators] block of `name = RATE|COUNT,MONTHLY|QUARTERLY`.
struct RunConfig {
  DataPaths data;
  ExperimentOptions options;
  AggregationMode aggregation = AggregationMode::kPooled;
  std::map<std::string, IndicatorSpec> indicators;
};

/// Throws ConfigError naming the path and key on any problem. [split] seed is
/// required. Unknown sections or keys are rejected.
RunConfig load_run_config(const std::string& path);

/// [synth] seed, n_catchments, min_lon, min_lat, max_lon, max_lat,
/// min_facilities, max_facilities, targets (comma list subset of the defaults).
/// Sections other than [synth] are ignored so one file can drive both commands.
synth::SynthConfig load_synth_config(const std::string& path);

/// Kind from denominator presence, cadence from the largest period index.
std::vector<IndicatorSpec> infer_indicators(const std::vector<FacilityRow>& rows,
                                            const std::map<std::string, IndicatorSpec>& overrides);

}  // namespace geofm
