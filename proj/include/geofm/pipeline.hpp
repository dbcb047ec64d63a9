#pragma once

#include <vector>

#include "geofm/config.hpp"
#include "geofm/harness.hpp"
#include "geofm/ingest.hpp"
#include "geofm/qc_aggregate.hpp"

namespace geofm {

/// Spatial join, QC and aggregation for every indicator in `specs`.
std::vector<IndicatorTarget> build_targets(std::span<const FacilityRow> rows,
                                           std::span<const Catchment> catchments,
                                           std::span<const IndicatorSpec> specs,
                                           AggregationMode mode = AggregationMode::kPooled,
                                           std::vector<QCOutcome>* audit = nullptr);

/// Loads and validates every file named by the config and builds the targets.
ExperimentInputs load_inputs(const RunConfig& cfg, std::vector<QCOutcome>* audit = nullptr);

}  // namespace geofm
