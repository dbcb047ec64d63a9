#include "geofm/pipeline.hpp"

#include <spdlog/spdlog.h>

#include "geofm/errors.hpp"

namespace geofm {

std::vector<IndicatorTarget> build_targets(std::span<const FacilityRow> rows,
                                           std::span<const Catchment> catchments,
                                           std::span<const IndicatorSpec> specs,
                                           AggregationMode mode, std::vector<QCOutcome>* audit) {
  const AssignmentReport assignment = assign_facilities(rows, catchments);
  std::vector<IndicatorTarget> out;
  out.reserve(specs.size());
  for (const auto& spec : specs) {
    const auto series = collect_series(rows, spec, assignment);
    out.push_back(build_target(spec, series, mode, audit));
    spdlog::info("{}: {} catchments after QC", spec.name, out.back().n_catchments());
  }
  return out;
}

ExperimentInputs load_inputs(const RunConfig& cfg, std::vector<QCOutcome>* audit) {
  ExperimentInputs in;
  in.catchments = load_catchments(cfg.data.catchments);
  std::vector<std::string> ids;
  for (const auto& c : in.catchments) ids.push_back(c.id);
  for (const auto& [source, path] : cfg.data.embeddings)
    in.embeddings.push_back(load_embeddings(path, source, &ids));
  const auto rows = load_facilities(cfg.data.facilities);
  const auto specs = infer_indicators(rows, cfg.indicators);
  in.targets = build_targets(rows, in.catchments, specs, cfg.aggregation, audit);
  return in;
}

}  // namespace geofm
