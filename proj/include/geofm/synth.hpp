#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "geofm/geo_core.hpp"
#include "geofm/ingest.hpp"
#include "geofm/qc_aggregate.hpp"

namespace geofm::synth {

enum class SignalSource { kPdfm, kAlphaEarth, kCdr, kSpatial };

struct TargetRecipe {
  std::string name;
  IndicatorKind kind = IndicatorKind::kRate;
  Cadence cadence = Cadence::kMonthly;
  std::vector<SignalSource> signal_sources;
  double noise_sd = 0.0;        // catchment noise, in units of the signal SD
  double missing_rate = 0.0;    // per facility-period
  double zero_inflation = 0.0;  // per facility-period
  double level = 0.1;           // median rate, or median count per catchment
  double spread = 1.0;          // log-odds (RATE) or log (COUNT) scale of the signal
  double coverage = 1.0;        // share of catchments whose facilities report at all

  IndicatorSpec spec() const { return {name, kind, cadence}; }
};

/// Seven rates and eight counts. `unsuppressed_vl_rate` is the only recipe
/// driven by the smooth spatial field alone.
std::vector<TargetRecipe> default_recipes();

struct SynthConfig {
  int n_catchments = 552;
  BoundingBox extent{32.67, -17.13, 35.92, -9.37};
  std::uint64_t seed = 0;
  std::vector<TargetRecipe> recipes = default_recipes();

  double pdfm_length_km = 20.0;
  double alphaearth_length_km = 15.0;
  double cdr_length_km = 25.0;
  double spatial_length_km = 250.0;
  double embedding_noise_sd = 0.3;

  int min_facilities = 1;
  int max_facilities = 5;
};

/// Throws ContractError for n < 10, an empty extent or bad recipe fields.
void validate(const SynthConfig& cfg);

/// Perturbed rectangular grid that tiles the extent exactly. Ids are C0001...
std::vector<Catchment> gen_catchments(const SynthConfig& cfg);

/// Each dimension is an exponential-covariance Gaussian field at the centroids
/// plus white noise.
EmbeddingTable gen_embeddings(const std::vector<Catchment>& catchments, EmbeddingSource source,
                              const SynthConfig& cfg);

/// Field with exponential covariance exp(-d / length_km) at the given points.
std::vector<double> gaussian_field(const std::vector<GeoPoint>& points, double length_km,
                                   std::uint64_t seed);

struct Facility {
  std::string id;
  std::string catchment_id;
  GeoPoint location;
};

/// 1..5 facilities per catchment, each inside its catchment.
std::vector<Facility> gen_facilities(const std::vector<Catchment>& catchments,
                                     const SynthConfig& cfg);

struct GeneratedTarget {
  std::vector<FacilityRow> rows;
  std::map<std::string, double> latent;  // catchment_id -> ground truth
};

/// Catchment latent values from the recipe's signal sources plus noise, then
/// scattered over facilities and periods with missingness and zero inflation.
GeneratedTarget gen_target(const TargetRecipe& recipe, std::size_t recipe_index,
                           const std::map<EmbeddingSource, EmbeddingTable>& embeddings,
                           const std::vector<Catchment>& catchments,
                           const std::vector<Facility>& facilities, const SynthConfig& cfg);

struct GroundTruth {
  std::string catchment_id;
  std::string target;
  double latent_value;
};

struct Dataset {
  std::vector<Catchment> catchments;
  std::map<EmbeddingSource, EmbeddingTable> embeddings;
  std::vector<Facility> facilities;
  std::vector<FacilityRow> rows;
  std::vector<GroundTruth> ground_truth;
};

Dataset generate(const SynthConfig& cfg);

/// catchments.geojson, embeddings_{pdfm,alphaearth,cdr}.csv, facilities.csv,
/// ground_truth.csv.
void write_dataset(const Dataset& data, const std::string& dir);

}  // namespace geofm::synth
