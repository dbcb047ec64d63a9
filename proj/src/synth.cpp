#include "geofm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "geofm/errors.hpp"
#include "geofm/text.hpp"

namespace geofm::synth {

namespace {

// Independent, reproducible streams keyed by (seed, purpose, index).
enum Stream : std::uint32_t {
  kCatchmentStream = 1,
  kEmbeddingStream = 2,
  kFacilityStream = 3,
  kRecipeStream = 4,
  kSpatialStream = 5,
  kScatterStream = 6,
};

std::mt19937_64 rng_for(std::uint64_t seed, std::uint32_t stream, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    stream, static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double normal(std::mt19937_64& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

/// Dense Cholesky factor of an exponential covariance over `points`.
class FieldSampler {
 public:
  FieldSampler(const std::vector<GeoPoint>& points, double length_km) {
    if (!(length_km > 0.0)) throw ContractError("field length scale must be > 0");
    const auto n = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd cov(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      cov(i, i) = 1.0 + 1e-10;
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double c = std::exp(-distance_km(points[static_cast<std::size_t>(i)],
                                               points[static_cast<std::size_t>(j)]) /
                                  length_km);
        cov(i, j) = c;
        cov(j, i) = c;
      }
    }
    llt_.compute(cov);
    if (llt_.info() != Eigen::Success) throw FitError("field covariance is not positive definite");
  }

  std::vector<double> sample(std::mt19937_64& rng) const {
    const auto n = llt_.matrixL().rows();
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = normal(rng);
    const Eigen::VectorXd x = llt_.matrixL() * z;
    return {x.data(), x.data() + n};
  }

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

std::vector<GeoPoint> centroids_of(const std::vector<Catchment>& catchments) {
  std::vector<GeoPoint> out;
  out.reserve(catchments.size());
  for (const auto& c : catchments) out.push_back(centroid(c.geometry));
  return out;
}

void standardize(std::vector<double>& v) {
  if (v.empty()) return;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
  for (double& x : v) x = (x - mean) / sd;
}

std::string padded_id(char prefix, std::size_t value, std::size_t width) {
  std::string digits = std::to_string(value);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return prefix + digits;
}

std::size_t digits_for(std::size_t n) { return std::max<std::size_t>(4, std::to_string(n).size()); }

EmbeddingSource embedding_of(SignalSource s) {
  switch (s) {
    case SignalSource::kPdfm: return EmbeddingSource::kPdfm;
    case SignalSource::kAlphaEarth: return EmbeddingSource::kAlphaEarth;
    case SignalSource::kCdr: return EmbeddingSource::kCdr;
    case SignalSource::kSpatial: break;
  }
  throw ContractError("spatial signal has no embedding table");
}

}  // namespace

std::vector<TargetRecipe> default_recipes() {
  using S = SignalSource;
  const auto R = IndicatorKind::kRate;
  const auto C = IndicatorKind::kCount;
  const auto M = Cadence::kMonthly;
  const auto Q = Cadence::kQuarterly;
  // name, kind, cadence, sources, noise, missing, zeros, level, spread, coverage
  return {
      {"population_density", R, M, {S::kPdfm, S::kAlphaEarth}, 0.30, 0.05, 0.00, 2e-4, 1.0, 0.92},
      {"hiv_test_positivity", R, M, {S::kPdfm, S::kCdr}, 0.40, 0.12, 0.05, 0.06, 0.7, 0.95},
      {"malaria_case_rate", R, M, {S::kAlphaEarth}, 0.35, 0.10, 0.03, 0.20, 0.8, 0.97},
      {"anc_access_rate", R, M, {S::kPdfm}, 0.40, 0.10, 0.02, 0.50, 0.8, 0.96},
      {"tb_case_rate", R, Q, {S::kCdr, S::kPdfm}, 0.45, 0.15, 0.05, 0.01, 0.7, 0.85},
      {"hiv_dx_first_anc_rate", R, M, {S::kAlphaEarth, S::kCdr}, 0.40, 0.15, 0.10, 0.02, 0.7, 0.90},
      {"unsuppressed_vl_rate", R, Q, {S::kSpatial}, 0.15, 0.10, 0.00, 0.08, 0.6, 0.90},
      {"population", C, M, {S::kPdfm}, 0.30, 0.05, 0.00, 30000.0, 0.7, 0.95},
      {"hiv_cases", C, M, {S::kPdfm, S::kCdr}, 0.40, 0.10, 0.05, 120.0, 0.9, 0.95},
      {"malaria_cases", C, M, {S::kAlphaEarth, S::kPdfm}, 0.35, 0.08, 0.03, 4000.0, 0.8, 0.97},
      {"anc_access_count", C, M, {S::kPdfm}, 0.40, 0.10, 0.03, 600.0, 0.7, 0.96},
      {"tb_cases", C, Q, {S::kCdr}, 0.45, 0.15, 0.08, 15.0, 0.8, 0.85},
      {"sti_cases", C, M, {S::kPdfm, S::kAlphaEarth}, 0.45, 0.12, 0.10, 60.0, 0.8, 0.90},
      {"malnutrition_cases", C, M, {S::kAlphaEarth}, 0.50, 0.15, 0.15, 25.0, 0.9, 0.88},
      {"child_vaccinations", C, M, {S::kPdfm, S::kCdr, S::kAlphaEarth}, 0.35, 0.08, 0.02, 900.0,
       0.7, 0.97},
  };
}

void validate(const SynthConfig& cfg) {
  if (cfg.n_catchments < 10) throw ContractError("n_catchments must be >= 10");
  const auto& e = cfg.extent;
  if (!(e.max_lon > e.min_lon && e.max_lat > e.min_lat))
    throw ContractError("synthetic extent is empty");
  if (!is_valid({e.min_lon, e.min_lat}) || !is_valid({e.max_lon, e.max_lat}))
    throw ContractError("synthetic extent is out of range");
  if (cfg.min_facilities < 1 || cfg.max_facilities < cfg.min_facilities)
    throw ContractError("facility counts must satisfy 1 <= min <= max");
  for (const auto& r : cfg.recipes) {
    if (r.name.empty() || r.name.find(',') != std::string::npos)
      throw ContractError("recipe names must be non-empty and comma-free");
    if (r.signal_sources.empty()) throw ContractError("recipe " + r.name + " has no signal source");
    if (!(r.noise_sd >= 0.0)) throw ContractError("recipe " + r.name + ": noise_sd < 0");
    if (!(r.missing_rate >= 0.0 && r.missing_rate <= 1.0) ||
        !(r.zero_inflation >= 0.0 && r.zero_inflation <= 1.0) ||
        !(r.coverage >= 0.0 && r.coverage <= 1.0))
      throw ContractError("recipe " + r.name + ": probabilities must be in [0, 1]");
    if (r.kind == IndicatorKind::kRate && !(r.level > 0.0 && r.level < 1.0))
      throw ContractError("recipe " + r.name + ": rate level must be in (0, 1)");
    if (r.kind == IndicatorKind::kCount && !(r.level > 0.0))
      throw ContractError("recipe " + r.name + ": count level must be > 0");
  }
}

std::vector<Catchment> gen_catchments(const SynthConfig& cfg) {
  validate(cfg);
  auto rng = rng_for(cfg.seed, kCatchmentStream);
  const auto& e = cfg.extent;
  const auto n = static_cast<std::size_t>(cfg.n_catchments);
  const double width = e.max_lon - e.min_lon;
  const double height = e.max_lat - e.min_lat;
  const double mid_lat = 0.5 * (e.min_lat + e.max_lat) * std::numbers::pi / 180.0;
  const double aspect = height / (width * std::cos(mid_lat));
  const std::size_t rows = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(n) * aspect))), 1, n);

  std::vector<std::size_t> per_row(rows, n / rows);
  std::vector<std::size_t> row_order(rows);
  std::iota(row_order.begin(), row_order.end(), 0);
  std::shuffle(row_order.begin(), row_order.end(), rng);
  for (std::size_t i = 0; i < n % rows; ++i) ++per_row[row_order[i]];

  const double h = height / static_cast<double>(rows);
  std::vector<double> y(rows + 1);
  y.front() = e.min_lat;
  y.back() = e.max_lat;
  for (std::size_t k = 1; k < rows; ++k)
    y[k] = e.min_lat + static_cast<double>(k) * h + uniform(rng, -0.25, 0.25) * h;

  std::vector<Catchment> out;
  out.reserve(n);
  const std::size_t id_width = digits_for(n);
  std::lognormal_distribution<double> population(std::log(30000.0), 0.6);
  for (std::size_t k = 0; k < rows; ++k) {
    const std::size_t m = per_row[k];
    const double w = width / static_cast<double>(m);
    std::vector<double> xb(m + 1), xt(m + 1);
    xb.front() = xt.front() = e.min_lon;
    xb.back() = xt.back() = e.max_lon;
    for (std::size_t j = 1; j < m; ++j) {
      xb[j] = e.min_lon + static_cast<double>(j) * w + uniform(rng, -0.25, 0.25) * w;
      xt[j] = e.min_lon + static_cast<double>(j) * w + uniform(rng, -0.25, 0.25) * w;
    }
    for (std::size_t j = 0; j < m; ++j) {
      Catchment c;
      c.id = padded_id('C', out.size() + 1, id_width);
      c.geometry.exterior = {{xb[j], y[k]}, {xb[j + 1], y[k]}, {xt[j + 1], y[k + 1]}, {xt[j], y[k + 1]}};
      c.area_km2 = approx_area_km2(c.geometry);
      c.population = std::round(population(rng));
      out.push_back(std::move(c));
    }
  }
  return out;
}

std::vector<double> gaussian_field(const std::vector<GeoPoint>& points, double length_km,
                                   std::uint64_t seed) {
  auto rng = rng_for(seed, kSpatialStream);
  return FieldSampler(points, length_km).sample(rng);
}

EmbeddingTable gen_embeddings(const std::vector<Catchment>& catchments, EmbeddingSource source,
                              const SynthConfig& cfg) {
  double length = 0.0;
  switch (source) {
    case EmbeddingSource::kPdfm: length = cfg.pdfm_length_km; break;
    case EmbeddingSource::kAlphaEarth: length = cfg.alphaearth_length_km; break;
    case EmbeddingSource::kCdr: length = cfg.cdr_length_km; break;
    case EmbeddingSource::kMulti: throw ContractError("MULTI embeddings are fused, not generated");
  }
  const FieldSampler sampler(centroids_of(catchments), length);
  auto rng = rng_for(cfg.seed, kEmbeddingStream, static_cast<std::uint64_t>(source));

  EmbeddingTable table;
  table.source = source;
  table.dim = source_dim(source);
  std::vector<std::vector<double>> columns;
  for (std::size_t j = 0; j < table.dim; ++j) {
    auto col = sampler.sample(rng);
    for (double& v : col) v += cfg.embedding_noise_sd * normal(rng);
    columns.push_back(std::move(col));
  }
  for (std::size_t i = 0; i < catchments.size(); ++i) {
    std::vector<double> row(table.dim);
    for (std::size_t j = 0; j < table.dim; ++j) row[j] = columns[j][i];
    table.rows.emplace(catchments[i].id, std::move(row));
  }
  return table;
}

std::vector<Facility> gen_facilities(const std::vector<Catchment>& catchments,
                                     const SynthConfig& cfg) {
  auto rng = rng_for(cfg.seed, kFacilityStream);
  std::uniform_int_distribution<int> count(cfg.min_facilities, cfg.max_facilities);
  std::vector<Facility> out;
  for (const auto& c : catchments) {
    const int k = count(rng);
    const GeoPoint mid = centroid(c.geometry);
    const BoundingBox box = bounding_box(c.geometry);
    for (int i = 0; i < k; ++i) {
      GeoPoint q = mid;
      for (int attempt = 0; attempt < 100; ++attempt) {
        const GeoPoint cand{uniform(rng, box.min_lon, box.max_lon),
                            uniform(rng, box.min_lat, box.max_lat)};
        if (point_in_polygon(cand, c.geometry)) {
          q = cand;
          break;
        }
      }
      // Pull halfway to the centroid so no facility sits on a shared border.
      GeoPoint p{mid.lon + 0.5 * (q.lon - mid.lon), mid.lat + 0.5 * (q.lat - mid.lat)};
      if (!point_in_polygon(p, c.geometry)) p = mid;
      out.push_back({std::string(), c.id, p});
    }
  }
  const std::size_t width = std::max<std::size_t>(5, std::to_string(out.size()).size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i].id = padded_id('F', i + 1, width);
  return out;
}

GeneratedTarget gen_target(const TargetRecipe& recipe, std::size_t recipe_index,
                           const std::map<EmbeddingSource, EmbeddingTable>& embeddings,
                           const std::vector<Catchment>& catchments,
                           const std::vector<Facility>& facilities, const SynthConfig& cfg) {
  auto rng = rng_for(cfg.seed, kRecipeStream, recipe_index);
  const std::size_t n = catchments.size();

  // Signal: one standardized component per source, summed and restandardized.
  std::vector<double> signal(n, 0.0);
  for (const SignalSource s : recipe.signal_sources) {
    std::vector<double> term(n);
    if (s == SignalSource::kSpatial) {
      term = gaussian_field(centroids_of(catchments), cfg.spatial_length_km,
                            cfg.seed * 1000003ULL + recipe_index);
    } else {
      const auto it = embeddings.find(embedding_of(s));
      if (it == embeddings.end())
        throw ContractError("recipe " + recipe.name + " needs an embedding table that is absent");
      const EmbeddingTable& table = it->second;
      std::vector<std::size_t> dims(table.dim);
      std::iota(dims.begin(), dims.end(), 0);
      std::shuffle(dims.begin(), dims.end(), rng);
      const std::size_t a = dims[0], b = dims[1 % table.dim], c = dims[2 % table.dim];
      const double qa = uniform(rng, -0.6, 0.6), qb = uniform(rng, -0.6, 0.6),
                   qc = uniform(rng, -0.6, 0.6);
      for (std::size_t i = 0; i < n; ++i) {
        const auto& e = table.rows.at(catchments[i].id);
        term[i] = (e[a] > qa ? 1.0 : 0.0) + 0.8 * (e[b] > qb ? 1.0 : 0.0) * (e[c] > qc ? 1.0 : 0.0) +
                  0.4 * e[c];
      }
    }
    standardize(term);
    for (std::size_t i = 0; i < n; ++i) signal[i] += term[i];
  }
  standardize(signal);

  GeneratedTarget out;
  std::map<std::string, bool> covered;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = signal[i] + recipe.noise_sd * normal(rng);
    const double v = recipe.kind == IndicatorKind::kRate
                         ? 1.0 / (1.0 + std::exp(-(std::log(recipe.level / (1.0 - recipe.level)) +
                                                   recipe.spread * z)))
                         : recipe.level * std::exp(recipe.spread * z);
    out.latent.emplace(catchments[i].id, std::clamp(v, 0.0, recipe.kind == IndicatorKind::kRate
                                                                ? 1.0
                                                                : std::numeric_limits<double>::max()));
    covered.emplace(catchments[i].id, uniform(rng, 0.0, 1.0) < recipe.coverage);
  }

  // Scatter over facilities and periods. The scatter scale follows noise_sd,
  // so a noiseless recipe aggregates back to the latent value.
  auto scatter = rng_for(cfg.seed, kScatterStream, recipe_index);
  const double sigma = 0.5 * recipe.noise_sd;
  const int periods = period_count(recipe.cadence);
  std::map<std::string, double> share_total;
  std::vector<double> shares(facilities.size(), 1.0);
  if (recipe.kind == IndicatorKind::kCount) {
    std::gamma_distribution<double> gamma(2.0, 1.0);
    for (std::size_t f = 0; f < facilities.size(); ++f) {
      shares[f] = gamma(scatter);
      share_total[facilities[f].catchment_id] += shares[f];
    }
  }

  for (std::size_t f = 0; f < facilities.size(); ++f) {
    const Facility& fac = facilities[f];
    if (!covered.at(fac.catchment_id)) continue;
    const double latent = out.latent.at(fac.catchment_id);
    const double base_den = std::exp(std::log(150.0) + 0.5 * normal(scatter));
    const double facility_effect = std::exp(sigma * normal(scatter));
    const double share = recipe.kind == IndicatorKind::kCount
                             ? shares[f] / share_total.at(fac.catchment_id)
                             : 1.0;
    for (int t = 0; t < periods; ++t) {
      const double u_missing = uniform(scatter, 0.0, 1.0);
      const double u_zero = uniform(scatter, 0.0, 1.0);
      const double period_noise = normal(scatter);
      const double den_jitter = uniform(scatter, 0.75, 1.25);

      FacilityRow row;
      row.facility_id = fac.id;
      row.location = fac.location;
      row.indicator = recipe.name;
      row.period = t;
      if (u_missing < recipe.missing_rate) {
        out.rows.push_back(std::move(row));
        continue;
      }
      if (recipe.kind == IndicatorKind::kRate) {
        const double den = base_den * den_jitter;
        const double rate =
            sigma > 0.0 ? std::min(1.0, latent * facility_effect * std::exp(sigma * period_noise))
                        : latent;
        row.numerator = u_zero < recipe.zero_inflation ? 0.0 : rate * den;
        row.denominator = den;
      } else {
        const double mean = latent * share / periods;
        const double value =
            sigma > 0.0 ? mean * facility_effect * std::exp(sigma * period_noise - sigma * sigma)
                        : mean;
        row.numerator = u_zero < recipe.zero_inflation ? 0.0 : value;
      }
      out.rows.push_back(std::move(row));
    }
  }
  return out;
}

Dataset generate(const SynthConfig& cfg) {
  validate(cfg);
  Dataset data;
  data.catchments = gen_catchments(cfg);
  for (const auto s : {EmbeddingSource::kPdfm, EmbeddingSource::kAlphaEarth, EmbeddingSource::kCdr})
    data.embeddings.emplace(s, gen_embeddings(data.catchments, s, cfg));
  data.facilities = gen_facilities(data.catchments, cfg);
  for (std::size_t r = 0; r < cfg.recipes.size(); ++r) {
    auto target = gen_target(cfg.recipes[r], r, data.embeddings, data.catchments, data.facilities, cfg);
    data.rows.insert(data.rows.end(), std::make_move_iterator(target.rows.begin()),
                     std::make_move_iterator(target.rows.end()));
    for (const auto& [id, v] : target.latent) data.ground_truth.push_back({id, cfg.recipes[r].name, v});
  }
  return data;
}

void write_dataset(const Dataset& data, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  const std::filesystem::path root(dir);
  save_catchments((root / "catchments.geojson").string(), data.catchments);
  const std::pair<EmbeddingSource, const char*> files[] = {
      {EmbeddingSource::kPdfm, "embeddings_pdfm.csv"},
      {EmbeddingSource::kAlphaEarth, "embeddings_alphaearth.csv"},
      {EmbeddingSource::kCdr, "embeddings_cdr.csv"}};
  for (const auto& [source, name] : files) {
    const auto it = data.embeddings.find(source);
    if (it != data.embeddings.end()) save_embeddings((root / name).string(), it->second);
  }
  save_facilities((root / "facilities.csv").string(), data.rows);
  std::string gt = "catchment_id,target,latent_value\n";
  for (const auto& g : data.ground_truth)
    gt += g.catchment_id + ',' + g.target + ',' + text::format_double(g.latent_value) + '\n';
  text::write_file((root / "ground_truth.csv").string(), gt);
}

}  // namespace geofm::synth
