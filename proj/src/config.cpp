#include "geofm/config.hpp"

#include <algorithm>
#include <filesystem>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "geofm/errors.hpp"
#include "geofm/text.hpp"

namespace geofm {

namespace pt = boost::property_tree;

namespace {

pt::ptree read_ini(const std::string& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path);
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(path, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(path + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  return tree;
}

class Section {
 public:
  Section(const std::string& path, std::string name, const pt::ptree* tree)
      : path_(path), name_(std::move(name)), tree_(tree) {}

  bool has(const std::string& key) const { return tree_ && tree_->find(key) != tree_->not_found(); }

  std::string str(const std::string& key) const {
    used_.insert(key);
    return std::string(text::trim(tree_->get<std::string>(key)));
  }

  double number(const std::string& key) const {
    const auto v = text::parse_double(str(key));
    if (!v) fail(key, "expected a number");
    return *v;
  }

  long long integer(const std::string& key) const {
    const auto v = text::parse_int(str(key));
    if (!v) fail(key, "expected an integer");
    return *v;
  }

  template <typename T, typename Parse>
  std::vector<T> list(const std::string& key, Parse&& parse) const {
    std::vector<T> out;
    const std::string raw = str(key);
    for (auto field : text::split_csv(raw)) {
      const auto v = parse(field);
      if (!v) fail(key, "bad list element '" + std::string(field) + "'");
      out.push_back(static_cast<T>(*v));
    }
    return out;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError(path_ + ": [" + name_ + "] " + key + ": " + what);
  }

  void reject_unknown() const {
    if (!tree_) return;
    for (const auto& [key, value] : *tree_)
      if (!used_.contains(key)) fail(key, "unknown key");
  }

  const pt::ptree* tree() const { return tree_; }

 private:
  std::string path_;
  std::string name_;
  const pt::ptree* tree_;
  mutable std::set<std::string> used_;
};

Section section(const std::string& path, const pt::ptree& root, const std::string& name) {
  const auto it = root.find(name);
  return Section(path, name, it == root.not_found() ? nullptr : &it->second);
}

std::vector<std::string> echo_lines(const pt::ptree& root) {
  std::vector<std::string> out;
  for (const auto& [sec, body] : root)
    for (const auto& [key, value] : body)
      out.push_back(sec + "." + key + " = " + std::string(text::trim(value.data())));
  return out;
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  const pt::ptree root = read_ini(path);
  const std::set<std::string> known{"data", "split", "grid", "baselines", "qc", "indicators",
                                    "synth"};
  for (const auto& [name, body] : root)
    if (!known.contains(name)) throw ConfigError(path + ": unknown section [" + name + "]");

  RunConfig cfg;
  cfg.options.config_echo = echo_lines(root);

  const Section data = section(path, root, "data");
  if (!data.tree()) throw ConfigError(path + ": missing [data] section");
  if (!data.has("catchments")) data.fail("catchments", "required");
  if (!data.has("facilities")) data.fail("facilities", "required");
  cfg.data.catchments = data.str("catchments");
  cfg.data.facilities = data.str("facilities");
  const std::pair<const char*, EmbeddingSource> sources[] = {
      {"pdfm", EmbeddingSource::kPdfm},
      {"alphaearth", EmbeddingSource::kAlphaEarth},
      {"cdr", EmbeddingSource::kCdr}};
  for (const auto& [key, source] : sources)
    if (data.has(key)) cfg.data.embeddings.emplace(source, data.str(key));
  data.reject_unknown();

  const Section split = section(path, root, "split");
  if (!split.has("seed")) throw ConfigError(path + ": [split] seed is required");
  const long long seed = split.integer("seed");
  if (seed < 0) split.fail("seed", "must be >= 0");
  cfg.options.seed = static_cast<std::uint64_t>(seed);
  if (split.has("test_fraction")) cfg.options.test_fraction = split.number("test_fraction");
  if (split.has("n_folds")) cfg.options.n_folds = static_cast<int>(split.integer("n_folds"));
  if (split.has("fold_mode")) {
    const std::string mode = split.str("fold_mode");
    if (mode == "random")
      cfg.options.fold_mode = FoldMode::kRandom;
    else if (mode == "geographic")
      cfg.options.fold_mode = FoldMode::kGeographic;
    else
      split.fail("fold_mode", "expected random or geographic");
  }
  if (!(cfg.options.test_fraction > 0.0 && cfg.options.test_fraction < 1.0))
    split.fail("test_fraction", "must be in (0, 1)");
  if (cfg.options.n_folds < 2) split.fail("n_folds", "must be >= 2");
  split.reject_unknown();

  const Section grid = section(path, root, "grid");
  if (grid.has("learning_rates"))
    cfg.options.grid.learning_rates = grid.list<double>("learning_rates", text::parse_double);
  if (grid.has("max_depths"))
    cfg.options.grid.max_depths = grid.list<int>("max_depths", text::parse_int);
  if (grid.has("n_rounds")) cfg.options.grid.n_rounds = grid.list<int>("n_rounds", text::parse_int);
  grid.reject_unknown();
  try {
    validate(cfg.options.grid);
  } catch (const ContractError& e) {
    throw ConfigError(path + ": [grid] " + e.what());
  }

  const Section base = section(path, root, "baselines");
  if (base.has("idw_power")) cfg.options.baselines.idw_power = base.number("idw_power");
  if (base.has("idw_k")) cfg.options.baselines.idw_k = static_cast<int>(base.integer("idw_k"));
  if (base.has("variogram_bins"))
    cfg.options.baselines.variogram_bins = static_cast<int>(base.integer("variogram_bins"));
  if (base.has("distance")) {
    const std::string d = base.str("distance");
    if (d == "haversine")
      cfg.options.baselines.metric = DistanceMetric::kHaversine;
    else if (d == "planar")
      cfg.options.baselines.metric = DistanceMetric::kPlanarDegrees;
    else
      base.fail("distance", "expected haversine or planar");
  }
  if (!(cfg.options.baselines.idw_power > 0.0)) base.fail("idw_power", "must be > 0");
  if (cfg.options.baselines.idw_k < 1) base.fail("idw_k", "must be >= 1");
  if (cfg.options.baselines.variogram_bins < 1) base.fail("variogram_bins", "must be >= 1");
  base.reject_unknown();

  const Section qc = section(path, root, "qc");
  if (qc.has("aggregation")) {
    const std::string a = qc.str("aggregation");
    if (a == "pooled")
      cfg.aggregation = AggregationMode::kPooled;
    else if (a == "equal_weight")
      cfg.aggregation = AggregationMode::kEqualWeight;
    else
      qc.fail("aggregation", "expected pooled or equal_weight");
  }
  qc.reject_unknown();

  const Section ind = section(path, root, "indicators");
  if (ind.tree()) {
    for (const auto& [name, value] : *ind.tree()) {
      const std::string raw = ind.str(name);
      const auto parts = text::split_csv(raw);
      if (parts.size() != 2) ind.fail(name, "expected KIND,CADENCE");
      try {
        cfg.indicators.emplace(name, IndicatorSpec{name, parse_kind(text::trim(parts[0])),
                                                   parse_cadence(text::trim(parts[1]))});
      } catch (const ContractError& e) {
        ind.fail(name, e.what());
      }
    }
  }
  return cfg;
}

synth::SynthConfig load_synth_config(const std::string& path) {
  const pt::ptree root = read_ini(path);
  synth::SynthConfig cfg;
  const Section s = section(path, root, "synth");
  if (!s.tree()) return cfg;
  if (s.has("seed")) {
    const long long seed = s.integer("seed");
    if (seed < 0) s.fail("seed", "must be >= 0");
    cfg.seed = static_cast<std::uint64_t>(seed);
  }
  if (s.has("n_catchments")) cfg.n_catchments = static_cast<int>(s.integer("n_catchments"));
  if (s.has("min_lon")) cfg.extent.min_lon = s.number("min_lon");
  if (s.has("min_lat")) cfg.extent.min_lat = s.number("min_lat");
  if (s.has("max_lon")) cfg.extent.max_lon = s.number("max_lon");
  if (s.has("max_lat")) cfg.extent.max_lat = s.number("max_lat");
  if (s.has("min_facilities")) cfg.min_facilities = static_cast<int>(s.integer("min_facilities"));
  if (s.has("max_facilities")) cfg.max_facilities = static_cast<int>(s.integer("max_facilities"));
  if (s.has("targets")) {
    std::vector<synth::TargetRecipe> chosen;
    const std::string raw = s.str("targets");
    for (auto name : text::split_csv(raw)) {
      name = text::trim(name);
      const auto it = std::find_if(cfg.recipes.begin(), cfg.recipes.end(),
                                   [&](const synth::TargetRecipe& r) { return r.name == name; });
      if (it == cfg.recipes.end()) s.fail("targets", "unknown target " + std::string(name));
      chosen.push_back(*it);
    }
    cfg.recipes = std::move(chosen);
  }
  s.reject_unknown();
  try {
    synth::validate(cfg);
  } catch (const ContractError& e) {
    throw ConfigError(path + ": [synth] " + e.what());
  }
  return cfg;
}

std::vector<IndicatorSpec> infer_indicators(const std::vector<FacilityRow>& rows,
                                            const std::map<std::string, IndicatorSpec>& overrides) {
  struct Seen {
    bool denominator = false;
    int max_period = 0;
  };
  std::map<std::string, Seen> seen;
  for (const auto& r : rows) {
    Seen& s = seen[r.indicator];
    s.denominator = s.denominator || r.denominator.has_value();
    s.max_period = std::max(s.max_period, r.period);
  }
  std::vector<IndicatorSpec> out;
  for (const auto& [name, s] : seen) {
    const auto it = overrides.find(name);
    if (it != overrides.end()) {
      out.push_back(it->second);
      continue;
    }
    out.push_back({name, s.denominator ? IndicatorKind::kRate : IndicatorKind::kCount,
                   s.max_period >= kQuarterlyPeriods ? Cadence::kMonthly : Cadence::kQuarterly});
  }
  for (const auto& [name, spec] : overrides)
    if (!seen.contains(name)) throw ConfigError("indicator " + name + " has no facility rows");
  return out;
}

}  // namespace geofm
