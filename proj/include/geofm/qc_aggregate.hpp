#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace geofm {

enum class IndicatorKind { kRate, kCount };
enum class Cadence { kMonthly, kQuarterly };

inline constexpr int kMonthlyPeriods = 29;
inline constexpr int kQuarterlyPeriods = 10;

int period_count(Cadence cadence) noexcept;
/// Largest missing count that still passes the missingness filter.
int max_missing(Cadence cadence) noexcept;

std::string_view to_string(IndicatorKind kind) noexcept;
std::string_view to_string(Cadence cadence) noexcept;
IndicatorKind parse_kind(std::string_view text);
Cadence parse_cadence(std::string_view text);

struct IndicatorSpec {
  std::string name;
  IndicatorKind kind = IndicatorKind::kRate;
  Cadence cadence = Cadence::kMonthly;

  friend bool operator==(const IndicatorSpec&, const IndicatorSpec&) = default;
};

enum class QCReason { kNone, kTooMissing, kTooManyZeros };
std::string_view to_string(QCReason reason) noexcept;

struct QCOutcome {
  std::string facility_id;
  std::string indicator;
  bool kept = true;
  QCReason reason = QCReason::kNone;
  int missing_count = 0;
  double zero_fraction = 0.0;
};

/// One slot per period; nullopt marks a missing report.
using Series = std::vector<std::optional<double>>;

/// Kept iff the number of missing periods is at most 23 of 29 (monthly) or
/// 7 of 10 (quarterly). Throws ContractError on a wrong series length.
QCOutcome missingness_filter(const Series& series, Cadence cadence);

/// Kept iff zeros make up less than 75% of the non-missing values.
/// Throws ContractError when every value is missing.
QCOutcome zero_filter(const Series& series);

/// Mean of present values for RATE, sum for COUNT.
double reduce_time(const Series& series, IndicatorKind kind);

struct FacilityAggregate {
  double numerator = 0.0;
  double denominator = 0.0;  // ignored for COUNT
};

enum class AggregationMode { kPooled, kEqualWeight };

/// RATE: sum(num) / sum(den) when pooled, mean of facility ratios when
/// equal-weight. COUNT: sum of numerators. Throws UndefinedRate when a rate has
/// zero total denominator and ContractError on an empty input.
double aggregate_catchment(std::span<const FacilityAggregate> facilities, IndicatorKind kind,
                           AggregationMode mode = AggregationMode::kPooled);

enum class TransformState { kNone, kLog1p };

/// log1p for COUNT, identity for RATE. Throws ContractError on a negative count.
double transform(double value, IndicatorKind kind);
double inverse_transform(double value, IndicatorKind kind) noexcept;

struct IndicatorTarget {
  IndicatorSpec indicator;
  std::map<std::string, double> values;  // catchment_id -> value
  TransformState transform = TransformState::kNone;

  std::size_t n_catchments() const noexcept { return values.size(); }
};

/// Raw facility observations of one indicator, already joined to catchments.
struct FacilitySeries {
  std::string facility_id;
  std::string catchment_id;
  Series numerator;
  Series denominator;  // empty for COUNT
};

/// Runs both filters in order, reduces each kept facility over time and
/// aggregates per catchment. Catchments with no kept facility are omitted.
/// Every facility gets one entry in `audit` when it is non-null.
IndicatorTarget build_target(const IndicatorSpec& spec, std::span<const FacilitySeries> facilities,
                             AggregationMode mode = AggregationMode::kPooled,
                             std::vector<QCOutcome>* audit = nullptr);

/// `facility_id,indicator,kept,reason,missing_count,zero_fraction`
void write_qc_audit(const std::string& path, std::span<const QCOutcome> outcomes);

}  // namespace geofm
