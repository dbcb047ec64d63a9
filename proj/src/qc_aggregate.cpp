#include "geofm/qc_aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "geofm/errors.hpp"
#include "geofm/text.hpp"

namespace geofm {

int period_count(Cadence cadence) noexcept {
  return cadence == Cadence::kMonthly ? kMonthlyPeriods : kQuarterlyPeriods;
}

int max_missing(Cadence cadence) noexcept { return cadence == Cadence::kMonthly ? 23 : 7; }

std::string_view to_string(IndicatorKind kind) noexcept {
  return kind == IndicatorKind::kRate ? "RATE" : "COUNT";
}

std::string_view to_string(Cadence cadence) noexcept {
  return cadence == Cadence::kMonthly ? "MONTHLY" : "QUARTERLY";
}

IndicatorKind parse_kind(std::string_view text) {
  if (text == "RATE" || text == "rate") return IndicatorKind::kRate;
  if (text == "COUNT" || text == "count") return IndicatorKind::kCount;
  throw ContractError("unknown indicator kind: " + std::string(text));
}

Cadence parse_cadence(std::string_view text) {
  if (text == "MONTHLY" || text == "monthly") return Cadence::kMonthly;
  if (text == "QUARTERLY" || text == "quarterly") return Cadence::kQuarterly;
  throw ContractError("unknown cadence: " + std::string(text));
}

std::string_view to_string(QCReason reason) noexcept {
  switch (reason) {
    case QCReason::kNone: return "NONE";
    case QCReason::kTooMissing: return "TOO_MISSING";
    case QCReason::kTooManyZeros: return "TOO_MANY_ZEROS";
  }
  return "NONE";
}

namespace {

struct Counts {
  int missing = 0;
  int present = 0;
  int zeros = 0;
};

Counts count(const Series& series) {
  Counts c;
  for (const auto& v : series) {
    if (!v) {
      ++c.missing;
      continue;
    }
    ++c.present;
    if (*v == 0.0) ++c.zeros;
  }
  return c;
}

}  // namespace

QCOutcome missingness_filter(const Series& series, Cadence cadence) {
  if (static_cast<int>(series.size()) != period_count(cadence))
    throw ContractError("series has " + std::to_string(series.size()) + " periods, expected " +
                        std::to_string(period_count(cadence)));
  const Counts c = count(series);
  QCOutcome out;
  out.missing_count = c.missing;
  out.zero_fraction = c.present > 0 ? static_cast<double>(c.zeros) / c.present : 0.0;
  if (c.missing > max_missing(cadence)) {
    out.kept = false;
    out.reason = QCReason::kTooMissing;
  }
  return out;
}

QCOutcome zero_filter(const Series& series) {
  const Counts c = count(series);
  if (c.present == 0) throw ContractError("zero_filter: every period is missing");
  QCOutcome out;
  out.missing_count = c.missing;
  out.zero_fraction = static_cast<double>(c.zeros) / c.present;
  // Integer comparison keeps the 75% boundary exact.
  if (4 * c.zeros >= 3 * c.present) {
    out.kept = false;
    out.reason = QCReason::kTooManyZeros;
  }
  return out;
}

double reduce_time(const Series& series, IndicatorKind kind) {
  double sum = 0.0;
  int present = 0;
  for (const auto& v : series) {
    if (!v) continue;
    sum += *v;
    ++present;
  }
  if (present == 0) throw ContractError("reduce_time: no present values");
  return kind == IndicatorKind::kRate ? sum / present : sum;
}

double aggregate_catchment(std::span<const FacilityAggregate> facilities, IndicatorKind kind,
                           AggregationMode mode) {
  if (facilities.empty()) throw ContractError("aggregate_catchment: no facilities");
  if (kind == IndicatorKind::kCount) {
    double sum = 0.0;
    for (const auto& f : facilities) sum += f.numerator;
    return sum;
  }
  if (mode == AggregationMode::kEqualWeight) {
    double acc = 0.0;
    for (const auto& f : facilities) {
      if (!(f.denominator > 0.0)) throw UndefinedRate("facility rate with zero denominator");
      acc += f.numerator / f.denominator;
    }
    return acc / static_cast<double>(facilities.size());
  }
  double num = 0.0, den = 0.0;
  for (const auto& f : facilities) {
    num += f.numerator;
    den += f.denominator;
  }
  if (den == 0.0) throw UndefinedRate("catchment rate with zero total denominator");
  return num / den;
}

double transform(double value, IndicatorKind kind) {
  if (kind == IndicatorKind::kRate) return value;
  if (value < 0.0) throw ContractError("negative count cannot be log-transformed");
  return std::log1p(value);
}

double inverse_transform(double value, IndicatorKind kind) noexcept {
  return kind == IndicatorKind::kRate ? value : std::expm1(value);
}

IndicatorTarget build_target(const IndicatorSpec& spec, std::span<const FacilitySeries> facilities,
                             AggregationMode mode, std::vector<QCOutcome>* audit) {
  const bool rate = spec.kind == IndicatorKind::kRate;
  const auto periods = static_cast<std::size_t>(period_count(spec.cadence));
  std::map<std::string, std::vector<FacilityAggregate>> by_catchment;

  for (const auto& f : facilities) {
    if (f.numerator.size() != periods || (rate && f.denominator.size() != periods))
      throw ContractError("facility " + f.facility_id + " series length does not match cadence");

    // A rate period counts only when both parts are reported and the
    // denominator is positive.
    Series num = f.numerator;
    Series den = rate ? f.denominator : Series{};
    if (rate) {
      for (std::size_t t = 0; t < periods; ++t) {
        if (!num[t] || !den[t] || !(*den[t] > 0.0)) {
          num[t].reset();
          den[t].reset();
        }
      }
    }

    QCOutcome outcome = missingness_filter(num, spec.cadence);
    if (outcome.kept) outcome = zero_filter(num);
    outcome.facility_id = f.facility_id;
    outcome.indicator = spec.name;
    if (audit) audit->push_back(outcome);
    if (!outcome.kept) continue;

    FacilityAggregate agg;
    agg.numerator = reduce_time(num, spec.kind);
    if (rate) agg.denominator = reduce_time(den, spec.kind);
    by_catchment[f.catchment_id].push_back(agg);
  }

  IndicatorTarget target;
  target.indicator = spec;
  for (const auto& [id, aggs] : by_catchment) {
    const double v = aggregate_catchment(aggs, spec.kind, mode);
    if (std::isfinite(v)) target.values.emplace(id, v);
  }
  return target;
}

void write_qc_audit(const std::string& path, std::span<const QCOutcome> outcomes) {
  std::ostringstream out;
  out << "facility_id,indicator,kept,reason,missing_count,zero_fraction\n";
  for (const auto& o : outcomes) {
    out << o.facility_id << ',' << o.indicator << ',' << (o.kept ? "true" : "false") << ','
        << to_string(o.reason) << ',' << o.missing_count << ','
        << text::format_double(o.zero_fraction) << '\n';
  }
  text::write_file(path, out.str());
}

}  // namespace geofm
