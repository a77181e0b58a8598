#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ldosim/analysis.hpp"
#include "ldosim/transient.hpp"

namespace ldosim {

struct Excursions {
    double undershootV = 0.0;  ///< max(0, target - min v)
    double overshootV = 0.0;   ///< max(0, max v - target)
};

Excursions excursions(std::span<const double> values, double targetV);
/// Throws StructuralError for an unknown label.
Excursions excursions(const TransientTrace& trace, const Circuit& circuit, const std::string& label, double targetV);

/// Time from fromTimeS until v stays within bandFrac*targetV of the target
/// for the rest of the record. The entry into the band is interpolated
/// linearly between samples. nullopt means the last sample is still outside.
std::optional<double> settling_time(std::span<const double> timesS, std::span<const double> values, double targetV,
                                    double bandFrac, double fromTimeS);
std::optional<double> settling_time(const TransientTrace& trace, const Circuit& circuit, const std::string& label,
                                    double targetV, double bandFrac, double fromTimeS);

/// C_load * dV / I_max. A zero excursion gives 0.
double response_time(double cLoadF, double deltaVoutV, double iLoadMaxA);
/// TR * I_Q / I_max.
double fom(double responseTimeS, double iqA, double iLoadMaxA);
/// I_load / (I_load + I_Q), as a fraction.
double current_efficiency(double iLoadA, double iqA);
/// Ratio of the decimal values the inputs print as, so (42e-6, 3e-6) gives
/// exactly 14 rather than the binary quotient 13.999999999999998.
double iq_reduction(double iqConventionalA, double iqDualA);

struct Band {
    double loHz;
    double hiHz;
};

struct PsrMargins {
    double worstDbLow;
    double worstDbWide;
};

/// Largest |PSR| in dB over each band, edges included. Throws ArgumentError
/// when a band is not covered by the sweep.
PsrMargins psr_margins(const FrequencyResponse& response, Band low = {1e3, 1e4}, Band wide = {1e3, 1e7});

struct MetricsReport {
    double undershootV = 0.0;
    double overshootV = 0.0;
    std::optional<double> settlingTimeS;
    double responseTimeS = 0.0;
    double fomS = 0.0;
    double currentEfficiency = 0.0;
    double psrWorstDbLow = 0.0;
    double psrWorstDbWide = 0.0;
    double iqReductionFactor = 1.0;

    /// Throws ArgumentError when an invariant does not hold.
    void check() const;
};

struct MetricRow {
    std::string name;
    std::optional<double> value;  ///< nullopt renders as "not-settled"
    std::string unit;
};

std::vector<MetricRow> rows(const MetricsReport& report);

/// `metric,value,unit`, values at 6 significant digits.
std::string to_csv(std::span<const MetricRow> rows);
/// Left-aligned name column, right-aligned values; same digits as the CSV.
std::string to_text_table(std::span<const MetricRow> rows);

}  // namespace ldosim
