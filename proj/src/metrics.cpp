#include "ldosim/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>

#include "ldosim/errors.hpp"
#include "ldosim/units.hpp"

namespace ldosim {

namespace {

constexpr int kDigits = 6;

void require_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ArgumentError(std::string(name) + " must be > 0");
}

std::string render(const std::optional<double>& v) { return v ? format_sci(*v, kDigits) : "not-settled"; }

}  // namespace

Excursions excursions(std::span<const double> values, double targetV) {
    if (values.empty()) throw ArgumentError("excursions need at least one sample");
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    return {std::max(0.0, targetV - *lo), std::max(0.0, *hi - targetV)};
}

Excursions excursions(const TransientTrace& trace, const Circuit& circuit, const std::string& label, double targetV) {
    return excursions(series(trace, circuit, label), targetV);
}

std::optional<double> settling_time(std::span<const double> t, std::span<const double> v, double targetV,
                                    double bandFrac, double fromTimeS) {
    if (t.size() != v.size() || t.empty()) throw ArgumentError("time and value series must be non-empty and equal length");
    if (!(bandFrac > 0.0 && bandFrac <= 0.1)) throw ArgumentError("band fraction must be in (0, 0.1]");
    if (!(fromTimeS >= t.front() && fromTimeS <= t.back())) throw ArgumentError("fromTimeS lies outside the trace");

    const double band = bandFrac * std::abs(targetV);
    auto outside = [&](std::size_t i) { return std::abs(v[i] - targetV) > band; };
    if (outside(v.size() - 1)) return std::nullopt;

    std::size_t first = std::lower_bound(t.begin(), t.end(), fromTimeS) - t.begin();
    std::size_t last = v.size();  // last out-of-band sample at or after `first`
    for (std::size_t i = v.size(); i-- > first;)
        if (outside(i)) {
            last = i;
            break;
        }
    if (last == v.size()) return 0.0;

    // Entry point between sample `last` (outside) and `last + 1` (inside).
    const double e0 = std::abs(v[last] - targetV) - band;
    const double e1 = std::abs(v[last + 1] - targetV) - band;
    const double frac = e0 == e1 ? 1.0 : e0 / (e0 - e1);
    const double tStar = t[last] + std::clamp(frac, 0.0, 1.0) * (t[last + 1] - t[last]);
    return std::max(0.0, tStar - fromTimeS);
}

std::optional<double> settling_time(const TransientTrace& trace, const Circuit& circuit, const std::string& label,
                                    double targetV, double bandFrac, double fromTimeS) {
    return settling_time(trace.timesS, series(trace, circuit, label), targetV, bandFrac, fromTimeS);
}

double response_time(double cLoadF, double deltaVoutV, double iLoadMaxA) {
    require_positive(cLoadF, "load capacitance");
    require_positive(iLoadMaxA, "maximum load current");
    if (deltaVoutV == 0.0) return 0.0;
    require_positive(deltaVoutV, "output excursion");
    return cLoadF * deltaVoutV / iLoadMaxA;
}

double fom(double responseTimeS, double iqA, double iLoadMaxA) {
    require_positive(responseTimeS, "response time");
    require_positive(iLoadMaxA, "maximum load current");
    if (!(iqA >= 0.0)) throw ArgumentError("quiescent current must be >= 0");
    return responseTimeS * iqA / iLoadMaxA;
}

double current_efficiency(double iLoadA, double iqA) {
    require_positive(iqA, "quiescent current");
    if (!(iLoadA >= 0.0)) throw ArgumentError("load current must be >= 0");
    return iLoadA / (iLoadA + iqA);
}

namespace {

struct DecimalValue {
    std::uint64_t mantissa;
    int exponent;
};

/// Shortest round-trip decimal form of a positive double, when its digits fit
/// in a double mantissa exactly.
std::optional<DecimalValue> shortest_decimal(double v) {
    char buf[40];
    const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::scientific);
    const std::string_view text(buf, static_cast<std::size_t>(r.ptr - buf));
    const auto e = text.find('e');
    std::uint64_t mantissa = 0;
    int fractionDigits = 0;
    bool afterPoint = false;
    for (char c : text.substr(0, e)) {
        if (c == '.') {
            afterPoint = true;
            continue;
        }
        mantissa = mantissa * 10 + static_cast<std::uint64_t>(c - '0');
        fractionDigits += afterPoint ? 1 : 0;
    }
    if (mantissa > (std::uint64_t{1} << 53)) return std::nullopt;
    int exponent = 0;
    std::from_chars(text.data() + e + 1 + (text[e + 1] == '+' ? 1 : 0), text.data() + text.size(), exponent);
    return DecimalValue{mantissa, exponent - fractionDigits};
}

}  // namespace

double iq_reduction(double iqConventionalA, double iqDualA) {
    require_positive(iqConventionalA, "conventional quiescent current");
    require_positive(iqDualA, "dual-mode quiescent current");
    // 42e-6 / 3e-6 is 13.999999999999998 in binary; dividing the decimal
    // mantissas gives the 14 the inputs denote.
    const auto a = shortest_decimal(iqConventionalA);
    const auto b = shortest_decimal(iqDualA);
    if (!a || !b) return iqConventionalA / iqDualA;
    const double ratio = static_cast<double>(a->mantissa) / static_cast<double>(b->mantissa);
    const int shift = a->exponent - b->exponent;
    if (shift == 0) return ratio;
    const double scale = std::pow(10.0, std::abs(shift));
    return shift > 0 ? ratio * scale : ratio / scale;
}

PsrMargins psr_margins(const FrequencyResponse& response, Band low, Band wide) {
    if (response.size() == 0) throw ArgumentError("empty PSR response");
    const double fMin = response.freqsHz.front();
    const double fMax = response.freqsHz.back();
    const auto mag = response.magnitude_db();
    auto worst = [&](Band b, const char* name) {
        if (!(b.loHz <= b.hiHz)) throw ArgumentError(std::string(name) + " band is inverted");
        constexpr double slack = 1e-9;
        if (b.loHz < fMin * (1 - slack) || b.hiHz > fMax * (1 + slack))
            throw ArgumentError(std::string(name) + " band [" + format_sci(b.loHz, 4) + ", " + format_sci(b.hiHz, 4) +
                                "] Hz is outside the sweep [" + format_sci(fMin, 4) + ", " + format_sci(fMax, 4) + "] Hz");
        double w = -HUGE_VAL;
        bool any = false;
        for (std::size_t i = 0; i < response.size(); ++i) {
            const double f = response.freqsHz[i];
            if (f >= b.loHz * (1 - slack) && f <= b.hiHz * (1 + slack)) {
                w = std::max(w, mag[i]);
                any = true;
            }
        }
        if (!any) throw ArgumentError(std::string(name) + " band contains no sweep point");
        return w;
    };
    return {worst(low, "low"), worst(wide, "wide")};
}

void MetricsReport::check() const {
    if (!(undershootV >= 0.0 && overshootV >= 0.0)) throw ArgumentError("excursions must be >= 0");
    if (!(currentEfficiency >= 0.0 && currentEfficiency < 1.0)) throw ArgumentError("current efficiency must be in [0, 1)");
    if (settlingTimeS && !(*settlingTimeS >= 0.0)) throw ArgumentError("settling time must be >= 0");
}

std::vector<MetricRow> rows(const MetricsReport& r) {
    return {
        {"undershoot", r.undershootV, "V"},
        {"overshoot", r.overshootV, "V"},
        {"settling_time", r.settlingTimeS, "s"},
        {"response_time", r.responseTimeS, "s"},
        {"fom", r.fomS, "s"},
        {"current_efficiency", r.currentEfficiency, "1"},
        {"psr_worst_low_band", r.psrWorstDbLow, "dB"},
        {"psr_worst_wide_band", r.psrWorstDbWide, "dB"},
        {"iq_reduction", r.iqReductionFactor, "1"},
    };
}

std::string to_csv(std::span<const MetricRow> rs) {
    std::string out = "metric,value,unit\n";
    for (const auto& r : rs) out += r.name + ',' + render(r.value) + ',' + r.unit + '\n';
    return out;
}

std::string to_text_table(std::span<const MetricRow> rs) {
    std::size_t wName = 6, wValue = 5;
    for (const auto& r : rs) {
        wName = std::max(wName, r.name.size());
        wValue = std::max(wValue, render(r.value).size());
    }
    auto line = [&](const std::string& a, const std::string& b, const std::string& c) {
        std::string s = a + std::string(wName - a.size() + 2, ' ') + std::string(wValue - b.size(), ' ') + b + "  " + c;
        while (!s.empty() && s.back() == ' ') s.pop_back();
        return s + '\n';
    };
    std::string out = line("metric", "value", "unit");
    out += std::string(wName + 2 + wValue + 6, '-') + '\n';
    for (const auto& r : rs) out += line(r.name, render(r.value), r.unit);
    return out;
}

}  // namespace ldosim
