#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace hydrossm {

/// The eight hydrologic signatures of one basin's observed flow.
struct SignatureSet {
    double q_mean = 0.0;       // mm/day
    double q5 = 0.0;           // mm/day, 5% flow quantile (low flow)
    double q95 = 0.0;          // mm/day, 95% flow quantile (high flow)
    double high_q_freq = 0.0;  // days/year, flow > 9x median
    double high_q_dur = 0.0;   // days, mean length of high-flow runs
    double low_q_freq = 0.0;   // days/year, flow < 0.2x mean
    double low_q_dur = 0.0;    // days, mean length of low-flow runs
    double zero_q_freq = 0.0;  // percent of days with zero flow
};

namespace signature_detail {

/// Linear-interpolation quantile on the sorted ascending copy
/// (position p*(n-1), the numpy default).
inline double quantile(std::vector<double> sorted_ascending, double p) {
    const std::size_t n = sorted_ascending.size();
    const double pos = p * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, n - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted_ascending[lo] * (1.0 - frac) + sorted_ascending[hi] * frac;
}

/// Mean length of maximal consecutive runs where flag holds; 0 when no runs.
inline double mean_run_length(const std::vector<bool>& flag) {
    std::size_t runs = 0, total = 0, current = 0;
    for (bool f : flag) {
        if (f) {
            ++current;
        } else if (current > 0) {
            ++runs;
            total += current;
            current = 0;
        }
    }
    if (current > 0) {
        ++runs;
        total += current;
    }
    return runs == 0 ? 0.0 : static_cast<double>(total) / static_cast<double>(runs);
}

}  // namespace signature_detail

/// Signatures over a daily discharge series (NaN = missing, dropped before
/// analysis; runs are measured over the remaining day sequence). Thresholds
/// come from the series' own median and mean; frequencies are
/// count * 365.25 / T days per year.
inline SignatureSet signatures(const std::vector<double>& discharge) {
    std::vector<double> q;
    q.reserve(discharge.size());
    for (double v : discharge)
        if (std::isfinite(v)) q.push_back(v);
    if (q.empty()) throw std::invalid_argument("signatures: series is all missing");
    if (q.size() < 365)
        throw std::invalid_argument("signatures: need at least 365 observed days, got " +
                                    std::to_string(q.size()));
    const auto T = static_cast<double>(q.size());

    std::vector<double> sorted = q;
    std::sort(sorted.begin(), sorted.end());

    SignatureSet s;
    s.q_mean = std::accumulate(q.begin(), q.end(), 0.0) / T;
    s.q5 = signature_detail::quantile(sorted, 0.05);
    s.q95 = signature_detail::quantile(sorted, 0.95);
    const double median = signature_detail::quantile(sorted, 0.5);

    std::vector<bool> high(q.size()), low(q.size());
    std::size_t n_high = 0, n_low = 0, n_zero = 0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        high[i] = q[i] > 9.0 * median;
        low[i] = q[i] < 0.2 * s.q_mean;
        n_high += high[i];
        n_low += low[i];
        n_zero += (q[i] == 0.0);
    }
    s.high_q_freq = static_cast<double>(n_high) * 365.25 / T;
    s.low_q_freq = static_cast<double>(n_low) * 365.25 / T;
    s.high_q_dur = signature_detail::mean_run_length(high);
    s.low_q_dur = signature_detail::mean_run_length(low);
    s.zero_q_freq = 100.0 * static_cast<double>(n_zero) / T;
    return s;
}

inline const std::vector<std::string>& signature_names() {
    static const std::vector<std::string> names{"q_mean",      "q5",         "q95",
                                                "high_q_freq", "high_q_dur", "low_q_freq",
                                                "low_q_dur",   "zero_q_freq"};
    return names;
}

inline double signature_value(const SignatureSet& s, std::size_t i) {
    switch (i) {
        case 0: return s.q_mean;
        case 1: return s.q5;
        case 2: return s.q95;
        case 3: return s.high_q_freq;
        case 4: return s.high_q_dur;
        case 5: return s.low_q_freq;
        case 6: return s.low_q_dur;
        case 7: return s.zero_q_freq;
    }
    throw std::out_of_range("signature_value: index " + std::to_string(i));
}

}  // namespace hydrossm
