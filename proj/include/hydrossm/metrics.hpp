#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace hydrossm {

/// The six evaluation statistics for one (basin, member) pair. FHV, FLV and
/// PBias are in percent units.
struct MetricReport {
    std::string basin_id;
    int member = 0;
    double nse = 0.0;
    double kge = 0.0;
    double pearson_r = 0.0;
    double fhv = 0.0;
    double flv = 0.0;
    double pbias = 0.0;
};

namespace metrics_detail {

inline constexpr double kLogFloor = 1e-6;  // mm/day floor before logs

inline double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    const double ma = mean_of(a), mb = mean_of(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

/// Flow duration curve: values sorted descending; rank i (1-based) has
/// exceedance probability i/(n+1).
inline std::vector<double> fdc(const std::vector<double>& q) {
    std::vector<double> s = q;
    std::sort(s.begin(), s.end(), std::greater<>());
    return s;
}

inline std::size_t high_segment_count(std::size_t n) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(0.02 * double(n))));
}

/// First 1-based rank of the 0.7-1.0 exceedance segment.
inline std::size_t low_segment_start(std::size_t n) {
    const auto start = static_cast<std::size_t>(std::ceil(0.7 * double(n + 1)));
    return std::min<std::size_t>(std::max<std::size_t>(start, 1), n);
}

}  // namespace metrics_detail

/// All six Table-style statistics over date-aligned observation/simulation
/// pairs. Both series must already be restricted to paired, finite days.
inline MetricReport metric_suite(const std::vector<double>& obs, const std::vector<double>& sim,
                                 std::string basin_id = "", int member = 0) {
    using namespace metrics_detail;
    if (obs.size() != sim.size())
        throw std::invalid_argument("metric_suite: length mismatch " +
                                    std::to_string(obs.size()) + " vs " +
                                    std::to_string(sim.size()));
    const std::size_t n = obs.size();
    if (n < 2) throw std::invalid_argument("metric_suite: need at least 2 paired days");
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(obs[i]) || !std::isfinite(sim[i]))
            throw std::invalid_argument("metric_suite: non-finite value at index " +
                                        std::to_string(i));

    const double obs_mean = mean_of(obs);
    double obs_var = 0.0;
    for (double v : obs) obs_var += (v - obs_mean) * (v - obs_mean);
    if (obs_var == 0.0)
        throw std::invalid_argument("metric_suite: constant observations make Pearson-r/NSE "
                                    "degenerate" +
                                    (basin_id.empty() ? "" : " (basin " + basin_id + ")"));
    if (obs_mean == 0.0)
        throw std::invalid_argument("metric_suite: zero-mean observations make KGE degenerate");

    MetricReport r;
    r.basin_id = std::move(basin_id);
    r.member = member;

    r.pearson_r = pearson(sim, obs);

    double sq_err = 0.0;
    for (std::size_t i = 0; i < n; ++i) sq_err += (obs[i] - sim[i]) * (obs[i] - sim[i]);
    r.nse = 1.0 - sq_err / obs_var;

    const double sim_mean = mean_of(sim);
    double sim_var = 0.0;
    for (double v : sim) sim_var += (v - sim_mean) * (v - sim_mean);
    const double sd_obs = std::sqrt(obs_var / double(n));
    const double sd_sim = std::sqrt(sim_var / double(n));
    const double cc = r.pearson_r;
    r.kge = 1.0 - std::sqrt((cc - 1.0) * (cc - 1.0) +
                            (sim_mean / obs_mean - 1.0) * (sim_mean / obs_mean - 1.0) +
                            (sd_sim / sd_obs - 1.0) * (sd_sim / sd_obs - 1.0));

    // high-segment volume bias over the top 2% of each flow duration curve
    const auto obs_fdc = fdc(obs);
    const auto sim_fdc = fdc(sim);
    const std::size_t H = high_segment_count(n);
    double sim_high = 0.0, obs_high = 0.0;
    for (std::size_t i = 0; i < H; ++i) {
        sim_high += sim_fdc[i];
        obs_high += obs_fdc[i];
    }
    r.fhv = 100.0 * (sim_high - obs_high) / obs_high;

    // low-segment log-volume bias over the 0.7-1.0 exceedance range
    const std::size_t start = low_segment_start(n) - 1;  // 0-based
    double sim_lv = 0.0, obs_lv = 0.0;
    const double sim_min = std::max(sim_fdc[n - 1], kLogFloor);
    const double obs_min = std::max(obs_fdc[n - 1], kLogFloor);
    for (std::size_t i = start; i < n; ++i) {
        sim_lv += std::log(std::max(sim_fdc[i], kLogFloor)) - std::log(sim_min);
        obs_lv += std::log(std::max(obs_fdc[i], kLogFloor)) - std::log(obs_min);
    }
    r.flv = obs_lv == 0.0 ? 0.0 : -100.0 * (sim_lv - obs_lv) / obs_lv;

    const double obs_sum = std::accumulate(obs.begin(), obs.end(), 0.0);
    const double sim_sum = std::accumulate(sim.begin(), sim.end(), 0.0);
    r.pbias = 100.0 * (sim_sum - obs_sum) / obs_sum;
    return r;
}

/// (metric_model - metric_ref) / (1 - metric_ref); serves NSE and KGE.
inline double skill_score(double metric_model, double metric_ref) {
    if (metric_ref == 1.0)
        throw std::invalid_argument("skill_score: reference metric of 1 leaves no headroom");
    return (metric_model - metric_ref) / (1.0 - metric_ref);
}

struct Improvements {
    double fhv = 0.0;
    double pearson_r = 0.0;
    double pbias = 0.0;
};

/// The three tabulated improvement formulas, model relative to reference.
/// The FHV formula subtracts 1 from the percent values exactly as tabulated;
/// corrected_fhv switches to (|FHV_ref| - |FHV_model|)/100 instead.
inline Improvements improvements(const MetricReport& model, const MetricReport& ref,
                                 bool corrected_fhv = false) {
    if (model.basin_id != ref.basin_id)
        throw std::invalid_argument("improvements: basin mismatch '" + model.basin_id +
                                    "' vs '" + ref.basin_id + "'");
    Improvements imp;
    imp.fhv = corrected_fhv
                  ? (std::abs(ref.fhv) - std::abs(model.fhv)) / 100.0
                  : (std::abs(ref.fhv - 1.0) - std::abs(model.fhv - 1.0)) / 100.0;
    imp.pearson_r = std::abs(ref.pearson_r - 1.0) - std::abs(model.pearson_r - 1.0);
    imp.pbias = (std::abs(ref.pbias) - std::abs(model.pbias)) / 100.0;
    return imp;
}

}  // namespace hydrossm
