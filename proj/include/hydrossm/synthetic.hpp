#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hydrossm/csv.hpp"
#include "hydrossm/dataset.hpp"
#include "hydrossm/random.hpp"

namespace hydrossm {

/// Two-bucket linear-reservoir watershed generator.
///
/// Daily precipitation is drawn from a seasonal wet/dry chain; discharge is
/// the response of two linear reservoirs (quick and slow) with fixed
/// recession coefficients:
///
///   g[l] = frac_quick * k_quick * (1-k_quick)^l
///        + frac_slow  * k_slow  * (1-k_slow)^l
///        + osc_amplitude * cos(2*pi*l / osc_period_days) * osc_decay^l
///   Q[t] = sum_l g[l] * P[t-l]        (mm/day)
///
/// The first two terms are the impulse responses of the storage recursions
/// S <- (1-k) S + frac * P, Q_bucket = k * S. The optional third term adds a
/// damped oscillatory response for high-frequency experiments; it is zero by
/// default. Everything is deterministic per seed.
struct SyntheticConfig {
    std::string basin_id = "syn01";
    Date start = Date::from_ymd(1995, 10, 1);
    std::size_t n_days = 3652;  // ten years
    std::uint64_t seed = 1;

    double k_quick = 0.35;
    double k_slow = 0.02;
    double frac_quick = 0.5;
    double frac_slow = 0.3;

    double osc_amplitude = 0.0;
    double osc_period_days = 7.0;
    double osc_decay = 0.88;

    std::size_t kernel_support = 400;
    double obs_noise_std = 0.0;  // additive noise on Q, mm/day
};

inline BasinRecord generate_synthetic_basin(const SyntheticConfig& cfg) {
    Rng rng(cfg.seed);
    const std::size_t T = cfg.n_days;

    BasinRecord rec;
    rec.basin_id = cfg.basin_id;
    rec.start_date = cfg.start;
    rec.forcing.resize(T * kForcingDim);
    rec.discharge.resize(T);

    // Seasonal forcing with a persistent wet/dry precipitation chain.
    std::vector<double> precip(T, 0.0);
    bool wet = false;
    const double phase = rng.uniform(0.0, 2.0 * M_PI);
    for (std::size_t t = 0; t < T; ++t) {
        const double doy = 2.0 * M_PI * static_cast<double>(t % 365) / 365.0;
        const double season = std::sin(doy + phase);

        const double p_wet = wet ? 0.55 : 0.22 + 0.08 * season;
        wet = rng.bernoulli(p_wet);
        double p = 0.0;
        if (wet) {
            const double scale = 6.0 + 2.5 * season;
            p = -std::max(scale, 0.5) * std::log(1.0 - rng.uniform(0.0, 1.0));
        }
        precip[t] = p;

        const double tmax = 17.0 + 11.0 * season + rng.normal() * 2.0;
        const double tmin = tmax - 8.0 - std::abs(rng.normal()) * 2.0;
        const double srad = std::max(10.0, 230.0 + 110.0 * season + rng.normal() * 20.0);
        const double vp = std::max(50.0, 850.0 + 450.0 * season + rng.normal() * 40.0);

        rec.forcing[t * kForcingDim + 0] = tmax;
        rec.forcing[t * kForcingDim + 1] = tmin;
        rec.forcing[t * kForcingDim + 2] = p;
        rec.forcing[t * kForcingDim + 3] = srad;
        rec.forcing[t * kForcingDim + 4] = vp;
    }

    // Response kernel and causal convolution.
    const std::size_t support = std::min(cfg.kernel_support, T);
    std::vector<double> kern(support);
    for (std::size_t l = 0; l < support; ++l) {
        const double dl = static_cast<double>(l);
        kern[l] = cfg.frac_quick * cfg.k_quick * std::pow(1.0 - cfg.k_quick, dl) +
                  cfg.frac_slow * cfg.k_slow * std::pow(1.0 - cfg.k_slow, dl);
        if (cfg.osc_amplitude != 0.0)
            kern[l] += cfg.osc_amplitude * std::cos(2.0 * M_PI * dl / cfg.osc_period_days) *
                       std::pow(cfg.osc_decay, dl);
    }
    for (std::size_t t = 0; t < T; ++t) {
        double q = 0.0;
        const std::size_t lmax = std::min(t + 1, support);
        for (std::size_t l = 0; l < lmax; ++l) q += kern[l] * precip[t - l];
        if (cfg.obs_noise_std > 0.0) q += rng.normal() * cfg.obs_noise_std;
        rec.discharge[t] = std::max(q, 0.0);
    }

    // Static attributes: plausible per-basin draws so they act as
    // distinguishing inputs across synthetic basins.
    Rng arng(cfg.seed ^ 0xA77A77A7ULL);
    rec.attributes.resize(kAttributeDim);
    const double ranges[kAttributeDim][2] = {
        {1.5, 6.0},    // p_mean
        {1.0, 5.0},    // pet_mean
        {0.3, 2.5},    // aridity
        {-0.8, 0.8},   // p_seasonality
        {0.0, 0.6},    // frac_snow
        {8.0, 25.0},   // high_prec_freq
        {1.0, 2.5},    // high_prec_dur
        {180.0, 320.0},// low_prec_freq
        {2.0, 9.0},    // low_prec_dur
        {80.0, 3200.0},// elev_mean
        {5.0, 120.0},  // slope_mean
        {30.0, 8000.0},// area_gages2
        {0.0, 1.0},    // frac_forest
        {0.5, 6.0},    // lai_max
        {0.2, 4.5},    // lai_diff
        {0.3, 1.0},    // gvf_max
        {0.1, 0.7},    // gvf_diff
        {2.0, 50.0},   // soil_depth_pelletier
        {0.3, 1.5},    // soil_depth_statsgo
        {0.3, 0.6},    // soil_porosity
        {0.5, 200.0},  // soil_conductivity
        {0.1, 0.9},    // max_water_content
        {5.0, 90.0},   // sand_frac
        {5.0, 70.0},   // silt_frac
        {2.0, 50.0},   // clay_frac
        {0.0, 0.4},    // carbonate_rocks_frac
        {-16.0, -11.0} // geol_permeability
    };
    for (std::size_t a = 0; a < kAttributeDim; ++a)
        rec.attributes[a] = arng.uniform(ranges[a][0], ranges[a][1]);
    return rec;
}

/// Writes a set of synthetic basins into the standard data-directory layout
/// (forcing/<id>.csv, streamflow/<id>.csv, attributes.csv, basins.txt).
inline void write_fixture_dir(const std::string& dir, const std::vector<BasinRecord>& records) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "forcing");
    fs::create_directories(fs::path(dir) / "streamflow");

    std::ofstream basins(fs::path(dir) / "basins.txt");
    std::ofstream attrs(fs::path(dir) / "attributes.csv");
    attrs << "basin_id";
    for (const auto& c : attribute_columns()) attrs << ',' << c;
    attrs << '\n';

    for (const auto& rec : records) {
        basins << rec.basin_id << '\n';
        attrs << rec.basin_id;
        for (double v : rec.attributes) attrs << ',' << csv::format_double(v);
        attrs << '\n';

        std::ofstream f(forcing_path(dir, rec.basin_id));
        f << "date";
        for (const auto& c : forcing_columns()) f << ',' << c;
        f << '\n';
        std::ofstream q(streamflow_path(dir, rec.basin_id));
        q << "date,discharge_mm_day\n";
        for (std::size_t t = 0; t < rec.length(); ++t) {
            const std::string d = rec.date_at(t).to_string();
            f << d;
            for (std::size_t c = 0; c < kForcingDim; ++c)
                f << ',' << csv::format_double(rec.forcing[t * kForcingDim + c]);
            f << '\n';
            q << d << ',';
            if (rec.has_discharge(t)) q << csv::format_double(rec.discharge[t]);
            q << '\n';
        }
    }
}

/// The 2-basin, 3-year fixture bundled for smoke runs and selfcheck.
inline std::vector<BasinRecord> bundled_fixture_basins() {
    SyntheticConfig a;
    a.basin_id = "syn01";
    a.n_days = 1096;
    a.seed = 101;
    SyntheticConfig b;
    b.basin_id = "syn02";
    b.n_days = 1096;
    b.seed = 202;
    b.k_quick = 0.25;
    b.k_slow = 0.035;
    b.frac_quick = 0.45;
    b.frac_slow = 0.35;
    return {generate_synthetic_basin(a), generate_synthetic_basin(b)};
}

}  // namespace hydrossm
