#pragma once

#include <array>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "hydrossm/csv.hpp"
#include "hydrossm/dates.hpp"
#include "hydrossm/tensor.hpp"

namespace hydrossm {

inline constexpr std::size_t kForcingDim = 5;
inline constexpr std::size_t kAttributeDim = 27;
inline constexpr std::size_t kInputDim = kForcingDim + kAttributeDim;
inline constexpr double kMissingMarker = -999.0;

inline const std::vector<std::string>& forcing_columns() {
    static const std::vector<std::string> cols{"tmax_c", "tmin_c", "prcp_mm_day", "srad_w_m2",
                                               "vp_pa"};
    return cols;
}

inline const std::vector<std::string>& attribute_columns() {
    static const std::vector<std::string> cols{
        "p_mean",         "pet_mean",          "aridity",
        "p_seasonality",  "frac_snow",         "high_prec_freq",
        "high_prec_dur",  "low_prec_freq",     "low_prec_dur",
        "elev_mean",      "slope_mean",        "area_gages2",
        "frac_forest",    "lai_max",           "lai_diff",
        "gvf_max",        "gvf_diff",          "soil_depth_pelletier",
        "soil_depth_statsgo", "soil_porosity", "soil_conductivity",
        "max_water_content",  "sand_frac",     "silt_frac",
        "clay_frac",      "carbonate_rocks_frac", "geol_permeability"};
    return cols;
}

/// Name of input feature j in the model's 32-wide feature order:
/// the 5 forcing variables first, then the 27 static attributes.
inline std::string input_feature_name(std::size_t j) {
    return j < kForcingDim ? forcing_columns()[j] : attribute_columns()[j - kForcingDim];
}

inline DatePeriod default_train_period() {
    return {Date::parse("1999-10-01"), Date::parse("2008-09-30")};
}
inline DatePeriod default_test_period() {
    return {Date::parse("1989-10-01"), Date::parse("1999-09-30")};
}

/// One watershed: contiguous daily forcing, static attributes and observed
/// discharge (mm/day, NaN = missing) over a shared date range.
struct BasinRecord {
    std::string basin_id;
    Date start_date;
    std::vector<double> forcing;     // [T, 5] row-major
    std::vector<double> attributes;  // [27]
    std::vector<double> discharge;   // [T], NaN where missing

    std::size_t length() const { return discharge.size(); }
    Date date_at(std::size_t t) const { return start_date + static_cast<int>(t); }
    bool has_discharge(std::size_t t) const { return std::isfinite(discharge[t]); }

    /// Index of a date, or size_t max when outside the record.
    std::size_t index_of(Date d) const {
        const int off = d - start_date;
        if (off < 0 || static_cast<std::size_t>(off) >= length())
            return std::numeric_limits<std::size_t>::max();
        return static_cast<std::size_t>(off);
    }
};

namespace detail {

inline double parse_discharge_field(const csv::Table& t, const csv::Row& row, std::size_t col) {
    if (col < row.fields.size() && row.fields[col].empty())
        return std::numeric_limits<double>::quiet_NaN();
    const double v = csv::parse_double(t, row, col);
    if (v == kMissingMarker) return std::numeric_limits<double>::quiet_NaN();
    return v;
}

inline void check_contiguous_dates(const csv::Table& t, Date prev, Date cur,
                                   std::size_t line_no) {
    if (cur - prev != 1)
        throw std::runtime_error(t.path + ":" + std::to_string(line_no) + ": date gap between " +
                                 prev.to_string() + " and " + cur.to_string());
}

}  // namespace detail

/// Loads and date-aligns one basin from the three-table schema. Missing
/// discharge markers (-999 or empty) become NaN; everything else must parse.
inline BasinRecord load_basin(const std::string& forcing_path, const std::string& attributes_path,
                              const std::string& streamflow_path, const std::string& basin_id) {
    BasinRecord rec;
    rec.basin_id = basin_id;

    {
        auto t = csv::Table::read(forcing_path);
        std::vector<std::string> expected{"date"};
        for (const auto& c : forcing_columns()) expected.push_back(c);
        t.expect_header(expected);
        if (t.rows.empty()) throw std::runtime_error(forcing_path + ": no data rows");
        rec.forcing.reserve(t.rows.size() * kForcingDim);
        Date prev{};
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
            const auto& row = t.rows[i];
            Date d;
            try {
                d = Date::parse(row.fields.at(0));
            } catch (const std::exception& e) {
                throw std::runtime_error(forcing_path + ":" + std::to_string(row.line_no) + ": " +
                                         e.what());
            }
            if (i == 0)
                rec.start_date = d;
            else
                detail::check_contiguous_dates(t, prev, d, row.line_no);
            prev = d;
            for (std::size_t c = 0; c < kForcingDim; ++c)
                rec.forcing.push_back(csv::parse_double(t, row, 1 + c));
        }
    }

    {
        auto t = csv::Table::read(attributes_path);
        std::vector<std::string> expected{"basin_id"};
        for (const auto& c : attribute_columns()) expected.push_back(c);
        t.expect_header(expected);
        bool found = false;
        for (const auto& row : t.rows) {
            if (row.fields.at(0) != basin_id) continue;
            for (std::size_t c = 0; c < kAttributeDim; ++c) {
                const double v = csv::parse_double(t, row, 1 + c);
                if (!std::isfinite(v))
                    throw std::runtime_error(attributes_path + ":" +
                                             std::to_string(row.line_no) +
                                             ": non-finite attribute " + attribute_columns()[c]);
                rec.attributes.push_back(v);
            }
            found = true;
            break;
        }
        if (!found)
            throw std::runtime_error(attributes_path + ": unknown basin_id '" + basin_id + "'");
    }

    {
        auto t = csv::Table::read(streamflow_path);
        t.expect_header({"date", "discharge_mm_day"});
        if (t.rows.size() != rec.forcing.size() / kForcingDim)
            throw std::runtime_error(streamflow_path + ": " + std::to_string(t.rows.size()) +
                                     " rows do not match forcing length " +
                                     std::to_string(rec.forcing.size() / kForcingDim));
        Date prev{};
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
            const auto& row = t.rows[i];
            Date d;
            try {
                d = Date::parse(row.fields.at(0));
            } catch (const std::exception& e) {
                throw std::runtime_error(streamflow_path + ":" + std::to_string(row.line_no) +
                                         ": " + e.what());
            }
            if (i == 0) {
                if (d != rec.start_date)
                    throw std::runtime_error(streamflow_path + ": start date " + d.to_string() +
                                             " does not match forcing start " +
                                             rec.start_date.to_string());
            } else {
                detail::check_contiguous_dates(t, prev, d, row.line_no);
            }
            prev = d;
            rec.discharge.push_back(detail::parse_discharge_field(t, row, 1));
        }
    }
    return rec;
}

/// Per-feature standardization statistics for the 32 inputs and discharge,
/// fitted on training-period rows pooled across basins.
struct Normalizer {
    std::array<double, kInputDim> input_mean{}, input_std{};
    double discharge_mean = 0.0, discharge_std = 1.0;

    double normalize_input(std::size_t feature, double v) const {
        return (v - input_mean[feature]) / input_std[feature];
    }
    double denormalize_input(std::size_t feature, double v) const {
        return v * input_std[feature] + input_mean[feature];
    }
    double normalize_discharge(double v) const { return (v - discharge_mean) / discharge_std; }
    double denormalize_discharge(double v) const { return v * discharge_std + discharge_mean; }
};

/// Pools every training-period row across basins; discharge statistics skip
/// missing days. Population standard deviation; zero-variance features are
/// rejected by name.
inline Normalizer fit_normalizer(const std::vector<BasinRecord>& records, DatePeriod period) {
    std::array<double, kInputDim> sum{}, sumsq{};
    double q_sum = 0.0, q_sumsq = 0.0;
    std::size_t rows = 0, q_rows = 0;

    for (const auto& rec : records) {
        for (std::size_t t = 0; t < rec.length(); ++t) {
            if (!period.contains(rec.date_at(t))) continue;
            ++rows;
            for (std::size_t f = 0; f < kForcingDim; ++f) {
                const double v = rec.forcing[t * kForcingDim + f];
                sum[f] += v;
                sumsq[f] += v * v;
            }
            for (std::size_t a = 0; a < kAttributeDim; ++a) {
                const double v = rec.attributes[a];
                sum[kForcingDim + a] += v;
                sumsq[kForcingDim + a] += v * v;
            }
            if (rec.has_discharge(t)) {
                ++q_rows;
                q_sum += rec.discharge[t];
                q_sumsq += rec.discharge[t] * rec.discharge[t];
            }
        }
    }
    if (rows == 0) throw std::invalid_argument("fit_normalizer: no training rows in period");
    if (q_rows == 0) throw std::invalid_argument("fit_normalizer: no observed discharge in period");

    Normalizer n;
    for (std::size_t f = 0; f < kInputDim; ++f) {
        const double mean = sum[f] / static_cast<double>(rows);
        const double var = std::max(0.0, sumsq[f] / static_cast<double>(rows) - mean * mean);
        const double sd = std::sqrt(var);
        if (sd < 1e-12)
            throw std::invalid_argument("fit_normalizer: feature '" + input_feature_name(f) +
                                        "' has zero variance over the training period");
        n.input_mean[f] = mean;
        n.input_std[f] = sd;
    }
    const double q_mean = q_sum / static_cast<double>(q_rows);
    const double q_var = std::max(0.0, q_sumsq / static_cast<double>(q_rows) - q_mean * q_mean);
    const double q_sd = std::sqrt(q_var);
    if (q_sd < 1e-12)
        throw std::invalid_argument("fit_normalizer: feature 'discharge' has zero variance "
                                    "over the training period");
    n.discharge_mean = q_mean;
    n.discharge_std = q_sd;
    return n;
}

/// One sequence-to-one training example: a standardized lookback window of
/// the 32 inputs and the standardized discharge on its final day.
struct SequenceSample {
    std::string basin_id;
    Date target_date;
    ag::Tensor inputs;  // [lookback, 32]
    double target = 0.0;
};

/// Lazy view over all valid (basin, target day) windows in a period: the
/// target day has observed discharge, lies in the period, and has a full
/// lookback of days strictly before it (the lookback may reach before the
/// period). The window itself spans [d - lookback + 1, d], ending on the
/// target day. Windows are materialized per batch, so full-scale runs never
/// hold every window in memory. The records vector must outlive the dataset.
class WindowDataset {
public:
    struct Ref {
        std::size_t record;
        std::size_t offset;  // index of the target day within the record
    };

    WindowDataset(const std::vector<BasinRecord>& records, DatePeriod period,
                  Normalizer normalizer, std::size_t lookback = 365)
        : records_(&records), normalizer_(normalizer), lookback_(lookback) {
        if (lookback_ == 0) throw std::invalid_argument("WindowDataset: lookback must be >= 1");
        for (std::size_t r = 0; r < records.size(); ++r) {
            const auto& rec = records[r];
            for (std::size_t t = lookback_; t < rec.length(); ++t) {
                if (!period.contains(rec.date_at(t))) continue;
                if (!rec.has_discharge(t)) continue;
                refs_.push_back({r, t});
            }
        }
    }

    std::size_t size() const { return refs_.size(); }
    std::size_t lookback() const { return lookback_; }
    const Normalizer& normalizer() const { return normalizer_; }
    const Ref& ref(std::size_t i) const { return refs_[i]; }
    const BasinRecord& record_of(std::size_t i) const { return (*records_)[refs_[i].record]; }
    Date target_date(std::size_t i) const {
        return record_of(i).date_at(refs_[i].offset);
    }

    /// Standardized window, written row-major into dst[lookback * 32].
    void fill_input(std::size_t i, double* dst) const {
        const auto& rec = record_of(i);
        const std::size_t t_end = refs_[i].offset;
        for (std::size_t k = 0; k < lookback_; ++k) {
            const std::size_t t = t_end + 1 - lookback_ + k;
            double* row = dst + k * kInputDim;
            for (std::size_t f = 0; f < kForcingDim; ++f)
                row[f] = normalizer_.normalize_input(f, rec.forcing[t * kForcingDim + f]);
            for (std::size_t a = 0; a < kAttributeDim; ++a)
                row[kForcingDim + a] =
                    normalizer_.normalize_input(kForcingDim + a, rec.attributes[a]);
        }
    }

    double target_standardized(std::size_t i) const {
        return normalizer_.normalize_discharge(target_mm(i));
    }
    double target_mm(std::size_t i) const {
        return record_of(i).discharge[refs_[i].offset];
    }

    SequenceSample materialize(std::size_t i) const {
        SequenceSample s;
        s.basin_id = record_of(i).basin_id;
        s.target_date = target_date(i);
        s.inputs = ag::Tensor::zeros({lookback_, kInputDim});
        fill_input(i, s.inputs.ptr());
        s.target = target_standardized(i);
        return s;
    }

private:
    const std::vector<BasinRecord>* records_;
    Normalizer normalizer_;
    std::size_t lookback_;
    std::vector<Ref> refs_;
};

/// Materialized windows for one basin record (the desk-scale path).
inline std::vector<SequenceSample> build_windows(const BasinRecord& record, DatePeriod period,
                                                 const Normalizer& normalizer,
                                                 std::size_t lookback = 365) {
    std::vector<BasinRecord> one{record};
    WindowDataset ds(one, period, normalizer, lookback);
    std::vector<SequenceSample> out;
    out.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) out.push_back(ds.materialize(i));
    return out;
}

// ---------------------------------------------------------------------------
// Data directory layout
// ---------------------------------------------------------------------------

/// Root defaults to $HYDRO_SSM_DATA_DIR; CLI flags override.
inline std::string default_data_dir() {
    const char* env = std::getenv("HYDRO_SSM_DATA_DIR");
    return env ? env : "";
}

inline std::string forcing_path(const std::string& data_dir, const std::string& basin_id) {
    return data_dir + "/forcing/" + basin_id + ".csv";
}
inline std::string streamflow_path(const std::string& data_dir, const std::string& basin_id) {
    return data_dir + "/streamflow/" + basin_id + ".csv";
}
inline std::string attributes_path(const std::string& data_dir) {
    return data_dir + "/attributes.csv";
}

/// One basin id per line; '#' comments and blank lines are skipped.
inline std::vector<std::string> read_basin_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open basin list " + path);
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t");
        std::string id = line.substr(first, last - first + 1);
        if (id.empty() || id[0] == '#') continue;
        ids.push_back(std::move(id));
    }
    return ids;
}

inline BasinRecord load_basin_from_dir(const std::string& data_dir, const std::string& basin_id) {
    return load_basin(forcing_path(data_dir, basin_id), attributes_path(data_dir),
                      streamflow_path(data_dir, basin_id), basin_id);
}

}  // namespace hydrossm
