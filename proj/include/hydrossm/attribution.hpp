#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "hydrossm/metrics.hpp"
#include "hydrossm/signatures.hpp"

namespace hydrossm {

/// Two-group attribution of model-vs-reference performance. Group 1 holds
/// basins where both the NSE and KGE skill scores are positive; Group 2 the
/// rest. Correlations are Pearson coefficients between each skill score and
/// each improvement or signature, per group; NaN marks an undefined value
/// (fewer than 3 basins in the group, or zero variance).
struct AttributionReport {
    struct Basin {
        std::string basin_id;
        int group = 0;  // 1 or 2
        double nse_skill = 0.0;
        double kge_skill = 0.0;
        Improvements improvement;
        SignatureSet signature;
    };

    std::vector<Basin> basins;
    // correlations[g][skill][target]; g: 0 = Group 1, 1 = Group 2
    std::array<std::map<std::string, std::map<std::string, double>>, 2> correlations;
    // (mean_G2 - mean_G1)/mean_G1 * 100 per signature; NaN when undefined
    std::map<std::string, double> signature_pct_diff;

    std::size_t group_size(int g) const {
        std::size_t n = 0;
        for (const auto& b : basins) n += (b.group == g);
        return n;
    }
};

namespace attribution_detail {

inline double nan() { return std::numeric_limits<double>::quiet_NaN(); }

inline double pearson_or_nan(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 3) return nan();
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i] / n;
        mb += b[i] / n;
    }
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return nan();
    return sab / std::sqrt(saa * sbb);
}

inline const std::vector<std::string>& improvement_names() {
    static const std::vector<std::string> names{"fhv_improvement", "pearson_r_improvement",
                                                "pbias_improvement"};
    return names;
}

inline double improvement_value(const Improvements& imp, std::size_t i) {
    switch (i) {
        case 0: return imp.fhv;
        case 1: return imp.pearson_r;
        case 2: return imp.pbias;
    }
    throw std::out_of_range("improvement_value");
}

}  // namespace attribution_detail

/// Builds the full attribution analysis from per-basin metric reports of the
/// model and the reference plus per-basin signatures. All three containers
/// must be keyed by the same basins.
inline AttributionReport attribution(const std::vector<MetricReport>& model_reports,
                                     const std::vector<MetricReport>& ref_reports,
                                     const std::map<std::string, SignatureSet>& basin_signatures,
                                     bool corrected_fhv = false) {
    using attribution_detail::nan;
    if (model_reports.size() != ref_reports.size())
        throw std::invalid_argument("attribution: model and reference report counts differ");

    AttributionReport out;
    for (std::size_t i = 0; i < model_reports.size(); ++i) {
        const auto& m = model_reports[i];
        const auto& r = ref_reports[i];
        if (m.basin_id != r.basin_id)
            throw std::invalid_argument("attribution: basin order mismatch at index " +
                                        std::to_string(i));
        auto sig = basin_signatures.find(m.basin_id);
        if (sig == basin_signatures.end())
            throw std::invalid_argument("attribution: no signatures for basin " + m.basin_id);

        AttributionReport::Basin b;
        b.basin_id = m.basin_id;
        b.nse_skill = skill_score(m.nse, r.nse);
        b.kge_skill = skill_score(m.kge, r.kge);
        b.improvement = improvements(m, r, corrected_fhv);
        b.signature = sig->second;
        b.group = (b.nse_skill > 0.0 && b.kge_skill > 0.0) ? 1 : 2;
        out.basins.push_back(std::move(b));
    }

    for (int g = 1; g <= 2; ++g) {
        std::vector<double> nse_s, kge_s;
        std::vector<std::vector<double>> targets(attribution_detail::improvement_names().size() +
                                                 signature_names().size());
        for (const auto& b : out.basins) {
            if (b.group != g) continue;
            nse_s.push_back(b.nse_skill);
            kge_s.push_back(b.kge_skill);
            std::size_t t = 0;
            for (std::size_t i = 0; i < attribution_detail::improvement_names().size(); ++i, ++t)
                targets[t].push_back(attribution_detail::improvement_value(b.improvement, i));
            for (std::size_t i = 0; i < signature_names().size(); ++i, ++t)
                targets[t].push_back(signature_value(b.signature, i));
        }
        auto& slot = out.correlations[g - 1];
        std::size_t t = 0;
        for (const auto& name : attribution_detail::improvement_names()) {
            slot["nse_skill"][name] = attribution_detail::pearson_or_nan(nse_s, targets[t]);
            slot["kge_skill"][name] = attribution_detail::pearson_or_nan(kge_s, targets[t]);
            ++t;
        }
        for (const auto& name : signature_names()) {
            slot["nse_skill"][name] = attribution_detail::pearson_or_nan(nse_s, targets[t]);
            slot["kge_skill"][name] = attribution_detail::pearson_or_nan(kge_s, targets[t]);
            ++t;
        }
    }

    // signature percentage differences between the group means
    for (std::size_t i = 0; i < signature_names().size(); ++i) {
        double sum1 = 0.0, sum2 = 0.0;
        std::size_t n1 = 0, n2 = 0;
        for (const auto& b : out.basins) {
            const double v = signature_value(b.signature, i);
            if (b.group == 1) {
                sum1 += v;
                ++n1;
            } else {
                sum2 += v;
                ++n2;
            }
        }
        double pct = nan();
        if (n1 > 0 && n2 > 0) {
            const double m1 = sum1 / double(n1), m2 = sum2 / double(n2);
            pct = m1 == 0.0 ? nan() : 100.0 * (m2 - m1) / m1;
        }
        out.signature_pct_diff[signature_names()[i]] = pct;
    }
    return out;
}

}  // namespace hydrossm
