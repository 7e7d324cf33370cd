#include "ivdac/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "ivdac/constants.hpp"
#include "ivdac/errors.hpp"

namespace ivdac {

Occupation nbar_from_sidebands(double i_red, double i_blue, double sigma_red, double sigma_blue) {
    if (!(i_blue > 0.0)) {
        throw UnphysicalRatio("blue sideband strength must be positive");
    }
    if (i_red < 0.0 || sigma_red < 0.0 || sigma_blue < 0.0) {
        throw InputError("sideband strengths and uncertainties must be non-negative");
    }
    const double x = i_red / i_blue;
    if (x >= 1.0) {
        throw UnphysicalRatio("red/blue sideband ratio " + std::to_string(x) + " >= 1");
    }
    const double sx = std::hypot(sigma_red / i_blue, i_red * sigma_blue / (i_blue * i_blue));
    const double d = 1.0 - x;
    return {x / d, sx / (d * d)};
}

namespace {

void check_sizes(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw InputError("fit inputs differ in length");
    }
    if (x.size() < 2) {
        throw DegenerateFit("a line fit needs at least two points");
    }
}

}  // namespace

LinearFit ols_fit(std::span<const double> x, std::span<const double> y) {
    check_sizes(x, y);
    const double n = static_cast<double>(x.size());
    double xm = 0.0, ym = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        xm += x[i];
        ym += y[i];
    }
    xm /= n;
    ym /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - xm) * (x[i] - xm);
        sxy += (x[i] - xm) * (y[i] - ym);
    }
    const double span = *std::max_element(x.begin(), x.end()) - *std::min_element(x.begin(), x.end());
    if (!(span > 0.0) || sxx <= 1e-24 * span * span * n) {
        throw DegenerateFit("all abscissae are equal");
    }
    LinearFit f;
    f.points = x.size();
    f.slope = sxy / sxx;
    f.intercept = ym - f.slope * xm;
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - f.at(x[i]);
        rss += r * r;
    }
    f.chi2 = rss;
    if (x.size() > 2) {
        const double s2 = rss / (n - 2.0);
        f.slope_stderr = std::sqrt(s2 / sxx);
        f.intercept_stderr = std::sqrt(s2 * (1.0 / n + xm * xm / sxx));
    } else {
        f.slope_stderr = std::numeric_limits<double>::infinity();
        f.intercept_stderr = std::numeric_limits<double>::infinity();
    }
    return f;
}

LinearFit weighted_fit(std::span<const double> x, std::span<const double> y, std::span<const double> sigma) {
    check_sizes(x, y);
    if (sigma.size() != x.size()) {
        throw InputError("fit inputs differ in length");
    }
    double sw = 0.0, swx = 0.0, swy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(sigma[i] > 0.0)) {
            throw InputError("weighted fit needs positive uncertainties");
        }
        const double w = 1.0 / (sigma[i] * sigma[i]);
        sw += w;
        swx += w * x[i];
        swy += w * y[i];
    }
    const double xm = swx / sw;
    const double ym = swy / sw;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double w = 1.0 / (sigma[i] * sigma[i]);
        sxx += w * (x[i] - xm) * (x[i] - xm);
        sxy += w * (x[i] - xm) * (y[i] - ym);
    }
    const double span = *std::max_element(x.begin(), x.end()) - *std::min_element(x.begin(), x.end());
    if (!(span > 0.0) || sxx <= 1e-24 * span * span * sw) {
        throw DegenerateFit("all abscissae are equal");
    }
    LinearFit f;
    f.points = x.size();
    f.slope = sxy / sxx;
    f.intercept = ym - f.slope * xm;
    f.slope_stderr = std::sqrt(1.0 / sxx);
    f.intercept_stderr = std::sqrt(1.0 / sw + xm * xm / sxx);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = (y[i] - f.at(x[i])) / sigma[i];
        f.chi2 += r * r;
    }
    return f;
}

LinearFit heating_rate_fit(std::span<const SidebandPoint> points) {
    if (points.size() < 3) {
        throw DegenerateFit("heating-rate fit needs at least three delays");
    }
    std::vector<double> t, n, s;
    bool weighted = true;
    for (const auto& p : points) {
        const auto occ = nbar_from_sidebands(p.i_red, p.i_blue, p.sigma_red, p.sigma_blue);
        t.push_back(p.delay_ms);
        n.push_back(occ.nbar);
        s.push_back(occ.sigma);
        weighted = weighted && occ.sigma > 0.0;
    }
    return weighted ? weighted_fit(t, n, s) : ols_fit(t, n);
}

LinearFit drift_fit(std::span<const DriftSample> samples) {
    std::vector<double> t, f;
    for (const auto& s : samples) {
        t.push_back(s.time_hr);
        f.push_back(s.freq_hz);
    }
    return ols_fit(t, f);
}

std::vector<SpectrumLine> sideband_spectrum(const WellProperties& well, double carrier_hz, int order) {
    if (order < 0 || order > 2) {
        throw InputError("sideband order must be 0, 1 or 2");
    }
    const double f[3] = {well.axial_frequency / constants::two_pi, well.radial_frequency_1 / constants::two_pi,
                         well.radial_frequency_2 / constants::two_pi};
    const char* names[3] = {"ax", "r1", "r2"};
    std::vector<SpectrumLine> lines;
    lines.push_back({0.0, carrier_hz, "carrier"});
    for (int a = -order; a <= order; ++a) {
        for (int b = -order; b <= order; ++b) {
            for (int c = -order; c <= order; ++c) {
                const int n[3] = {a, b, c};
                const int total = std::abs(a) + std::abs(b) + std::abs(c);
                if (total == 0 || total > order) continue;
                std::string label;
                double offset = 0.0;
                for (int k = 0; k < 3; ++k) {
                    if (n[k] == 0) continue;
                    label += n[k] > 0 ? '+' : '-';
                    if (std::abs(n[k]) > 1) label += std::to_string(std::abs(n[k]));
                    label += names[k];
                    offset += n[k] * f[k];
                }
                lines.push_back({offset, carrier_hz + offset, label});
            }
        }
    }
    std::stable_sort(lines.begin(), lines.end(),
                     [](const SpectrumLine& x, const SpectrumLine& y) { return x.offset_hz < y.offset_hz; });
    return lines;
}

double field_shift(double field, double omega, const IonSpecies& ion) {
    return ion.charge_c * field / (ion.mass_kg * omega * omega);
}

StrayFieldFit fit_stray_field(std::span<const double> scales, std::span<const double> positions, double omega0,
                              const IonSpecies& ion) {
    if (scales.size() != positions.size()) {
        throw InputError("scale and position lists differ in length");
    }
    std::vector<double> inv;
    for (double s : scales) {
        if (!(s > 0.0)) throw InputError("well scale factors must be positive");
        inv.push_back(1.0 / s);
    }
    std::vector<double> distinct = inv;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 2) {
        throw DegenerateFit("stray-field fit needs at least two distinct scale factors");
    }
    StrayFieldFit out;
    out.degree = std::clamp(static_cast<int>(distinct.size()) - 2, 1, 3);
    // Centre and normalise 1/s so the Vandermonde system stays well conditioned.
    const double mid = 0.5 * (distinct.front() + distinct.back());
    const double half = 0.5 * (distinct.back() - distinct.front());
    const auto n = static_cast<Eigen::Index>(inv.size());
    Eigen::MatrixXd a(n, out.degree + 1);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double u = (inv[i] - mid) / half;
        for (int p = 0; p <= out.degree; ++p) a(i, p) = std::pow(u, p);
        y(i) = positions[i];
    }
    const Eigen::VectorXd cu = a.colPivHouseholderQr().solve(y);
    out.residual_rms = std::sqrt((a * cu - y).squaredNorm() / static_cast<double>(n));
    // Re-expand sum cu_p ((v - mid)/half)^p as a polynomial in v = 1/s.
    out.coefficients.assign(out.degree + 1, 0.0);
    for (int p = 0; p <= out.degree; ++p) {
        for (int k = 0; k <= p; ++k) {
            double binom = 1.0;
            for (int j = 1; j <= k; ++j) binom = binom * (p - k + j) / j;
            out.coefficients[k] += cu(p) * binom * std::pow(-mid, p - k) / std::pow(half, p);
        }
    }
    out.shift_per_unit_scale = out.coefficients[1];
    out.position_at_infinite_scale = out.coefficients[0];
    out.field = out.shift_per_unit_scale * ion.mass_kg * omega0 * omega0 / ion.charge_c;
    return out;
}

std::string format_fit(const LinearFit& fit, const std::string& slope_unit) {
    std::ostringstream os;
    os.precision(6);
    os << "points: " << fit.points << '\n'
       << "slope: " << fit.slope << ' ' << slope_unit << '\n'
       << "slope_stderr: " << fit.slope_stderr << ' ' << slope_unit << '\n'
       << "intercept: " << fit.intercept << '\n'
       << "intercept_stderr: " << fit.intercept_stderr << '\n'
       << "chi2: " << fit.chi2 << '\n';
    return os.str();
}

}  // namespace ivdac
