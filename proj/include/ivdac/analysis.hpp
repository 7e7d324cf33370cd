#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ivdac/trapfield.hpp"

namespace ivdac {

struct SidebandPoint {
    double delay_ms = 0.0;
    double i_red = 0.0;
    double i_blue = 0.0;
    double sigma_red = 0.0;
    double sigma_blue = 0.0;
};

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
    double intercept_stderr = 0.0;
    std::size_t points = 0;
    double chi2 = 0.0;  // weighted residual sum of squares

    double at(double x) const { return intercept + slope * x; }
};

struct Occupation {
    double nbar = 0.0;
    double sigma = 0.0;
};

/// nbar = x / (1 - x) with x = I_red / I_blue. Throws UnphysicalRatio for
/// x >= 1 and for I_blue <= 0.
Occupation nbar_from_sidebands(double i_red, double i_blue, double sigma_red = 0.0, double sigma_blue = 0.0);

/// Ordinary least squares; standard errors from the residual scatter.
LinearFit ols_fit(std::span<const double> x, std::span<const double> y);

/// Weighted least squares with known absolute sigmas. Standard errors from
/// the weight matrix alone.
LinearFit weighted_fit(std::span<const double> x, std::span<const double> y, std::span<const double> sigma);

/// Heating rate in quanta/ms. Uses the propagated nbar uncertainties as
/// weights when every point carries them, else uniform weights.
LinearFit heating_rate_fit(std::span<const SidebandPoint> points);

struct DriftSample {
    double time_hr = 0.0;
    double freq_hz = 0.0;
    bool reload = false;  // metadata only
};

/// Frequency drift in Hz/hr by OLS. Reload markers do not affect the fit.
LinearFit drift_fit(std::span<const DriftSample> samples);

struct SpectrumLine {
    double offset_hz = 0.0;
    double frequency_hz = 0.0;  // carrier + offset
    std::string label;
};

/// Carrier and motional sideband positions for combinations of the three
/// secular modes with total order <= `order` (max 2).
std::vector<SpectrumLine> sideband_spectrum(const WellProperties& well, double carrier_hz, int order);

struct StrayFieldFit {
    double field = 0.0;  // V/m
    double shift_per_unit_scale = 0.0;  // m
    double position_at_infinite_scale = 0.0;
    int degree = 1;                   // polynomial order in 1/s
    std::vector<double> coefficients;  // x0, d, higher orders
    double residual_rms = 0.0;        // m
};

/// Fits position(s) = x0 + d / s + c2 / s^2 + ... and converts the linear
/// coefficient d = Q E / (m w0^2) into E. The higher orders absorb the well's
/// anharmonicity; the degree is min(3, distinct scales - 2), at least 1.
StrayFieldFit fit_stray_field(std::span<const double> scales, std::span<const double> positions, double omega0,
                              const IonSpecies& ion);

/// Q E / (m w^2): displacement of a harmonic well under a uniform field.
double field_shift(double field, double omega, const IonSpecies& ion);

std::string format_fit(const LinearFit& fit, const std::string& slope_unit);

}  // namespace ivdac
