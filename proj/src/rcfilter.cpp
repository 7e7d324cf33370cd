#include "ivdac/rcfilter.hpp"

#include <algorithm>
#include <cmath>

#include "ivdac/constants.hpp"
#include "ivdac/errors.hpp"

namespace ivdac {

namespace {

// Normalized corner x = 2 pi f RC where |H| = 1/sqrt(2).
double corner_x(bool buffered) {
    return buffered ? std::sqrt(std::sqrt(2.0) - 1.0) : std::sqrt((std::sqrt(53.0) - 7.0) / 2.0);
}

}  // namespace

void FilterParams::validate() const {
    if (!(r_per_stage > 0.0) || !(c_per_stage > 0.0)) {
        throw InputError("filter R and C must be positive");
    }
}

FilterParams FilterParams::paper_fit() {
    const double rc = corner_x(false) / (constants::two_pi * kMeasuredCornerHz);
    return {35e3, rc / 35e3, false};
}

FilterParams FilterParams::by_name(const std::string& name) {
    if (name == "nominal" || name == "unbuffered") return nominal();
    if (name == "buffered") return nominal_buffered();
    if (name == "paper-fit") return paper_fit();
    throw InputError("unknown filter config '" + name + "' (known: nominal, buffered, paper-fit)");
}

std::complex<double> transfer(double f_hz, const FilterParams& p) {
    p.validate();
    if (f_hz < 0.0) {
        throw InputError("frequency must be non-negative");
    }
    const std::complex<double> s(0.0, constants::two_pi * f_hz * p.tau());
    if (p.buffered) {
        return 1.0 / ((1.0 + s) * (1.0 + s));
    }
    return 1.0 / (s * s + 3.0 * s + 1.0);
}

double f3db(const FilterParams& p) {
    p.validate();
    return corner_x(p.buffered) / (constants::two_pi * p.tau());
}

double step_response(const FilterParams& p, double t_s) {
    p.validate();
    if (t_s <= 0.0) {
        return 0.0;
    }
    const double u = t_s / p.tau();
    if (p.buffered) {
        return -std::expm1(-u) - u * std::exp(-u);
    }
    const double s5 = std::sqrt(5.0);
    const double p1 = (-3.0 + s5) / 2.0;  // slow pole, units of 1/RC
    const double p2 = (-3.0 - s5) / 2.0;
    // y = 1 + A e^{p1 u} + B e^{p2 u}, y(0) = y'(0) = 0
    const double a = p2 / (p1 - p2);
    const double b = -p1 / (p1 - p2);
    return 1.0 + a * std::exp(p1 * u) + b * std::exp(p2 * u);
}

FilteredTimeline::FilteredTimeline(const FilterParams& p, std::vector<double> update_times,
                                   std::vector<std::vector<double>> levels)
    : params_(p), times_(std::move(update_times)), levels_(std::move(levels)) {
    params_.validate();
    if (times_.empty()) {
        throw InputError("filtered timeline needs at least one update");
    }
    for (std::size_t k = 1; k < times_.size(); ++k) {
        if (!(times_[k] > times_[k - 1])) {
            throw InputError("update times must be strictly increasing");
        }
    }
    states_.resize(levels_.size());
    for (std::size_t ch = 0; ch < levels_.size(); ++ch) {
        const auto& lv = levels_[ch];
        if (lv.size() != times_.size()) {
            throw InputError("channel " + std::to_string(ch) + " level count does not match update count");
        }
        auto& st = states_[ch];
        st.reserve(times_.size());
        st.push_back({lv[0], lv[0]});
        for (std::size_t k = 1; k < times_.size(); ++k) {
            st.push_back(transition(times_[k] - times_[k - 1]).apply(st.back(), lv[k - 1]));
        }
    }
}

FilteredTimeline::Transition FilteredTimeline::transition(double dt) const {
    // x' = A (x - input); closed-form 2x2 matrix exponential.
    const double tau = params_.tau();
    if (params_.buffered) {
        // A = [[-1, 0], [1, -1]] / tau, repeated eigenvalue -1/tau.
        const double e = std::exp(-dt / tau);
        return {e, 0.0, e * dt / tau, e};
    }
    // A = [[-2, 1], [1, -1]] / tau, eigenvalues (-3 +- sqrt 5) / (2 tau).
    const double s5 = std::sqrt(5.0);
    const double l1 = (-3.0 + s5) / (2.0 * tau);
    const double l2 = (-3.0 - s5) / (2.0 * tau);
    const double e1 = std::exp(l1 * dt);
    const double e2 = std::exp(l2 * dt);
    // exp(A dt) = (e1 (A - l2 I) - e2 (A - l1 I)) / (l1 - l2)
    const double a11 = -2.0 / tau, a12 = 1.0 / tau, a22 = -1.0 / tau;
    const double inv = 1.0 / (l1 - l2);
    const double off = (e1 - e2) * a12 * inv;
    return {(e1 * (a11 - l2) - e2 * (a11 - l1)) * inv, off, off, (e1 * (a22 - l2) - e2 * (a22 - l1)) * inv};
}

std::size_t FilteredTimeline::segment(double t) const {
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    return static_cast<std::size_t>(it - times_.begin()) - 1;
}

double FilteredTimeline::value(std::size_t channel, double t) const {
    if (t <= times_.front()) {
        return levels_[channel][0];
    }
    const auto k = segment(t);
    return transition(t - times_[k]).apply(states_[channel][k], levels_[channel][k]).v2;
}

void FilteredTimeline::values(double t, std::span<double> out) const {
    if (t <= times_.front()) {
        for (std::size_t ch = 0; ch < levels_.size(); ++ch) out[ch] = levels_[ch][0];
        return;
    }
    const auto k = segment(t);
    const auto m = transition(t - times_[k]);
    for (std::size_t ch = 0; ch < levels_.size(); ++ch) {
        out[ch] = m.apply(states_[ch][k], levels_[ch][k]).v2;
    }
}

}  // namespace ivdac
