#pragma once

#include <complex>
#include <span>
#include <string>
#include <vector>

namespace ivdac {

/// Two identical RC stages between a DAC output and a trap electrode.
/// Unbuffered: the second stage loads the first. Buffered: ideal isolation.
struct FilterParams {
    double r_per_stage = 35e3;
    double c_per_stage = 220e-12;
    bool buffered = false;

    double tau() const { return r_per_stage * c_per_stage; }
    void validate() const;

    /// 35 kOhm / 220 pF per stage, unbuffered.
    static FilterParams nominal() { return {}; }
    static FilterParams nominal_buffered() { return {35e3, 220e-12, true}; }
    /// Unbuffered ladder whose effective RC reproduces the measured 12.1 kHz corner.
    static FilterParams paper_fit();
    static FilterParams by_name(const std::string& name);
};

inline constexpr double kMeasuredCornerHz = 12.1e3;

std::complex<double> transfer(double f_hz, const FilterParams& p);
double f3db(const FilterParams& p);
/// Unit-step output at time t >= 0 (0 for t < 0).
double step_response(const FilterParams& p, double t_s);

/// Zero-order-hold staircase through the filter, one channel per row of
/// `levels`. Level k applies from update_times[k] on; before the first
/// update the filter rests at levels[0]. The two-node ladder state is
/// propagated exactly between updates.
class FilteredTimeline {
public:
    FilteredTimeline(const FilterParams& p, std::vector<double> update_times,
                     std::vector<std::vector<double>> levels);

    std::size_t channel_count() const { return levels_.size(); }
    double value(std::size_t channel, double t) const;
    /// All channels at time t, written into `out`.
    void values(double t, std::span<double> out) const;

    const std::vector<double>& update_times() const { return times_; }

private:
    struct State {
        double v1;
        double v2;
    };
    struct Transition {
        double m11, m12, m21, m22;
        State apply(const State& s, double input) const {
            const double d1 = s.v1 - input;
            const double d2 = s.v2 - input;
            return {input + m11 * d1 + m12 * d2, input + m21 * d1 + m22 * d2};
        }
    };
    Transition transition(double dt) const;
    std::size_t segment(double t) const;

    FilterParams params_;
    std::vector<double> times_;
    std::vector<std::vector<double>> levels_;
    std::vector<std::vector<State>> states_;  // state at each update instant
};

}  // namespace ivdac
