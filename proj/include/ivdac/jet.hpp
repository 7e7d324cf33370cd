#pragma once

#include <cmath>

#include <Eigen/Core>

namespace ivdac {

/// Value with exact gradient and Hessian in three variables (second-order
/// forward-mode differentiation). Enough arithmetic for the rectangle
/// potential: + - * / sqrt atan.
struct Jet {
    double v = 0.0;
    Eigen::Vector3d g = Eigen::Vector3d::Zero();
    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();

    static Jet constant(double value) { return {value, Eigen::Vector3d::Zero(), Eigen::Matrix3d::Zero()}; }
    static Jet variable(double value, int axis, double slope = 1.0) {
        Jet j = constant(value);
        j.g[axis] = slope;
        return j;
    }
};

inline Jet operator+(const Jet& a, const Jet& b) { return {a.v + b.v, a.g + b.g, a.h + b.h}; }
inline Jet operator-(const Jet& a, const Jet& b) { return {a.v - b.v, a.g - b.g, a.h - b.h}; }

inline Jet operator*(const Jet& a, const Jet& b) {
    Jet r;
    r.v = a.v * b.v;
    r.g = a.v * b.g + b.v * a.g;
    r.h = a.v * b.h + b.v * a.h + a.g * b.g.transpose() + b.g * a.g.transpose();
    return r;
}

inline Jet operator*(double s, const Jet& a) { return {s * a.v, s * a.g, s * a.h}; }

// f(u) for a scalar function with first and second derivative d1, d2 at u.v.
inline Jet chain(const Jet& u, double f, double d1, double d2) {
    return {f, d1 * u.g, d1 * u.h + d2 * u.g * u.g.transpose()};
}

inline Jet reciprocal(const Jet& u) {
    const double inv = 1.0 / u.v;
    return chain(u, inv, -inv * inv, 2.0 * inv * inv * inv);
}

inline Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }

inline Jet sqrt(const Jet& u) {
    const double s = std::sqrt(u.v);
    return chain(u, s, 0.5 / s, -0.25 / (s * u.v));
}

inline Jet atan(const Jet& u) {
    const double d = 1.0 / (1.0 + u.v * u.v);
    return chain(u, std::atan(u.v), d, -2.0 * u.v * d * d);
}

}  // namespace ivdac
