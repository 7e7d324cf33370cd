#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ivdac {

// Raised for malformed input that the caller controls (bad channel names,
// wrong bitstream length, non-finite voltages). CLI exit code 1.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class FramingError : public InputError {
public:
    using InputError::InputError;
};

// Physics or scheduling failures: infeasible rates, no trapping well,
// unphysical sideband ratios. CLI exit code 2.
class PhysicsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ProtocolViolation : public PhysicsError {
public:
    using PhysicsError::PhysicsError;
};

class InfeasibleRate : public PhysicsError {
public:
    InfeasibleRate(const std::string& what, std::size_t bottleneck)
        : PhysicsError(what), bottleneck_packet(bottleneck) {}
    std::size_t bottleneck_packet;
};

class NoWellError : public PhysicsError {
public:
    using PhysicsError::PhysicsError;
};

class SaddleError : public PhysicsError {
public:
    using PhysicsError::PhysicsError;
};

class InfeasibleVoltages : public PhysicsError {
public:
    InfeasibleVoltages(const std::string& what, std::vector<std::string> binding)
        : PhysicsError(what), binding_channels(std::move(binding)) {}
    std::vector<std::string> binding_channels;
};

class DegenerateFit : public PhysicsError {
public:
    using PhysicsError::PhysicsError;
};

class UnphysicalRatio : public PhysicsError {
public:
    using PhysicsError::PhysicsError;
};

class ConvergenceError : public PhysicsError {
public:
    using PhysicsError::PhysicsError;
};

}  // namespace ivdac
