#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace vcph {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Bad input: malformed files, invalid arguments, violated preconditions.
class InputError : public Error {
  public:
    using Error::Error;
};

class ParseError : public InputError {
  public:
    ParseError(std::size_t line, const std::string& what)
        : InputError("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

class ValidationError : public InputError {
  public:
    using InputError::InputError;
};

class ArgumentError : public InputError {
  public:
    using InputError::InputError;
};

class ConstantCovariate : public InputError {
  public:
    ConstantCovariate(int component, const std::string& what) : InputError(what), component_(component) {}
    int component() const noexcept { return component_; }

  private:
    int component_;
};

// The data cannot support the requested fit.
class NumericalError : public Error {
  public:
    using Error::Error;
};

class DegenerateNeighborhood : public NumericalError {
  public:
    DegenerateNeighborhood(double w0, double event_time, const std::string& what)
        : NumericalError(what), w0_(w0), event_time_(event_time) {}
    double w0() const noexcept { return w0_; }
    double event_time() const noexcept { return event_time_; }

  private:
    double w0_;
    double event_time_;
};

class NonIdentifiableFit : public NumericalError {
  public:
    using NumericalError::NumericalError;
};

class BandwidthTooSmall : public NumericalError {
  public:
    BandwidthTooSmall(std::vector<double> failing, const std::string& what)
        : NumericalError(what), failing_(std::move(failing)) {}
    const std::vector<double>& failing_points() const noexcept { return failing_; }

  private:
    std::vector<double> failing_;
};

} // namespace vcph
