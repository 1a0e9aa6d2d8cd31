#pragma once

#include <iostream>
#include <stdexcept>
#include <string>

namespace crossq {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A family parameter is outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// A point lies outside the set of physical states (violates positivity).
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// Caller broke a precondition: wrong dimensions, non-finite input, etc.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Rejection sampling ran out of its draw budget.
class SamplingExhaustedError : public Error {
 public:
  using Error::Error;
};

// Experiment configuration is malformed or inconsistent.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// File could not be read or written; message carries the path.
class IoError : public Error {
 public:
  using Error::Error;
};

// Numerical routine failed to reach its target.
class NumericalError : public Error {
 public:
  using Error::Error;
};

inline void warn(const std::string& msg) { std::cerr << "[crossq] warning: " << msg << '\n'; }

}  // namespace crossq
