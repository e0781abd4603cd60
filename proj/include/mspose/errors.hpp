#pragma once

#include <stdexcept>
#include <string>

namespace mspose {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

class DegenerateInput : public Error {
public:
    using Error::Error;
};

class TopologyMismatch : public Error {
public:
    using Error::Error;
};

class InvalidWindow : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Raised when a loss turns non-finite. The trainer restores the last good
// parameters before throwing.
class TrainingDiverged : public Error {
public:
    using Error::Error;
};

}  // namespace mspose
