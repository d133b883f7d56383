#pragma once

#include <stdexcept>
#include <string>

namespace wavehurst {

/// Parameter outside its admissible domain (H not in (0,1), sigma <= 0, ...).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Grid size not admissible (odd N, N above the memory guard, wrong length).
class SizeError : public std::length_error {
public:
    using std::length_error::length_error;
};

/// Malformed input file or row.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical routine could not deliver a valid result.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace wavehurst
