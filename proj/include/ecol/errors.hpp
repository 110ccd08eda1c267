#pragma once

#include <stdexcept>
#include <string>

namespace ecol {

// Malformed input data or bad usage; the CLI maps this to exit code 2.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace ecol
