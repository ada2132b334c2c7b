#ifndef SENSEDEF_ERROR_HPP
#define SENSEDEF_ERROR_HPP

#include <stdexcept>
#include <string>

namespace sensedef {

/// Bad or unreadable input data: malformed files, schema violations,
/// inconsistent dimensions. The CLI maps these to exit code 2.
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Caller broke a precondition (mismatched shapes, empty sequences).
class ArgumentError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

inline std::string at_line(const std::string& path, std::size_t line) {
  return path + ":" + std::to_string(line) + ": ";
}

} // namespace sensedef

#endif // SENSEDEF_ERROR_HPP
