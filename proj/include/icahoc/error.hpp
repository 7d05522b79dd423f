#ifndef ICAHOC_ERROR_HPP
#define ICAHOC_ERROR_HPP

#include <stdexcept>
#include <string>

namespace icahoc {

/// Malformed or inconsistent input data (files, shapes, vocabularies).
class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// A numerical routine could not produce a meaningful result.
class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace icahoc

#endif
