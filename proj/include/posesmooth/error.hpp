#pragma once

#include <stdexcept>
#include <string>

namespace posesmooth
{
// Bad input or configuration. The CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument
{
 public:
   explicit ValidationError(const std::string& what)
       : std::invalid_argument(what)
   {}
};

// Numerical or I/O failure at run time (exit code 1).
class RuntimeError : public std::runtime_error
{
 public:
   explicit RuntimeError(const std::string& what)
       : std::runtime_error(what)
   {}
};

} // namespace posesmooth
