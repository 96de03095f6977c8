#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace offres {

/// Base of every error thrown by the library. `kind()` is a stable short tag
/// used by the CLI for machine-readable failure lines.
class Error : public std::runtime_error
{
public:
  Error(std::string kind, std::string const &what)
    : std::runtime_error(what)
    , kind_(std::move(kind))
  {
  }
  std::string const &kind() const noexcept { return kind_; }

private:
  std::string kind_;
};

struct ValidationError : Error
{
  explicit ValidationError(std::string const &what)
    : Error("validation", what)
  {
  }
};

/// Raised by direct-sum oracles when the requested work exceeds the guard.
struct SizeGuardError : Error
{
  explicit SizeGuardError(std::string const &what)
    : Error("size_guard", what)
  {
  }
};

struct IoError : Error
{
  explicit IoError(std::string const &what)
    : Error("io", what)
  {
  }
};

struct DivergenceError : Error
{
  explicit DivergenceError(std::string const &what)
    : Error("divergence", what)
  {
  }
};

class ConfigError : public Error
{
public:
  ConfigError(std::string pointer, std::string const &what)
    : Error("config", pointer + ": " + what)
    , pointer_(std::move(pointer))
  {
  }
  std::string const &pointer() const noexcept { return pointer_; }

private:
  std::string pointer_;
};

template <typename E = ValidationError>
inline void require(bool cond, std::string const &msg)
{
  if (!cond) { throw E(msg); }
}

} // namespace offres
