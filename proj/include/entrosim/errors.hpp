#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

namespace entrosim {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File-system failure; the message always carries the offending path.
class IoError : public Error {
 public:
  IoError(const std::filesystem::path& path, const std::string& what)
      : Error(path.string() + ": " + what), path_(path) {}

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

/// Malformed on-disk data (bad magic, truncated blob, bad JSON header).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Tensor/config dimensions that do not fit together.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf showed up where only finite values are allowed.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument or configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace entrosim
