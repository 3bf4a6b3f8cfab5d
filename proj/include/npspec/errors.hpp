// Copyright the npspec authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace npspec {

// Base class for all npspec failures. Subclasses express the contract that
// was violated; the CLI maps them onto process exit codes.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Precondition violations (CLI exit code 2).
class InvalidAngle : public Error {
 public:
  explicit InvalidAngle(const std::string& what) : Error(what) {}
};
class DegenerateContrast : public Error {
 public:
  explicit DegenerateContrast(const std::string& what) : Error(what) {}
};
class NoRealRoot : public Error {
 public:
  explicit NoRealRoot(const std::string& what) : Error(what) {}
};
class NoImaginaryRoot : public Error {
 public:
  explicit NoImaginaryRoot(const std::string& what) : Error(what) {}
};
class NotSingular : public Error {
 public:
  explicit NotSingular(const std::string& what) : Error(what) {}
};
class CriticalContrast : public Error {
 public:
  explicit CriticalContrast(const std::string& what) : Error(what) {}
};
class MeshTooCoarse : public Error {
 public:
  explicit MeshTooCoarse(const std::string& what) : Error(what) {}
};

// Numeric failures (CLI exit code 3).
class EigensolveFailure : public Error {
 public:
  explicit EigensolveFailure(const std::string& what) : Error(what) {}
};
class SolveFailure : public Error {
 public:
  explicit SolveFailure(const std::string& what) : Error(what) {}
};
class NearSingularSystem : public Error {
 public:
  explicit NearSingularSystem(const std::string& what) : Error(what) {}
};
class MeshGenerationFailure : public Error {
 public:
  explicit MeshGenerationFailure(const std::string& what) : Error(what) {}
};

// Configuration problems (CLI exit code 1).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

}  // namespace npspec
