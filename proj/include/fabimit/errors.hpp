#pragma once

#include <stdexcept>
#include <string>

namespace fabimit {

// Process exit codes used by the command-line tools.
enum class ExitCode : int { kOk = 0, kConfig = 2, kMissingArtifact = 3, kRuntime = 4 };

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, ExitCode code = ExitCode::kRuntime)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const { return code_; }

 private:
  ExitCode code_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what, ExitCode::kConfig) {}
};

class ArtifactError : public Error {
 public:
  explicit ArtifactError(const std::string& what) : Error(what, ExitCode::kMissingArtifact) {}
};

// Malformed or incompatible file contents.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(what, ExitCode::kMissingArtifact) {}
};

class TrainingDiverged : public Error {
 public:
  explicit TrainingDiverged(const std::string& what) : Error(what, ExitCode::kRuntime) {}
};

}  // namespace fabimit
