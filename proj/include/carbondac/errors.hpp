#ifndef CARBONDAC_ERRORS_HPP_
#define CARBONDAC_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace carbondac {

// Broad category used by the CLI to pick an exit code.
enum class ErrorCategory { kData, kRuntime };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

#define CARBONDAC_DEFINE_ERROR(Name, Category)                      \
  class Name : public Error {                                       \
   public:                                                          \
    explicit Name(const std::string& what)                          \
        : Error(ErrorCategory::Category, #Name ": " + what) {}      \
  };

// Input data problems.
CARBONDAC_DEFINE_ERROR(DimensionMismatch, kData)
CARBONDAC_DEFINE_ERROR(InfeasibleInstance, kData)
CARBONDAC_DEFINE_ERROR(ParseError, kData)
CARBONDAC_DEFINE_ERROR(SchemaVersionError, kData)
CARBONDAC_DEFINE_ERROR(SpecInfeasible, kData)
CARBONDAC_DEFINE_ERROR(InsufficientInstances, kData)
CARBONDAC_DEFINE_ERROR(MissingArtifact, kData)
CARBONDAC_DEFINE_ERROR(EmptyPool, kData)
CARBONDAC_DEFINE_ERROR(EmptyPopulation, kData)
CARBONDAC_DEFINE_ERROR(IncompleteResults, kData)

// Contract violations and numerical failures at run time.
CARBONDAC_DEFINE_ERROR(InvalidSchedule, kRuntime)
CARBONDAC_DEFINE_ERROR(ParameterOutOfRange, kRuntime)
CARBONDAC_DEFINE_ERROR(OutOfBounds, kRuntime)
CARBONDAC_DEFINE_ERROR(DegenerateNormalization, kRuntime)
CARBONDAC_DEFINE_ERROR(EpisodeFinished, kRuntime)
CARBONDAC_DEFINE_ERROR(NonFiniteOutput, kRuntime)
CARBONDAC_DEFINE_ERROR(NonFiniteLoss, kRuntime)
CARBONDAC_DEFINE_ERROR(IoError, kRuntime)

#undef CARBONDAC_DEFINE_ERROR

}  // namespace carbondac

#endif  // CARBONDAC_ERRORS_HPP_
