/**
 * @file dfrc/errors.hpp
 * @brief Exception hierarchy shared by every module.
 *
 * Each error carries a stable machine-readable code (the class name) so the
 * CLI can emit a structured error record.
 */
#pragma once

#include <stdexcept>
#include <string>

namespace dfrc {

class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define DFRC_DEFINE_ERROR(Name)                                          \
  class Name : public Error {                                            \
   public:                                                               \
    explicit Name(const std::string& message) : Error(#Name, message) {} \
  }

DFRC_DEFINE_ERROR(ShapeError);
DFRC_DEFINE_ERROR(NotHermitian);
DFRC_DEFINE_ERROR(NotPositiveSemidefinite);
DFRC_DEFINE_ERROR(NonFiniteValue);
DFRC_DEFINE_ERROR(ConfigError);
DFRC_DEFINE_ERROR(DegeneratePlacement);
DFRC_DEFINE_ERROR(InfeasibleQoS);
DFRC_DEFINE_ERROR(SolverError);
DFRC_DEFINE_ERROR(RankDeficientUser);
DFRC_DEFINE_ERROR(ResidualNotPSD);
DFRC_DEFINE_ERROR(DegenerateBeamformer);
DFRC_DEFINE_ERROR(DegenerateLikelihood);
DFRC_DEFINE_ERROR(IOError);

#undef DFRC_DEFINE_ERROR

}  // namespace dfrc
