#pragma once

#include <stdexcept>
#include <string>

namespace copolab {

/// Base of every exception the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define COPOLAB_DEFINE_ERROR(Name)        \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  }

COPOLAB_DEFINE_ERROR(ConfigError);
COPOLAB_DEFINE_ERROR(UnknownTask);
COPOLAB_DEFINE_ERROR(EpisodeFinished);
COPOLAB_DEFINE_ERROR(NoSolution);
COPOLAB_DEFINE_ERROR(ContextOverflow);
COPOLAB_DEFINE_ERROR(CheckpointError);
COPOLAB_DEFINE_ERROR(GroupTooSmall);
COPOLAB_DEFINE_ERROR(EmptyAction);
COPOLAB_DEFINE_ERROR(EmptyTrajectory);
COPOLAB_DEFINE_ERROR(DivergenceDetected);
COPOLAB_DEFINE_ERROR(NonFiniteLoss);
COPOLAB_DEFINE_ERROR(SuiteMismatch);
COPOLAB_DEFINE_ERROR(IoError);

#undef COPOLAB_DEFINE_ERROR

}  // namespace copolab
