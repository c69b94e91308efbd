#pragma once

#include <stdexcept>
#include <string>

namespace afr {

// Root of every error raised by the toolkit. Each subclass names one failure
// kind so callers (CLI, HTTP handlers, tests) can dispatch on type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define AFR_DEFINE_ERROR(Name)          \
  class Name : public Error {           \
   public:                              \
    using Error::Error;                 \
  }

// Trace model.
AFR_DEFINE_ERROR(ParseError);
AFR_DEFINE_ERROR(ValidationError);
AFR_DEFINE_ERROR(IoError);
AFR_DEFINE_ERROR(InvalidProfile);

// Features.
AFR_DEFINE_ERROR(DimensionMismatch);
AFR_DEFINE_ERROR(IndexOutOfRange);
AFR_DEFINE_ERROR(EmptyDataset);

// Reward and environment.
AFR_DEFINE_ERROR(LevelOutOfRange);
AFR_DEFINE_ERROR(LengthMismatch);
AFR_DEFINE_ERROR(EpisodeFinished);
AFR_DEFINE_ERROR(ActionOutOfRange);

// Network engine.
AFR_DEFINE_ERROR(InvalidTopology);
AFR_DEFINE_ERROR(ShapeMismatch);
AFR_DEFINE_ERROR(NonFiniteGradient);
AFR_DEFINE_ERROR(VersionMismatch);
AFR_DEFINE_ERROR(CorruptFile);

// Service.
AFR_DEFINE_ERROR(InvalidRange);
AFR_DEFINE_ERROR(BadRequest);
AFR_DEFINE_ERROR(CheckpointMissing);
AFR_DEFINE_ERROR(BadThresholds);
AFR_DEFINE_ERROR(BindError);

#undef AFR_DEFINE_ERROR

}  // namespace afr
