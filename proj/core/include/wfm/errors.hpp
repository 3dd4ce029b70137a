#pragma once

#include <stdexcept>
#include <string>

namespace wfm {

/// Base of every error thrown by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// File or stream level problems (missing files, malformed content).
struct IoError : Error {
  using Error::Error;
};
struct ParseError : IoError {
  using IoError::IoError;
};

/// Numerical / precondition failures raised by the math modules.
struct NumericError : Error {
  using Error::Error;
};

#define WFM_DEFINE_NUMERIC_ERROR(Name)      \
  struct Name : NumericError {              \
    using NumericError::NumericError;       \
    Name() : NumericError(#Name) {}         \
  }

WFM_DEFINE_NUMERIC_ERROR(BehindCamera);
WFM_DEFINE_NUMERIC_ERROR(NonPositiveDepth);
WFM_DEFINE_NUMERIC_ERROR(InvalidRotation);
WFM_DEFINE_NUMERIC_ERROR(InvalidArgument);
WFM_DEFINE_NUMERIC_ERROR(DegenerateConfiguration);
WFM_DEFINE_NUMERIC_ERROR(SizeMismatch);
WFM_DEFINE_NUMERIC_ERROR(ScaleNotUnity);
WFM_DEFINE_NUMERIC_ERROR(InsufficientOverlap);
WFM_DEFINE_NUMERIC_ERROR(EmptyInput);
WFM_DEFINE_NUMERIC_ERROR(EmptyCloud);
WFM_DEFINE_NUMERIC_ERROR(EmptyCorrespondences);
WFM_DEFINE_NUMERIC_ERROR(TooFewRegistrations);
WFM_DEFINE_NUMERIC_ERROR(NonFiniteLoss);
WFM_DEFINE_NUMERIC_ERROR(GradientCheckFailed);
WFM_DEFINE_NUMERIC_ERROR(FrameMisalignment);
WFM_DEFINE_NUMERIC_ERROR(NoValidJoints);
WFM_DEFINE_NUMERIC_ERROR(NoContactFrames);
WFM_DEFINE_NUMERIC_ERROR(EmptySurface);
WFM_DEFINE_NUMERIC_ERROR(LengthMismatch);
WFM_DEFINE_NUMERIC_ERROR(ZeroDisplacement);
WFM_DEFINE_NUMERIC_ERROR(EmptyObservations);
WFM_DEFINE_NUMERIC_ERROR(SpecInvalid);

#undef WFM_DEFINE_NUMERIC_ERROR

}  // namespace wfm
