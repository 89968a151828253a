#pragma once

#include <stdexcept>
#include <string>

namespace handshake {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define HANDSHAKE_DEFINE_ERROR(Name)          \
  class Name : public Error {                 \
   public:                                    \
    using Error::Error;                       \
  }

HANDSHAKE_DEFINE_ERROR(InvalidArgument);
HANDSHAKE_DEFINE_ERROR(UnreachableTarget);
HANDSHAKE_DEFINE_ERROR(NominalTooSmall);
HANDSHAKE_DEFINE_ERROR(NumericalDivergence);
HANDSHAKE_DEFINE_ERROR(Exhausted);
HANDSHAKE_DEFINE_ERROR(PassiveUndefined);
HANDSHAKE_DEFINE_ERROR(EmptySequence);
HANDSHAKE_DEFINE_ERROR(DegenerateSignal);
HANDSHAKE_DEFINE_ERROR(ZeroVariance);
HANDSHAKE_DEFINE_ERROR(ConfigInvalid);
HANDSHAKE_DEFINE_ERROR(IoError);

#undef HANDSHAKE_DEFINE_ERROR

}  // namespace handshake
