#include "iaip/error.hpp"

namespace iaip {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::Parse:           return "parse error";
    case ErrorCode::Shape:           return "shape mismatch";
    case ErrorCode::NonFinite:       return "non-finite value";
    case ErrorCode::ConstantColumn:  return "constant column";
    case ErrorCode::NotConverged:    return "solver did not converge";
    case ErrorCode::Io:              return "i/o error";
  }
  return "unknown error";
}

}  // namespace iaip
