#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace iaip {

enum class ErrorCode {
  InvalidArgument,
  Parse,
  Shape,
  NonFinite,
  ConstantColumn,
  NotConverged,
  Io,
};

const char* to_string(ErrorCode code) noexcept;

// Every failure raised by the library is an Error (or a subclass) carrying a
// machine-readable code. Nothing else escapes a public function except
// std::bad_alloc.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised by the logistic solver when max_iter is exhausted. Carries the best
// iterate seen (original {0,1} scale) and its KKT residual.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double tau, std::vector<double> betas,
                   double residual, std::size_t penalty_index = npos)
      : Error(ErrorCode::NotConverged, what),
        tau_(tau),
        betas_(std::move(betas)),
        residual_(residual),
        penalty_index_(penalty_index) {}

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  double tau() const noexcept { return tau_; }
  const std::vector<double>& betas() const noexcept { return betas_; }
  double residual() const noexcept { return residual_; }
  std::size_t penalty_index() const noexcept { return penalty_index_; }

 private:
  double tau_;
  std::vector<double> betas_;
  double residual_;
  std::size_t penalty_index_;
};

}  // namespace iaip
