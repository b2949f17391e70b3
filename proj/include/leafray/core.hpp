// leafray - core aliases and error reporting
#ifndef LEAFRAY_CORE_HPP
#define LEAFRAY_CORE_HPP

#include <complex>
#include <stdexcept>
#include <string>
#include <cmath>
#include <cstdint>

namespace leafray {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr cplx kI{0.0, 1.0};

enum class ErrorCode {
  InvalidArgument,
  SingularGauge,
  FrameMismatch,
  SupportMargin,
  NonUnitVector,
  NyquistResolution,
  NonConvergence,
  InvertibilityCertificate,
  TrappedGeodesic,
  OutsideDomain,
  MomentPrecondition,
  LogBranch,
  ConfigError,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
  throw Error(code, msg);
}

inline void require(bool cond, ErrorCode code, const std::string& msg) {
  if (!cond) fail(code, msg);
}

inline bool finite(cplx z) {
  return std::isfinite(z.real()) && std::isfinite(z.imag());
}

}  // namespace leafray

#endif
