#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace selboot {

// Failure categories surfaced by the library. The CLI maps these onto exit
// codes, so keep the grouping in exit_code_for() in sync when adding one.
enum class ErrorKind {
  invalid_argument,
  io,
  parse,
  rank_deficient,
  leverage_one,
  degenerate_noise,
  not_converged,
  underdetermined_fit,
  singular_fit,
  no_converged_fit,
  nonsmooth_at_expansion,
  bracket_failure,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_argument: return "InvalidArgument";
    case ErrorKind::io: return "IoError";
    case ErrorKind::parse: return "ParseError";
    case ErrorKind::rank_deficient: return "RankDeficient";
    case ErrorKind::leverage_one: return "LeverageOne";
    case ErrorKind::degenerate_noise: return "DegenerateNoise";
    case ErrorKind::not_converged: return "NotConverged";
    case ErrorKind::underdetermined_fit: return "UnderdeterminedFit";
    case ErrorKind::singular_fit: return "SingularFit";
    case ErrorKind::no_converged_fit: return "NoConvergedFit";
    case ErrorKind::nonsmooth_at_expansion: return "NonsmoothAtExpansion";
    case ErrorKind::bracket_failure: return "BracketFailure";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// 0 ok, 2 I/O or parse, 3 numerical degeneracy, 4 fit failure.
constexpr int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::io:
    case ErrorKind::parse:
    case ErrorKind::invalid_argument:
      return 2;
    case ErrorKind::rank_deficient:
    case ErrorKind::leverage_one:
    case ErrorKind::degenerate_noise:
      return 3;
    default:
      return 4;
  }
}

inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(ErrorKind::invalid_argument, message);
}

}  // namespace selboot
