#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rfa {

enum class ErrorKind {
  InvalidParameter,
  RankDeficient,
  Singular,
  NotOrthonormal,
  Degenerate,
  InsufficientData,
  AllChainsFailed,
  MissingDataUnsupported,
  ZeroTruth,
  ZeroDenominator,
  EmptyInput,
  NotRepairable,
  Io,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidParameter: return "InvalidParameter";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::Singular: return "Singular";
    case ErrorKind::NotOrthonormal: return "NotOrthonormal";
    case ErrorKind::Degenerate: return "Degenerate";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::AllChainsFailed: return "AllChainsFailed";
    case ErrorKind::MissingDataUnsupported: return "MissingDataUnsupported";
    case ErrorKind::ZeroTruth: return "ZeroTruth";
    case ErrorKind::ZeroDenominator: return "ZeroDenominator";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::NotRepairable: return "NotRepairable";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the kinds above so that
/// callers (the CLI in particular) can map it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// True for the failures that stem from the numerics rather than from the input.
constexpr bool is_numerical(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::RankDeficient:
    case ErrorKind::Singular:
    case ErrorKind::Degenerate:
    case ErrorKind::InsufficientData:
    case ErrorKind::AllChainsFailed:
    case ErrorKind::NotRepairable:
    case ErrorKind::ZeroTruth:
    case ErrorKind::ZeroDenominator:
      return true;
    default:
      return false;
  }
}

}  // namespace rfa
