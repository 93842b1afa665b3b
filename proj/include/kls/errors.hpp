#pragma once

#include <stdexcept>
#include <string>

namespace kls {

// Every library error derives from Error so callers can catch the family.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidParams : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };
struct BadBox : Error { using Error::Error; };
struct TooLarge : Error { using Error::Error; };
struct GapMismatch : Error { using Error::Error; };
struct DuplicateSite : Error { using Error::Error; };
struct BoxTooLarge : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct CapacityError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

}  // namespace kls
