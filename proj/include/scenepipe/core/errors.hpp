#pragma once

#include <stdexcept>
#include <string>

namespace scenepipe {

// Root of every error the library throws. Subclasses name the failed contract.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error { using Error::Error; };
class BoundsError : public Error { using Error::Error; };
class ArgumentError : public Error { using Error::Error; };
class AlignmentError : public Error { using Error::Error; };
class NumericError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class DecodeError : public Error { using Error::Error; };
class ChannelError : public Error { using Error::Error; };
class PersistenceError : public Error { using Error::Error; };
class CheckpointError : public Error { using Error::Error; };
class PriorLoadError : public Error { using Error::Error; };

}  // namespace scenepipe
