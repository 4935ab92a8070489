#pragma once

#include <stdexcept>
#include <string>

namespace iabsim {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters or an unusable scenario.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Broken tree, missing bearer, or a node that cannot attach anywhere.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// A scheduling decision arrived after the subframe it refers to was fixed.
class CausalityError : public Error {
 public:
  using Error::Error;
};

/// Packet carrying a tunnel id that the node has no entry for.
class RoutingError : public Error {
 public:
  using Error::Error;
};

}  // namespace iabsim
