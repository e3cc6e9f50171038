#pragma once

#include <stdexcept>
#include <string>

namespace nsgp {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonSymmetric : Error {
  using Error::Error;
};
struct NotPositiveDefinite : Error {
  using Error::Error;
};
struct DimensionMismatch : Error {
  using Error::Error;
};
struct NonPositiveParam : Error {
  using Error::Error;
};
struct LayoutMismatch : Error {
  using Error::Error;
};
struct NonFinite : Error {
  using Error::Error;
};
struct Diverged : Error {
  using Error::Error;
};
struct MTooLarge : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};
struct EmptyDataset : Error {
  using Error::Error;
};
struct DegenerateColumn : Error {
  using Error::Error;
};
struct NonPositiveVariance : Error {
  using Error::Error;
};
struct EmptyPool : Error {
  using Error::Error;
};
struct UnknownDataset : Error {
  using Error::Error;
};
struct MissingTruth : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

}  // namespace nsgp
