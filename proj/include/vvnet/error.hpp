#pragma once

#include <stdexcept>
#include <string>

namespace vvnet {

/// Base of every error raised by the library. The CLI maps subclasses to
/// exit codes, so keep the hierarchy flat.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define VVNET_DEFINE_ERROR(Name)            \
  class Name : public Error {               \
   public:                                  \
    explicit Name(const std::string& what)  \
        : Error(#Name ": " + what) {}       \
  }

// tensor-core / nn-layers
VVNET_DEFINE_ERROR(ShapeMismatch);
VVNET_DEFINE_ERROR(NonScalarLoss);
VVNET_DEFINE_ERROR(IndivisibleSpatialDims);
VVNET_DEFINE_ERROR(EmptyMask);

// geometry / projection
VVNET_DEFINE_ERROR(InvalidDepth);
VVNET_DEFINE_ERROR(DegenerateDepth);
VVNET_DEFINE_ERROR(IndivisibleDims);
VVNET_DEFINE_ERROR(NonIntegerScale);
VVNET_DEFINE_ERROR(TableMismatch);

// model / metrics
VVNET_DEFINE_ERROR(InvalidConfig);
VVNET_DEFINE_ERROR(VariantMismatch);
VVNET_DEFINE_ERROR(EmptyEvalDomain);

// file formats
VVNET_DEFINE_ERROR(BadMagic);
VVNET_DEFINE_ERROR(TruncatedFile);
VVNET_DEFINE_ERROR(DimOverflow);
VVNET_DEFINE_ERROR(IoError);
VVNET_DEFINE_ERROR(ParseError);

#undef VVNET_DEFINE_ERROR

}  // namespace vvnet
