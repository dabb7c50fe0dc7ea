#pragma once

#include <stdexcept>
#include <string>

namespace nkdb {

/// Malformed or unusable input data. The message names the offending
/// file, column or row where one is known.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A model file that cannot be read back: wrong magic, unsupported
/// format version, or missing/ill-typed fields.
class ModelFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace nkdb
