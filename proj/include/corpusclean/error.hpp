#pragma once

#include <stdexcept>
#include <string>

namespace corpusclean {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad configuration; the CLI maps this to exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace corpusclean
