#pragma once

#include <stdexcept>
#include <string>

namespace pedx {

/// Malformed or out-of-contract input (bad config, schema violation, invalid parameters).
/// The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Failure while computing on valid input (diverging training, unwritable output, ...).
/// The CLI maps this to exit code 1.
class RuntimeFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw InputError(what);
}

}  // namespace pedx
