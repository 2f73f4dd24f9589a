#pragma once

#include <stdexcept>
#include <string>

namespace mlml {

/// Raised when a caller breaks an operation's precondition (bad index,
/// out-of-range argument, mismatched dimensions).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Raised when input data cannot support the requested computation
/// (no observed entries, no positives, malformed files).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ContractError(msg);
}

}  // namespace mlml
