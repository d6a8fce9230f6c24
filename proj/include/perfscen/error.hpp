// error.hpp
#pragma once

#include <stdexcept>
#include <string>

namespace perfscen {

// Raised when a caller-supplied parameter violates a documented invariant.
// `field()` names the offending parameter so CLI and config layers can
// report it verbatim.
class InvalidParameter : public std::invalid_argument {
public:
    InvalidParameter(std::string field, const std::string& what)
        : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

inline void require(bool ok, const char* field, const std::string& what) {
    if (!ok) throw InvalidParameter(field, what);
}

}  // namespace perfscen
