#pragma once

#include <stdexcept>
#include <string>

namespace atomdetect {

/// A solver could not meet its accuracy or conditioning contract.
class NumericalError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

} // namespace atomdetect
