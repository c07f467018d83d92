// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMPROBE_ERRORS_HPP
#define BEAMPROBE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace beamprobe {

// Bad or incomplete configuration (CLI exit code 2).
class ConfigError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// Missing, unreadable or inconsistent data files (CLI exit code 3).
class DataError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

}  // namespace beamprobe

#endif  // BEAMPROBE_ERRORS_HPP
