#pragma once

#include <stdexcept>
#include <string>

namespace ruleopt {

/// Raised for every recoverable failure in the library. The message is
/// prefixed with the module that produced it ("dataset: ...").
class Error : public std::runtime_error {
public:
    Error(const std::string& module, const std::string& what)
        : std::runtime_error(module + ": " + what), module_(module) {}

    const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
};

}  // namespace ruleopt
