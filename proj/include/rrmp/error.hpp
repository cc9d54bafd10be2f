#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace rrmp {

// Engine-wide exception carrying a stable machine-readable code
// ("ContradictoryConfig", "ScriptExhausted", ...) next to the human message.
// CLI exit codes and tests key off code(), not the message text.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

}  // namespace rrmp
