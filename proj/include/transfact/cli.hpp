#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "transfact/error.hpp"

namespace transfact::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 2,
    kExitRefuse = 3,
    kExitData = 4,
    kExitNumeric = 5,
};

int exit_code_for(ErrorKind kind);

/// Every configurable key with its default. Config files may set any subset;
/// unknown keys are rejected.
nlohmann::json default_document();

/// defaults <- file <- flag overrides (RFC 6901 pointers).
nlohmann::json resolve_document(const nlohmann::json* file,
                                const std::vector<std::pair<std::string, nlohmann::json>>& overrides);

/// Fingerprint of a resolved per-command config (the "inputs" block, which
/// only records paths, is excluded).
std::uint64_t config_fingerprint(const nlohmann::json& resolved);

/// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace transfact::cli
