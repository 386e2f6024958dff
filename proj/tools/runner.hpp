#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "jellium/errors.hpp"

namespace jellium::cli {

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("ConfigError", what) {}
};

extern const std::vector<std::string> kRuns;

// Fills every default for `run` and rejects unknown keys, naming the first
// one by its dotted path. A manifest (object with "resolved_config") is
// accepted and unwrapped.
nlohmann::json resolve_config(const nlohmann::json& raw, const std::string& run);

// Writes the run's artifacts plus manifest.json into config["output_dir"].
// Returns the file names written, manifest last.
std::vector<std::string> run_experiment(const nlohmann::json& resolved, const std::string& run);

// Full command line entry point; returns the process exit code.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace jellium::cli
