#pragma once

// Subcommands generate, detect, session, eval, report. Every run can be
// driven by a config file (--config run.toml); flags given on the command
// line override its values, and secrets come only from the environment.
//
// Exit codes: 0 success (detect: no anomalies), 1 detect found anomalies,
// 2 any error.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mcguard/config.hpp"
#include "mcguard/rulekit.hpp"
#include "mcguard/scenario.hpp"

namespace mcguard::cli {

inline constexpr int kExitClean = 0;
inline constexpr int kExitAnomalies = 1;
inline constexpr int kExitError = 2;

inline constexpr int kOutputSchemaVersion = 1;

struct RunConfig {
    std::string protocol = "auto";
    Level level = Level::FT;
    int frequency = 60;
    std::string backend = "rule-oracle";  // rule-oracle | scripted | remote-chat
    std::string script;                   // scripted backend: transcript or actions file
    std::string input;                    // capture (.csv, .pcap, .pcapng)
    std::string spec;                     // scenario spec file
    std::optional<ScenarioSpec> scenario; // inline [scenario] table of the config
    std::string labels;
    std::string output_dir = ".";
    std::optional<uint64_t> seed;
    size_t turn_batch = 100;
    size_t context_window = 20;
    std::string query;
    std::string method;  // eval: ToD | HITL

    // 0 or 1 of input / spec / scenario; throws UsageError for more.
    size_t input_sources() const;
};

// Keys: protocol, level, frequency, backend, script, input, spec, labels,
// output_dir, seed, turn_batch, context_window, query, method, [scenario].
// `given` names the flags set on the command line; those keys are skipped.
void apply_config(const ConfigTable& t, RunConfig& c, const std::vector<std::string>& given);

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mcguard::cli
