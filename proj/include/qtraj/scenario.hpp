#ifndef QTRAJ_SCENARIO_HPP
#define QTRAJ_SCENARIO_HPP

#include <map>
#include <string>
#include <vector>

#include "qtraj/common.hpp"

namespace qtraj {

// Parse error carrying the line/column of the offending token.
struct ScenarioError : std::runtime_error {
    int line, col;
    ScenarioError(const std::string& msg, int line_, int col_)
        : std::runtime_error(msg + " (line " + std::to_string(line_) + ", col " +
                             std::to_string(col_) + ")"),
          line(line_), col(col_) {}
};

// A run description: `kind = ...` plus sectioned key = value settings.
// Keys inside a [section] are stored as "section.key". Unknown keys are
// rejected by the per-kind validators in the CLI.
struct Scenario {
    std::string kind;
    std::map<std::string, std::string> values; // canonical text form
    uint64_t seed = 0;
    int n_threads = 1;

    bool has(const std::string& key) const { return values.count(key) > 0; }
    double get_num(const std::string& key) const;
    double get_num(const std::string& key, double fallback) const;
    long get_int(const std::string& key, long fallback) const;
    std::string get_str(const std::string& key, const std::string& fallback) const;
};

// Strict parser for the scenario text format:
//   # comment
//   kind = spectrum
//   [grid]
//   omega_max = 1.0e6
Scenario parse_scenario(const std::string& text);

// canonical serialization: kind first, remaining keys sorted
std::string serialize_scenario(const Scenario& s);

} // namespace qtraj

#endif
