#pragma once

#include "mftlab/market_model.hpp"
#include "mftlab/utility.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mft {

/// Parse failure carrying a "source:line:column: message" description.
class ScenarioError : public InputError {
public:
    using InputError::InputError;
};

struct GridSettings {
    int x_nodes = 161;
    int y_nodes = 41;
    int z_nodes = 21;
    int t_steps = 0;  ///< 0: smallest stable count
    int max_stored_slices = 101;
};

struct McSettings {
    int steps = 250;
    int paths = 100000;
    std::uint64_t seed = 20240601;
};

struct OutputSettings {
    std::string directory = "out";
    std::vector<std::string> formats{"csv"};
};

struct Scenario {
    std::string name;
    MarketSpec spec;
    Utility utility = Utility::log();
    GridSettings grid;
    McSettings mc;
    OutputSettings output;
};

/// Loads a YAML scenario file. Unknown keys and malformed values are rejected
/// with the line and column of the offending node.
Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& text, const std::string& source = "<string>");

/// YAML text that parse_scenario maps back to the same scenario.
std::string scenario_to_yaml(const Scenario& s);

std::vector<std::string> preset_names();

/// Built-in scenarios:
///   merton        m = 0, n = 2, log utility (one fund)
///   merton-power  m = 0, n = 2, power utility delta = 0.5
///   index         one OU index factor, m = 1, n = 4 (two funds)
///   multi-index   two OU index factors, m = 2, n = 5 (three funds, 3-D state)
Scenario preset(const std::string& name);

/// Non-fatal remarks on a scenario, e.g. heavy grids.
std::vector<std::string> scenario_warnings(const Scenario& s);

}  // namespace mft
