#pragma once

// Resolution of command settings: built-in defaults, then a key=value config
// file, then command-line flags.

#include <map>
#include <string>
#include <string_view>

#include "smile/trainer.hpp"

namespace smile::cli {

using Settings = std::map<std::string, std::string>;

// Keys accepted in config files and as --<key> flags (except "config").
const std::vector<std::string>& known_keys();

// Parses key=value lines. Blank lines and lines starting with '#' are
// skipped; unknown keys and malformed lines throw ContractError naming the line.
Settings parse_config_text(std::string_view text, std::string_view origin);
Settings load_config_file(const std::string& path);

// Later layers win.
Settings merge(const Settings& lower, const Settings& upper);

// Applies settings on top of the defaults of TrainConfig.
TrainConfig to_train_config(const Settings& s);

std::string preset_name(const Settings& s);

}  // namespace smile::cli
