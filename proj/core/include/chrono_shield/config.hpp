#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "chrono_shield/experiment.hpp"

namespace chrono_shield {

struct ConfigKey {
  std::string_view name;
  std::string_view description;
};

// Every key accepted by apply_config, in documentation order.
const std::vector<ConfigKey>& config_keys();

// Line-oriented "key = value" text; '#' starts a comment. A "seed" line is
// applied before the other keys wherever it appears. Throws InvalidConfig
// naming the offending line.
void apply_config(ExperimentConfig& config, std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Current values of every key, loadable by apply_config.
std::string dump_config(const ExperimentConfig& config);

}  // namespace chrono_shield
