#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "bassl/trainer.hpp"

namespace bassl {

// `key = value` per line, `#` starts a comment. Keys are the TrainConfig /
// AugmentationSpec field names. Unknown or repeated keys and unparsable
// values throw ConfigError whose message starts with the key. Missing keys
// keep their defaults. The result is validated.
TrainConfig parse_config(std::string_view text);
TrainConfig load_config(const std::filesystem::path& path);

// Every key with its current value, in a form parse_config accepts.
std::string format_config(const TrainConfig& config);

}  // namespace bassl
