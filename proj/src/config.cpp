#include "bassl/config.hpp"

#include "bassl/errors.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace bassl {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
    T out{};
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw ConfigError(std::string(key) + ": cannot parse '" + std::string(value) + "'");
    }
    return out;
}

using Setter = std::function<void(TrainConfig&, std::string_view key, std::string_view value)>;

Setter size_field(std::size_t TrainConfig::*field) {
    return [field](TrainConfig& c, std::string_view k, std::string_view v) {
        c.*field = parse_number<std::size_t>(k, v);
    };
}

Setter double_field(double TrainConfig::*field) {
    return [field](TrainConfig& c, std::string_view k, std::string_view v) {
        c.*field = parse_number<double>(k, v);
    };
}

Setter aug_field(double AugmentationSpec::*field) {
    return [field](TrainConfig& c, std::string_view k, std::string_view v) {
        c.augmentation.*field = parse_number<double>(k, v);
    };
}

const std::map<std::string, Setter, std::less<>>& setters() {
    static const std::map<std::string, Setter, std::less<>> table{
        {"batch_size", size_field(&TrainConfig::batch_size)},
        {"patch_size", size_field(&TrainConfig::patch_size)},
        {"temperature", double_field(&TrainConfig::temperature)},
        {"momentum", double_field(&TrainConfig::momentum)},
        {"learning_rate", double_field(&TrainConfig::learning_rate)},
        {"weight_decay", double_field(&TrainConfig::weight_decay)},
        {"warmup_steps", size_field(&TrainConfig::warmup_steps)},
        {"total_steps", size_field(&TrainConfig::total_steps)},
        {"layers", size_field(&TrainConfig::layers)},
        {"expansion", size_field(&TrainConfig::expansion)},
        {"image_size", size_field(&TrainConfig::image_size)},
        {"synthetic_per_class", size_field(&TrainConfig::synthetic_per_class)},
        {"probe_steps", size_field(&TrainConfig::probe_steps)},
        {"seed",
         [](TrainConfig& c, std::string_view k, std::string_view v) {
             c.seed = parse_number<std::uint64_t>(k, v);
         }},
        {"framework",
         [](TrainConfig& c, std::string_view k, std::string_view v) {
             try {
                 c.framework = parse_framework(v);
             } catch (const ConfigError&) {
                 throw ConfigError(std::string(k) + ": unknown framework '" + std::string(v) + "'");
             }
         }},
        {"ba_apply",
         [](TrainConfig& c, std::string_view k, std::string_view v) {
             try {
                 c.ba_apply = parse_ba_apply(v);
             } catch (const ConfigError&) {
                 throw ConfigError(std::string(k) + ": unknown value '" + std::string(v) + "'");
             }
         }},
        {"crop_scale_min", aug_field(&AugmentationSpec::crop_scale_min)},
        {"crop_scale_max", aug_field(&AugmentationSpec::crop_scale_max)},
        {"flip_prob", aug_field(&AugmentationSpec::flip_prob)},
        {"grayscale_prob", aug_field(&AugmentationSpec::grayscale_prob)},
    };
    return table;
}

std::string number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

TrainConfig parse_config(std::string_view text) {
    TrainConfig config;
    std::set<std::string, std::less<>> seen;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(std::string(line) + ": expected 'key = value' on line " +
                              std::to_string(line_no));
        }
        const std::string_view key = trim(line.substr(0, eq));
        const std::string_view value = trim(line.substr(eq + 1));
        const auto it = setters().find(key);
        if (it == setters().end()) {
            throw ConfigError(std::string(key) + ": unknown config key on line " + std::to_string(line_no));
        }
        if (!seen.emplace(key).second) {
            throw ConfigError(std::string(key) + ": repeated on line " + std::to_string(line_no));
        }
        it->second(config, key, value);
    }
    config.validate();
    return config;
}

TrainConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("config: cannot open " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string format_config(const TrainConfig& c) {
    std::ostringstream out;
    out << "batch_size = " << c.batch_size << "\n"
        << "patch_size = " << c.patch_size << "\n"
        << "temperature = " << number(c.temperature) << "\n"
        << "momentum = " << number(c.momentum) << "\n"
        << "learning_rate = " << number(c.learning_rate) << "\n"
        << "weight_decay = " << number(c.weight_decay) << "\n"
        << "warmup_steps = " << c.warmup_steps << "\n"
        << "total_steps = " << c.total_steps << "\n"
        << "layers = " << c.layers << "\n"
        << "expansion = " << c.expansion << "\n"
        << "framework = " << to_string(c.framework) << "\n"
        << "ba_apply = " << to_string(c.ba_apply) << "\n"
        << "seed = " << c.seed << "\n"
        << "crop_scale_min = " << number(c.augmentation.crop_scale_min) << "\n"
        << "crop_scale_max = " << number(c.augmentation.crop_scale_max) << "\n"
        << "flip_prob = " << number(c.augmentation.flip_prob) << "\n"
        << "grayscale_prob = " << number(c.augmentation.grayscale_prob) << "\n"
        << "image_size = " << c.image_size << "\n"
        << "synthetic_per_class = " << c.synthetic_per_class << "\n"
        << "probe_steps = " << c.probe_steps << "\n";
    return out.str();
}

}  // namespace bassl
