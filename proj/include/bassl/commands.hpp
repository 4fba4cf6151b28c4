#pragma once

// Command implementations behind the `bassl` executable. Each returns a
// process exit code and writes human-facing text to the given streams.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bassl/data.hpp"
#include "bassl/trainer.hpp"

namespace bassl {

namespace exit_codes {
inline constexpr int ok = 0;
inline constexpr int failure = 1;  // anything not covered below
inline constexpr int config = 2;   // bad config, flags or input data
inline constexpr int numeric = 3;  // non-finite loss or parameters
inline constexpr int corrupt_checkpoint = 4;
inline constexpr int gradcheck = 5;
}  // namespace exit_codes

inline constexpr std::string_view kMetricsHeader = "step,loss,lr,framework,layers,ms";
inline constexpr std::string_view kAblationHeader = "layers,params,final_loss,top1";

// Shortest round-trippable decimal form.
std::string format_double(double v);
// `ms` is written only when `timing` is set, otherwise 0, so that metrics
// files stay byte-identical across runs.
std::string metrics_row(const MetricsRecord& record, bool timing);
std::string probe_row(double top1, std::size_t layers);

// "synthetic" or "cifar10:<path>".
LabeledImageSet load_dataset(std::string_view spec, const TrainConfig& config);
// "0,1,2,3" -> {0, 1, 2, 3}
std::vector<std::size_t> parse_layer_list(std::string_view text);

struct PretrainArgs {
    std::optional<std::filesystem::path> config;
    std::string data = "synthetic";
    std::filesystem::path out;
    std::filesystem::path metrics;
    bool timing = false;
};
int cmd_pretrain(const PretrainArgs& args, std::ostream& out, std::ostream& err);

struct ProbeArgs {
    std::filesystem::path checkpoint;
    std::optional<std::filesystem::path> config;
    std::string data = "synthetic";
    std::optional<std::filesystem::path> metrics;
};
int cmd_probe(const ProbeArgs& args, std::ostream& out, std::ostream& err);

int cmd_gradcheck(std::uint64_t seed, std::ostream& out, std::ostream& err);

struct AblateArgs {
    std::optional<std::filesystem::path> config;
    std::string layers = "0,1,2,3";
    std::string data = "synthetic";
    std::filesystem::path out;
};
int cmd_ablate(const AblateArgs& args, std::ostream& out, std::ostream& err);

}  // namespace bassl
