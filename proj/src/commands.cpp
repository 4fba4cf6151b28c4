#include "bassl/commands.hpp"

#include "bassl/checkpoint.hpp"
#include "bassl/config.hpp"
#include "bassl/errors.hpp"
#include "bassl/eval.hpp"
#include "bassl/gradcheck_suite.hpp"
#include "bassl/rng.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

namespace bassl {

namespace {

constexpr std::uint64_t kStreamSynthetic = 5;

// Maps library errors onto the stable exit codes.
int guarded(std::ostream& err, const std::function<int()>& body) {
    try {
        return body();
    } catch (const CorruptCheckpointError& e) {
        err << "error: corrupt checkpoint: " << e.what() << "\n";
        return exit_codes::corrupt_checkpoint;
    } catch (const NumericError& e) {
        err << "error: numeric failure: " << e.what() << "\n";
        return exit_codes::numeric;
    } catch (const ConfigError& e) {
        err << "error: config: " << e.what() << "\n";
        return exit_codes::config;
    } catch (const FormatError& e) {
        err << "error: input: " << e.what() << "\n";
        return exit_codes::config;
    } catch (const DimensionError& e) {
        err << "error: shape: " << e.what() << "\n";
        return exit_codes::config;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_codes::failure;
    }
}

TrainConfig config_from(const std::optional<std::filesystem::path>& path) {
    return path ? load_config(*path) : parse_config("");
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// Rebuilds the query encoder stored under "q.encoder.*".
Encoder encoder_from_checkpoint(std::vector<Parameter>& tensors, std::size_t image_size) {
    std::map<std::string, Tensor*> by_name;
    for (Parameter& p : tensors) {
        by_name[p.name] = &p.value;
    }
    EncoderConfig cfg;
    cfg.image_size = image_size;
    cfg.widths.clear();
    for (std::size_t s = 0;; ++s) {
        const auto it = by_name.find("q.encoder.stage" + std::to_string(s) + ".weight");
        if (it == by_name.end()) {
            break;
        }
        const Tensor& w = *it->second;
        if (w.rank() != 4) {
            throw CorruptCheckpointError("encoder weight has shape " + shape_string(w.shape()));
        }
        if (s == 0) {
            cfg.in_channels = w.dim(1);
        }
        cfg.widths.push_back(w.dim(0));
    }
    if (cfg.widths.empty()) {
        throw CorruptCheckpointError("checkpoint holds no q.encoder tensors");
    }
    Rng unused(0);
    Encoder encoder(cfg, unused, "q.encoder");
    for (Parameter* p : encoder.parameters()) {
        const auto it = by_name.find(p->name);
        if (it == by_name.end() || it->second->shape() != p->value.shape()) {
            throw CorruptCheckpointError("checkpoint lacks a matching " + p->name);
        }
        p->value = *it->second;
    }
    return encoder;
}

std::size_t count_ba_layers(const std::vector<Parameter>& tensors) {
    std::size_t n = 0;
    for (const Parameter& p : tensors) {
        if (p.name.starts_with("ba.layer") && p.name.ends_with(".expand.weight")) {
            ++n;
        }
    }
    return n;
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string metrics_row(const MetricsRecord& r, bool timing) {
    std::ostringstream s;
    s << r.step << "," << format_double(r.loss) << "," << format_double(r.lr) << ","
      << to_string(r.framework) << "," << r.layers << "," << (timing ? format_double(r.ms) : "0");
    return s.str();
}

std::string probe_row(double top1, std::size_t layers) {
    return "probe," + format_double(top1) + ",,," + std::to_string(layers) + ",";
}

LabeledImageSet load_dataset(std::string_view spec, const TrainConfig& config) {
    if (spec == "synthetic") {
        return make_synthetic(config.synthetic_per_class, derive_seed(config.seed, {kStreamSynthetic}),
                              config.image_size);
    }
    constexpr std::string_view kCifar = "cifar10:";
    if (spec.starts_with(kCifar)) {
        if (config.image_size != 32) {
            throw ConfigError("image_size: CIFAR-10 images are 32x32");
        }
        return read_cifar10_binary(std::string(spec.substr(kCifar.size())));
    }
    throw ConfigError("data: expected 'synthetic' or 'cifar10:<path>', got '" + std::string(spec) + "'");
}

std::vector<std::size_t> parse_layer_list(std::string_view text) {
    std::vector<std::size_t> out;
    while (!text.empty()) {
        const auto comma = text.find(',');
        const std::string_view item = text.substr(0, comma);
        std::size_t v = 0;
        const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (item.empty() || ec != std::errc{} || ptr != item.data() + item.size()) {
            throw ConfigError("layers: cannot parse '" + std::string(item) + "'");
        }
        out.push_back(v);
        if (comma == std::string_view::npos) {
            break;
        }
        text = text.substr(comma + 1);
        if (text.empty()) {
            throw ConfigError("layers: trailing comma");
        }
    }
    if (out.empty()) {
        throw ConfigError("layers: empty list");
    }
    return out;
}

int cmd_pretrain(const PretrainArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const TrainConfig config = config_from(args.config);
        const LabeledImageSet data = load_dataset(args.data, config);
        Trainer trainer(config);
        std::string csv = std::string(kMetricsHeader) + "\n";
        try {
            run_pretraining(trainer, data, [&](const MetricsRecord& r) {
                csv += metrics_row(r, args.timing) + "\n";
            });
        } catch (const NumericError&) {
            write_text_atomic(args.metrics, csv);
            throw;
        }
        write_text_atomic(args.metrics, csv);
        save_trainer(trainer, args.out);
        out << "pretrained " << trainer.steps_done() << " steps; checkpoint " << args.out.string()
            << "\n";
        return exit_codes::ok;
    });
}

int cmd_probe(const ProbeArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const TrainConfig config = config_from(args.config);
        auto tensors = load_checkpoint(args.checkpoint);
        Encoder encoder = encoder_from_checkpoint(tensors, config.image_size);
        const LabeledImageSet data = load_dataset(args.data, config);
        ProbeOptions options;
        options.split_seed = config.seed;
        options.steps = config.probe_steps;
        const ProbeResult result =
            linear_probe(extract_features(data, encoder), data.labels, data.classes, options);
        if (args.metrics) {
            std::string csv;
            if (std::filesystem::exists(*args.metrics)) {
                const auto bytes = read_file(*args.metrics);
                csv.assign(bytes.begin(), bytes.end());
                if (!csv.empty() && csv.back() != '\n') {
                    csv += "\n";
                }
            } else {
                csv = std::string(kMetricsHeader) + "\n";
            }
            csv += probe_row(result.top1, count_ba_layers(tensors)) + "\n";
            write_text_atomic(*args.metrics, csv);
        }
        out << "top1=" << format_double(result.top1) << "\n";
        return exit_codes::ok;
    });
}

int cmd_gradcheck(std::uint64_t seed, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto reports = run_gradcheck_suite(seed);
        std::vector<std::string> failing;
        for (const auto& r : reports) {
            out << r.component << " max_rel_err=" << format_double(r.max_relative_error)
                << (r.passed() ? "" : "  FAIL") << "\n";
            if (!r.passed()) {
                failing.push_back(r.component);
            }
        }
        if (!failing.empty()) {
            err << "gradcheck failed:";
            for (const auto& f : failing) {
                err << " " << f;
            }
            err << "\n";
            return exit_codes::gradcheck;
        }
        return exit_codes::ok;
    });
}

int cmd_ablate(const AblateArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const TrainConfig config = config_from(args.config);
        const auto layers = parse_layer_list(args.layers);
        const LabeledImageSet data = load_dataset(args.data, config);
        const auto rows = ablate_layers(config, layers, data);
        std::string csv = std::string(kAblationHeader) + "\n";
        for (const auto& r : rows) {
            csv += std::to_string(r.layers) + "," + std::to_string(r.parameter_count) + "," +
                   format_double(r.final_loss) + "," + format_double(r.top1) + "\n";
            out << "L=" << r.layers << " params=" << r.parameter_count
                << " final_loss=" << format_double(r.final_loss) << " top1=" << format_double(r.top1)
                << "\n";
        }
        write_text_atomic(args.out, csv);
        return exit_codes::ok;
    });
}

}  // namespace bassl
