#include "bassl/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Batch-adaptive contrastive self-supervised learning toolkit"};
    app.require_subcommand(1);

    bassl::PretrainArgs pretrain;
    std::string pretrain_config;
    auto* pre = app.add_subcommand("pretrain", "Run contrastive pretraining");
    pre->add_option("--config", pretrain_config, "key = value config file");
    pre->add_option("--data", pretrain.data, "synthetic | cifar10:<path>");
    pre->add_option("--out", pretrain.out, "checkpoint to write")->required();
    pre->add_option("--metrics", pretrain.metrics, "metrics CSV to write")->required();
    pre->add_flag("--timing", pretrain.timing, "record wall-clock ms per step");

    bassl::ProbeArgs probe;
    std::string probe_config;
    std::string probe_metrics;
    auto* prb = app.add_subcommand("probe", "Linear probe on a frozen checkpoint encoder");
    prb->add_option("--ckpt", probe.checkpoint, "checkpoint to evaluate")->required();
    prb->add_option("--config", probe_config, "config file (data and probe settings)");
    prb->add_option("--data", probe.data, "synthetic | cifar10:<path>");
    prb->add_option("--metrics", probe_metrics, "metrics CSV to append a probe row to");

    std::uint64_t gradcheck_seed = 0;
    auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
    grad->add_option("--seed", gradcheck_seed, "random seed for the test instances");

    bassl::AblateArgs ablate;
    std::string ablate_config;
    auto* abl = app.add_subcommand("ablate", "Pretrain + probe for several CE layer counts");
    abl->add_option("--config", ablate_config, "config file");
    abl->add_option("--layers", ablate.layers, "comma-separated layer counts");
    abl->add_option("--data", ablate.data, "synthetic | cifar10:<path>");
    abl->add_option("--out", ablate.out, "ablation CSV to write")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : bassl::exit_codes::config;
    }

    if (*pre) {
        if (!pretrain_config.empty()) pretrain.config = pretrain_config;
        return bassl::cmd_pretrain(pretrain, std::cout, std::cerr);
    }
    if (*prb) {
        if (!probe_config.empty()) probe.config = probe_config;
        if (!probe_metrics.empty()) probe.metrics = probe_metrics;
        return bassl::cmd_probe(probe, std::cout, std::cerr);
    }
    if (*grad) {
        return bassl::cmd_gradcheck(gradcheck_seed, std::cout, std::cerr);
    }
    if (!ablate_config.empty()) ablate.config = ablate_config;
    return bassl::cmd_ablate(ablate, std::cout, std::cerr);
}
