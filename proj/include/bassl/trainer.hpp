#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bassl/augment.hpp"
#include "bassl/autodiff.hpp"
#include "bassl/batch_adaptive.hpp"
#include "bassl/data.hpp"
#include "bassl/model.hpp"
#include "bassl/optimizer.hpp"

namespace bassl {

enum class Framework { moco_like, simclr_like, byol_like, simsiam_like };
// Which augmented view(s) pass through the batch-adaptive module.
enum class BaApply { second, first, both, off };

Framework parse_framework(std::string_view name);
BaApply parse_ba_apply(std::string_view name);
std::string_view to_string(Framework f) noexcept;
std::string_view to_string(BaApply a) noexcept;

// Momentum-maintained key track (moco/byol) vs. weight-tied key (simclr/simsiam).
bool uses_momentum(Framework f) noexcept;
bool uses_predictor(Framework f) noexcept;

struct TrainConfig {
    std::size_t batch_size = 8;
    std::size_t patch_size = 4;
    double temperature = 0.2;
    double momentum = 0.99;
    double learning_rate = 1.5e-4;
    double weight_decay = 1e-4;
    std::size_t warmup_steps = 40;
    std::size_t total_steps = 200;
    std::size_t layers = 1;
    std::size_t expansion = 2;
    Framework framework = Framework::moco_like;
    BaApply ba_apply = BaApply::second;
    std::uint64_t seed = 0;
    AugmentationSpec augmentation;
    std::size_t image_size = 32;
    std::size_t synthetic_per_class = 256;
    std::size_t probe_steps = 500;

    // Throws ConfigError naming the offending field.
    void validate() const;
};

ModelConfig default_model_config(const TrainConfig& config);

struct MetricsRecord {
    std::size_t step = 0;  // 1-based
    double loss = 0.0;
    double lr = 0.0;
    Framework framework = Framework::moco_like;
    std::size_t layers = 0;
    double ms = 0.0;  // wall clock of the step
};

// Linear warmup from 0 to lr over warmup_steps, then cosine decay reaching 0
// at total_steps (and staying there).
double lr_schedule(std::size_t step, const TrainConfig& config);

// moco/simclr: ctr(q1, k2) + ctr(q2, k1).
// byol/simsiam: ncos(pred(q1), k2) + ncos(pred(q2), k1).
Var select_loss(Framework framework, const Var& q1, const Var& q2, const Var& k1, const Var& k2,
                Track& query, double temperature);

/// Owns every piece of training state: query/key tracks, BA parameters and the
/// optimizer. Parameter addresses are stable for the trainer's lifetime.
class Trainer {
public:
    explicit Trainer(const TrainConfig& config);
    Trainer(const TrainConfig& config, const ModelConfig& model);
    Trainer(const Trainer&) = delete;
    Trainer& operator=(const Trainer&) = delete;

    const TrainConfig& config() const noexcept { return config_; }
    std::size_t steps_done() const noexcept { return steps_done_; }
    void set_steps_done(std::size_t steps) noexcept { steps_done_ = steps; }

    Track& query() noexcept { return query_; }
    Track& key() noexcept { return key_; }
    ConvEmbeddingParams& ba() noexcept { return ba_; }
    AdamW& optimizer() noexcept { return *optimizer_; }

    bool ba_active() const noexcept { return config_.ba_apply != BaApply::off; }
    // Q-side parameters plus BA parameters when BA is active.
    std::vector<Parameter*> trainable_parameters();
    // Everything a checkpoint holds, named "ba.*", "q.*", "k.*", "opt.*".
    std::vector<Parameter*> state_parameters();

    // The loss of training step `step` on `batch` and its gradients,
    // without touching any state.
    struct Evaluation {
        double loss = 0.0;
        Gradients gradients;
    };
    Evaluation evaluate(const Tensor& batch, std::size_t step);

    // One full training step at index steps_done(): augment twice, apply BA,
    // encode both views on both tracks, loss, optimizer step on Q and BA,
    // then the key update. Throws NumericError on a non-finite loss.
    MetricsRecord train_step(const Tensor& batch);

    // The two augmented views used at `step` (before BA).
    std::pair<Tensor, Tensor> views(const Tensor& batch, std::size_t step) const;

private:
    TrainConfig config_;
    ModelConfig model_;
    Track query_;
    Track key_;
    ConvEmbeddingParams ba_;
    Parameter step_counter_{"train.step", Tensor({1})};
    std::unique_ptr<AdamW> optimizer_;
    std::size_t steps_done_ = 0;
};

// Runs steps until trainer.steps_done() == total_steps, drawing batch i from
// the deterministic iterator over `data`. `on_step` sees every record.
std::vector<MetricsRecord> run_pretraining(Trainer& trainer, const LabeledImageSet& data,
                                           const std::function<void(const MetricsRecord&)>& on_step = {});

struct AblationRow {
    std::size_t layers = 0;
    std::size_t parameter_count = 0;
    double final_loss = 0.0;
    double top1 = 0.0;
};

// Identical-seed pretrain + linear probe for every layer count.
std::vector<AblationRow> ablate_layers(const TrainConfig& config, std::span<const std::size_t> layers,
                                       const LabeledImageSet& data);

}  // namespace bassl
