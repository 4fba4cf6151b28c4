#include "bassl/trainer.hpp"

#include "bassl/contrastive.hpp"
#include "bassl/errors.hpp"
#include "bassl/eval.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

namespace bassl {

namespace {

// Stream identifiers for derive_seed; each component draws from its own
// stream so toggling one never shifts another.
constexpr std::uint64_t kStreamModel = 1;
constexpr std::uint64_t kStreamBa = 2;
constexpr std::uint64_t kStreamAugment = 3;
constexpr std::uint64_t kStreamData = 4;

}  // namespace

Framework parse_framework(std::string_view name) {
    if (name == "moco_like") return Framework::moco_like;
    if (name == "simclr_like") return Framework::simclr_like;
    if (name == "byol_like") return Framework::byol_like;
    if (name == "simsiam_like") return Framework::simsiam_like;
    throw ConfigError("unknown framework '" + std::string(name) + "'");
}

BaApply parse_ba_apply(std::string_view name) {
    if (name == "second") return BaApply::second;
    if (name == "first") return BaApply::first;
    if (name == "both") return BaApply::both;
    if (name == "off") return BaApply::off;
    throw ConfigError("unknown ba_apply '" + std::string(name) + "'");
}

std::string_view to_string(Framework f) noexcept {
    switch (f) {
        case Framework::moco_like: return "moco_like";
        case Framework::simclr_like: return "simclr_like";
        case Framework::byol_like: return "byol_like";
        case Framework::simsiam_like: return "simsiam_like";
    }
    return "?";
}

std::string_view to_string(BaApply a) noexcept {
    switch (a) {
        case BaApply::second: return "second";
        case BaApply::first: return "first";
        case BaApply::both: return "both";
        case BaApply::off: return "off";
    }
    return "?";
}

bool uses_momentum(Framework f) noexcept {
    return f == Framework::moco_like || f == Framework::byol_like;
}

bool uses_predictor(Framework f) noexcept {
    return f == Framework::byol_like || f == Framework::simsiam_like;
}

void TrainConfig::validate() const {
    auto fail = [](const std::string& key, const std::string& why) {
        throw ConfigError(key + ": " + why);
    };
    if (batch_size < 2) fail("batch_size", "must be at least 2 for in-batch contrast");
    if (patch_size == 0 || image_size % patch_size != 0) fail("patch_size", "must divide image_size");
    if (image_size == 0 || image_size % 8 != 0) fail("image_size", "must be a positive multiple of 8");
    if (!(temperature > 0.0)) fail("temperature", "must be positive");
    if (!(momentum >= 0.0 && momentum <= 1.0)) fail("momentum", "must lie in [0, 1]");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) fail("learning_rate", "must be finite and >= 0");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) fail("weight_decay", "must be finite and >= 0");
    if (expansion == 0) fail("expansion", "must be at least 1");
    if (warmup_steps > total_steps) fail("warmup_steps", "must not exceed total_steps");
    const auto& a = augmentation;
    if (!(a.crop_scale_min > 0.0 && a.crop_scale_min <= a.crop_scale_max && a.crop_scale_max <= 1.0)) {
        fail("crop_scale_min", "crop scales must satisfy 0 < min <= max <= 1");
    }
    if (!(a.flip_prob >= 0.0 && a.flip_prob <= 1.0)) fail("flip_prob", "must lie in [0, 1]");
    if (!(a.grayscale_prob >= 0.0 && a.grayscale_prob <= 1.0)) fail("grayscale_prob", "must lie in [0, 1]");
    if (synthetic_per_class == 0) fail("synthetic_per_class", "must be at least 1");
}

ModelConfig default_model_config(const TrainConfig& config) {
    ModelConfig m;
    m.encoder.image_size = config.image_size;
    m.with_predictor = uses_predictor(config.framework);
    return m;
}

double lr_schedule(std::size_t step, const TrainConfig& config) {
    if (step >= config.total_steps) {
        return 0.0;
    }
    if (step < config.warmup_steps) {
        return config.learning_rate * static_cast<double>(step) / static_cast<double>(config.warmup_steps);
    }
    const double progress = static_cast<double>(step - config.warmup_steps) /
                            static_cast<double>(config.total_steps - config.warmup_steps);
    return config.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

Var select_loss(Framework framework, const Var& q1, const Var& q2, const Var& k1, const Var& k2,
                Track& query, double temperature) {
    switch (framework) {
        case Framework::moco_like:
        case Framework::simclr_like:
            return symmetric_ctr(q1, q2, k1, k2, temperature);
        case Framework::byol_like:
        case Framework::simsiam_like:
            return add(negative_cosine(query.predict(q1, Binding::trainable), k2),
                       negative_cosine(query.predict(q2, Binding::trainable), k1));
    }
    throw ConfigError("unknown framework tag");
}

// ---- Trainer ---------------------------------------------------------------

Trainer::Trainer(const TrainConfig& config) : Trainer(config, default_model_config(config)) {}

Trainer::Trainer(const TrainConfig& config, const ModelConfig& model) : config_(config), model_(model) {
    config_.validate();
    if (uses_predictor(config_.framework) != model_.with_predictor) {
        throw ConfigError("framework " + std::string(to_string(config_.framework)) +
                          (model_.with_predictor ? " takes no predictor" : " needs a predictor"));
    }
    Rng model_rng(derive_seed(config_.seed, {kStreamModel}));
    query_ = Track(model_, model_rng, "q");
    key_ = query_.key_copy("k");
    Rng ba_rng(derive_seed(config_.seed, {kStreamBa}));
    ba_ = ConvEmbeddingParams(config_.batch_size, config_.expansion, config_.layers, ba_rng, "ba");
    optimizer_ = std::make_unique<AdamW>(trainable_parameters(),
                                         AdamWOptions{0.9, 0.999, 1e-8, config_.weight_decay});
}

std::vector<Parameter*> Trainer::trainable_parameters() {
    std::vector<Parameter*> out;
    if (ba_active()) {
        out = ba_.parameters();
    }
    for (Parameter* p : query_.parameters()) {
        out.push_back(p);
    }
    return out;
}

std::vector<Parameter*> Trainer::state_parameters() {
    step_counter_.value[0] = static_cast<double>(steps_done_);
    std::vector<Parameter*> out{&step_counter_};
    for (Parameter* p : ba_.parameters()) out.push_back(p);
    for (Parameter* p : query_.parameters()) out.push_back(p);
    for (Parameter* p : key_.parameters()) out.push_back(p);
    for (Parameter& p : optimizer_->first_moments()) out.push_back(&p);
    for (Parameter& p : optimizer_->second_moments()) out.push_back(&p);
    return out;
}

std::pair<Tensor, Tensor> Trainer::views(const Tensor& batch, std::size_t step) const {
    Rng rng(derive_seed(config_.seed, {kStreamAugment, step}));
    Tensor first = augment(batch, config_.augmentation, rng);
    Tensor second = augment(batch, config_.augmentation, rng);
    return {std::move(first), std::move(second)};
}

Trainer::Evaluation Trainer::evaluate(const Tensor& batch, std::size_t step) {
    if (batch.rank() != 4 || batch.dim(0) != config_.batch_size) {
        throw DimensionError("train step expects a batch of " + std::to_string(config_.batch_size) +
                             " images, got " + shape_string(batch.shape()));
    }
    auto [view1, view2] = views(batch, step);
    Graph g;
    Var x1 = g.constant(std::move(view1));
    Var x2 = g.constant(std::move(view2));
    const BaApply mode = config_.ba_apply;
    if (mode == BaApply::first || mode == BaApply::both) {
        x1 = ba_forward(x1, ba_, config_.patch_size);
    }
    if (mode == BaApply::second || mode == BaApply::both) {
        x2 = ba_forward(x2, ba_, config_.patch_size);
    }
    Var q1 = query_.embed(x1, Binding::trainable);
    Var q2 = query_.embed(x2, Binding::trainable);
    // Key track: frozen parameters on detached inputs; nothing flows back.
    Var k1 = key_.embed(stop_gradient(x1), Binding::frozen);
    Var k2 = key_.embed(stop_gradient(x2), Binding::frozen);
    Var loss = select_loss(config_.framework, q1, q2, k1, k2, query_, config_.temperature);
    const double value = loss.value().item();
    if (!std::isfinite(value)) {
        throw NumericError("non-finite loss at step " + std::to_string(step + 1));
    }
    return Evaluation{value, g.backward(loss)};
}

MetricsRecord Trainer::train_step(const Tensor& batch) {
    const auto start = std::chrono::steady_clock::now();
    const std::size_t step = steps_done_;
    Evaluation eval = evaluate(batch, step);
    const double lr = lr_schedule(step, config_);
    optimizer_->step(eval.gradients, lr);
    // Weight-tied frameworks keep K as an exact copy of Q.
    momentum_update(key_, query_, uses_momentum(config_.framework) ? config_.momentum : 0.0);
    ++steps_done_;
    const auto stop = std::chrono::steady_clock::now();
    return MetricsRecord{step + 1, eval.loss, lr, config_.framework, config_.layers,
                         std::chrono::duration<double, std::milli>(stop - start).count()};
}

std::vector<MetricsRecord> run_pretraining(Trainer& trainer, const LabeledImageSet& data,
                                           const std::function<void(const MetricsRecord&)>& on_step) {
    const TrainConfig& cfg = trainer.config();
    BatchIterator batches(data, cfg.batch_size, derive_seed(cfg.seed, {kStreamData}));
    std::vector<MetricsRecord> records;
    while (trainer.steps_done() < cfg.total_steps) {
        MetricsRecord r = trainer.train_step(batches.batch_at(trainer.steps_done()));
        if (on_step) {
            on_step(r);
        }
        records.push_back(r);
    }
    return records;
}

std::vector<AblationRow> ablate_layers(const TrainConfig& config, std::span<const std::size_t> layers,
                                       const LabeledImageSet& data) {
    std::vector<AblationRow> rows;
    for (std::size_t l : layers) {
        TrainConfig cfg = config;
        cfg.layers = l;
        Trainer trainer(cfg);
        const auto records = run_pretraining(trainer, data);
        ProbeOptions probe;
        probe.split_seed = cfg.seed;
        probe.steps = cfg.probe_steps;
        const Tensor features = extract_features(data, trainer.query().encoder());
        const ProbeResult result = linear_probe(features, data.labels, data.classes, probe);
        rows.push_back(AblationRow{l, trainer.ba().parameter_count(),
                                   records.empty() ? 0.0 : records.back().loss, result.top1});
    }
    return rows;
}

}  // namespace bassl
