#pragma once

#include "gattf/autodiff.hpp"
#include "gattf/featurize.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace gattf {

enum class HeadKind { student_t, gaussian };

std::string to_string(HeadKind kind);
HeadKind head_kind_from_string(const std::string& s);

struct ModelConfig {
    std::size_t d_model = 256;
    std::size_t encoder_layers = 4;
    std::size_t decoder_layers = 2;
    std::size_t heads = 8;
    std::size_t ff_dim = 1024;
    std::size_t context_length = 576;
    std::size_t prediction_length = 288;
    double dropout = 0.1;
    HeadKind head = HeadKind::student_t;

    // Input layout, normally copied from the FeatureConfig.
    std::vector<std::size_t> lags;
    std::size_t num_covariates = 0;
    std::size_t num_static = 1;
    std::size_t embedding_dim = 8;

    std::size_t feature_width() const { return 1 + lags.size() + kTimeFeatureCount + 2 * num_covariates; }
    std::size_t head_width() const { return head == HeadKind::student_t ? 3 : 2; }
    void validate() const;

    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
    bool operator==(const ModelConfig&) const = default;
};

/// Copies lags, covariate count and sensor count from the feature layout.
ModelConfig with_features(ModelConfig config, const FeatureConfig& features);

/// Closed-form number of learnable scalars for a configuration.
std::size_t parameter_count(const ModelConfig& config);

/// Named learnable tensors in a fixed order.
class ModelParams {
public:
    ModelParams() = default;
    /// Glorot-uniform weights, zero biases, unit layer-norm gains.
    static ModelParams initialize(const ModelConfig& config, std::uint64_t seed);
    /// Every tensor zero, layer-norm gains included.
    static ModelParams zeros(const ModelConfig& config);

    const ModelConfig& config() const noexcept { return config_; }
    const Tensor& get(const std::string& name) const;
    Tensor& get(const std::string& name);
    bool contains(const std::string& name) const;

    std::vector<std::pair<std::string, Tensor>>& entries() noexcept { return entries_; }
    const std::vector<std::pair<std::string, Tensor>>& entries() const noexcept { return entries_; }

    std::size_t count() const;
    void zero_grad();
    /// Deep copy with fresh storage.
    ModelParams clone() const;
    /// Values only; shapes must match.
    void assign(const ModelParams& other);

private:
    void add(std::string name, Tensor t);

    ModelConfig config_;
    std::vector<std::pair<std::string, Tensor>> entries_;
};

/// Encoder input rows [C, F]: scaled target, scaled lags, time features,
/// scaled covariates and indicators. Unobserved or masked entries are 0.
std::vector<Scalar> encoder_features(const TrainingInstance& inst);

/// Decoder input rows [P, F] under teacher forcing: the previous target
/// value, lags read from the future window where they fall inside it,
/// future time features, zero covariates and indicators.
std::vector<Scalar> decoder_features(const TrainingInstance& inst, const std::vector<std::size_t>& lags);

/// Dropout source; null disables dropout.
using DropoutRng = std::mt19937_64*;

/// Context memory [C, d_model].
Tensor encode(const ModelParams& params, const TrainingInstance& inst, DropoutRng rng = nullptr);

/// Distribution parameters [P, 3] (df, loc, scale) or [P, 2] (loc, scale)
/// in the scaled space.
Tensor decode_teacher_forced(const ModelParams& params, const Tensor& memory, const TrainingInstance& inst,
                             DropoutRng rng = nullptr);

/// Mean NLL of the scaled future over observed positions.
Tensor nll_loss(const ModelConfig& config, const Tensor& dist_params, const TrainingInstance& inst);

/// encode + decode + nll_loss.
Tensor instance_loss(const ModelParams& params, const TrainingInstance& inst, DropoutRng rng = nullptr);

struct ForecastDistribution {
    std::size_t num_samples = 0;
    std::size_t horizon = 0;
    std::vector<double> samples; ///< [num_samples x horizon], de-scaled
    double scale = 1.0;

    double sample(std::size_t s, std::size_t t) const { return samples[s * horizon + t]; }
    /// Per-step median of the samples.
    std::vector<double> median() const;
    /// Per-step linear-interpolation quantile.
    std::vector<double> quantile(double q) const;
};

/// Autoregressive sampling. Trajectory i uses seed + i, so results do not
/// depend on how trajectories are batched.
ForecastDistribution sample_forecast(const ModelParams& params, const TrainingInstance& inst,
                                     std::size_t num_samples = 100, std::uint64_t seed = 0);

/// Single decoder step for externally supplied decoder rows; the output
/// row for position j depends only on rows 0..j. Used by tests to compare
/// against the teacher-forced path.
Tensor decode_rows(const ModelParams& params, const Tensor& memory, std::span<const Scalar> decoder_rows,
                   std::size_t static_id, DropoutRng rng = nullptr);

/// The cached one-step-at-a-time path used by sample_forecast, applied to
/// fixed decoder rows (at most prediction_length of them).
Tensor decode_incremental(const ModelParams& params, const Tensor& memory, std::span<const Scalar> decoder_rows,
                          std::size_t static_id);

} // namespace gattf
