#pragma once

#include "gattf/featurize.hpp"
#include "gattf/metrics.hpp"
#include "gattf/mi_select.hpp"
#include "gattf/model.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gattf {

struct TrainConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t batch_size = 32;
    std::size_t max_steps = 1000;
    std::size_t eval_every = 100;
    std::size_t early_stop_patience = 5;
    double grad_clip_norm = 1.0;
    std::uint64_t seed = 0;
    std::size_t eval_samples = 100;
    std::size_t season = 288;

    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

/// Adam with bias correction over every tensor of a parameter set.
class Adam {
public:
    Adam(const ModelParams& params, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8);
    /// Applies one update from the accumulated gradients.
    void step(ModelParams& params);
    /// Same, for a plain list of tensors.
    void step(std::vector<Tensor>& tensors);
    std::size_t steps() const noexcept { return t_; }

private:
    double lr_, b1_, b2_, eps_;
    std::size_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

/// Scales gradients so their global L2 norm is at most max_norm; returns
/// the norm before scaling.
double clip_grad_norm(ModelParams& params, double max_norm);

struct HistoryRow {
    std::size_t step = 0;
    double train_loss = 0.0;
    std::optional<double> val_mase;
};

struct TrainHistory {
    std::vector<HistoryRow> rows;
    std::size_t best_step = 0;
    double best_val_mase = 0.0;
    bool stopped_early = false;

    /// step,train_loss,val_mase (empty between evaluations).
    std::string to_csv() const;
};

struct TrainResult {
    ModelParams params;
    TrainHistory history;
};

/// Instances for optimisation step `step` (0-based).
using BatchSource = std::function<std::vector<TrainingInstance>(std::size_t step)>;
/// Lower is better.
using Validator = std::function<double(const ModelParams&)>;

/// Minimises the mean instance NLL. With a validator, evaluates every
/// eval_every steps (and at the last step), stops after
/// early_stop_patience evaluations without improvement and returns the
/// best evaluated parameters.
TrainResult train(const ModelConfig& model_config, const TrainConfig& config, const BatchSource& batches,
                  const Validator& validator = {});

/// Uniformly sampled training windows from `dataset`, reseeded per step.
BatchSource window_sampler(const SensorDataset& dataset, const FeatureConfig& features, std::size_t batch_size,
                           std::uint64_t seed);

/// Median forecast of one instance, de-scaled.
std::vector<double> point_forecast(const ModelParams& params, const TrainingInstance& inst, std::size_t samples,
                                   std::uint64_t seed);

/// Forecasts the final `span` steps of `dataset` for one sensor as
/// back-to-back windows of the prediction length and scores them as one
/// series. The span is rounded down to whole windows, but never below one.
MetricReport evaluate_span(const ModelParams& params, const SensorDataset& dataset, const SensorSeries& insample,
                           const FeatureConfig& features, const SensorId& sensor, std::size_t span,
                           std::size_t samples, std::uint64_t seed, std::size_t season);

/// Mean of evaluate_span MASE over `sensors` (all configured sensors when
/// empty), each scaled by its seasonal-naive error on `insample`.
double mean_span_mase(const ModelParams& params, const SensorDataset& dataset, const SensorDataset& insample,
                      const FeatureConfig& features, std::size_t span, std::size_t samples, std::uint64_t seed,
                      std::size_t season, std::span<const SensorId> sensors = {});

// --- ablation -----------------------------------------------------------------------

enum class ArmKind { all_sensors_no_cov, single_sensor_no_cov, informative_cov, less_informative_cov };

std::string to_string(ArmKind kind);
ArmKind arm_kind_from_string(const std::string& s);
const std::vector<ArmKind>& all_arm_kinds();

struct AblationConfig {
    ModelConfig model;
    TrainConfig train;
    SplitSpec split{4896, 5184, 5472};
    std::size_t context_length = 576;
    std::size_t prediction_length = 288;
    /// Empty means default_lags for the data step.
    std::vector<std::size_t> lags;
    std::size_t top_k = 2;
    std::vector<ArmKind> arms = all_arm_kinds();

    nlohmann::json to_json() const;
    static AblationConfig from_json(const nlohmann::json& j);
};

struct ArmResult {
    ArmKind arm;
    std::vector<SensorId> training_sensors;
    std::map<SensorId, std::vector<SensorId>> covariates;
    std::vector<MetricReport> reports; ///< one per target
    TrainHistory history;
    std::optional<std::string> error;

    /// Mean over targets.
    MetricReport mean() const;
};

struct AblationReport {
    std::vector<SensorId> targets;
    std::vector<ArmResult> arms;

    /// Metric rows (mase, smape, mae, rmse) by arm columns, averaged over targets.
    std::string to_csv() const;
    /// One row per (arm, target).
    std::string per_target_csv() const;
    std::string to_text() const;
    const ArmResult& arm(ArmKind kind) const;
};

/// Trains and evaluates one model per arm. MI is taken from `mi` (computed
/// on the training prefix). Every arm builds its own random streams from
/// config.train.seed, so arms with the same inputs give the same numbers
/// regardless of order. A failing arm is recorded and the rest continue.
AblationReport run_ablation(const SensorDataset& dataset, const std::vector<SensorId>& targets, const MiMatrix& mi,
                            const AblationConfig& config);

} // namespace gattf
