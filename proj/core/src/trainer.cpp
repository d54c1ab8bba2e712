#include "gattf/trainer.hpp"

#include "gattf/errors.hpp"
#include "gattf/log.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <set>
#include <sstream>

namespace gattf {

void TrainConfig::validate() const
{
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw ValidationError("learning_rate must be positive");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ValidationError("Adam betas must lie in [0, 1)");
    }
    if (!(eps > 0.0)) {
        throw ValidationError("eps must be positive");
    }
    if (batch_size == 0 || max_steps == 0 || eval_every == 0 || early_stop_patience == 0) {
        throw ValidationError("batch_size, max_steps, eval_every and early_stop_patience must be at least 1");
    }
    if (!(grad_clip_norm >= 0.0)) {
        throw ValidationError("grad_clip_norm must be non-negative (0 disables clipping)");
    }
    if (eval_samples == 0 || season == 0) {
        throw ValidationError("eval_samples and season must be at least 1");
    }
}

nlohmann::json TrainConfig::to_json() const
{
    return {{"learning_rate", learning_rate},
            {"beta1", beta1},
            {"beta2", beta2},
            {"eps", eps},
            {"batch_size", batch_size},
            {"max_steps", max_steps},
            {"eval_every", eval_every},
            {"early_stop_patience", early_stop_patience},
            {"grad_clip_norm", grad_clip_norm},
            {"seed", seed},
            {"eval_samples", eval_samples},
            {"season", season}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j)
{
    TrainConfig c;
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.eps = j.value("eps", c.eps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.eval_every = j.value("eval_every", c.eval_every);
    c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
    c.grad_clip_norm = j.value("grad_clip_norm", c.grad_clip_norm);
    c.seed = j.value("seed", c.seed);
    c.eval_samples = j.value("eval_samples", c.eval_samples);
    c.season = j.value("season", c.season);
    return c;
}

// --- optimisation -------------------------------------------------------------------

Adam::Adam(const ModelParams& params, double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), b1_(beta1), b2_(beta2), eps_(eps)
{
    for (const auto& [name, t] : params.entries()) {
        m_.emplace_back(t.numel(), 0.0);
        v_.emplace_back(t.numel(), 0.0);
    }
}

void Adam::step(ModelParams& params)
{
    std::vector<Tensor> tensors;
    tensors.reserve(params.entries().size());
    for (auto& [name, t] : params.entries()) {
        tensors.push_back(t);
    }
    step(tensors);
}

void Adam::step(std::vector<Tensor>& tensors)
{
    if (m_.empty()) {
        for (const auto& t : tensors) {
            m_.emplace_back(t.numel(), 0.0);
            v_.emplace_back(t.numel(), 0.0);
        }
    }
    if (tensors.size() != m_.size()) {
        throw ContractError("Adam was built for " + std::to_string(m_.size()) + " tensors, got " +
                            std::to_string(tensors.size()));
    }
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < tensors.size(); ++k) {
        auto& t = tensors[k];
        auto value = t.data();
        auto& m = m_[k];
        auto& v = v_[k];
        if (m.size() != value.size()) {
            throw ContractError("Adam state size mismatch for tensor " + std::to_string(k));
        }
        std::span<const Scalar> g;
        if (t.has_grad()) {
            g = t.grad_span();
        }
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double gi = g.empty() ? 0.0 : static_cast<double>(g[i]);
            m[i] = b1_ * m[i] + (1.0 - b1_) * gi;
            v[i] = b2_ * v[i] + (1.0 - b2_) * gi * gi;
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            value[i] = static_cast<Scalar>(static_cast<double>(value[i]) - lr_ * mhat / (std::sqrt(vhat) + eps_));
        }
    }
}

double clip_grad_norm(ModelParams& params, double max_norm)
{
    double sq = 0.0;
    for (auto& [name, t] : params.entries()) {
        if (!t.has_grad()) {
            continue;
        }
        for (Scalar g : t.grad_span()) {
            sq += static_cast<double>(g) * static_cast<double>(g);
        }
    }
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double f = max_norm / norm;
        for (auto& [name, t] : params.entries()) {
            if (!t.has_grad()) {
                continue;
            }
            for (Scalar& g : t.grad_span()) {
                g = static_cast<Scalar>(g * f);
            }
        }
    }
    return norm;
}

// --- training loop ------------------------------------------------------------------

namespace {

std::string fixed(double v, int digits = 6)
{
    if (!std::isfinite(v)) {
        return "NA";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt)
{
    // splitmix64 finaliser
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace

std::string TrainHistory::to_csv() const
{
    std::ostringstream out;
    out << "step,train_loss,val_mase\n";
    for (const auto& r : rows) {
        out << r.step << ',' << fixed(r.train_loss) << ',';
        if (r.val_mase) {
            out << fixed(*r.val_mase);
        }
        out << '\n';
    }
    return out.str();
}

TrainResult train(const ModelConfig& model_config, const TrainConfig& config, const BatchSource& batches,
                  const Validator& validator)
{
    model_config.validate();
    config.validate();

    TrainResult result;
    result.params = ModelParams::initialize(model_config, config.seed);
    ModelParams& params = result.params;
    Adam adam(params, config.learning_rate, config.beta1, config.beta2, config.eps);
    std::mt19937_64 dropout_rng(mix_seed(config.seed, 1));
    DropoutRng rng = model_config.dropout > 0.0 ? &dropout_rng : nullptr;

    std::optional<ModelParams> best;
    double best_score = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    auto& history = result.history;

    for (std::size_t step = 0; step < config.max_steps; ++step) {
        const auto batch = batches(step);
        if (batch.empty()) {
            throw TrainingError("empty batch at step " + std::to_string(step + 1));
        }
        params.zero_grad();
        const Scalar inv = static_cast<Scalar>(1.0 / static_cast<double>(batch.size()));
        double loss_sum = 0.0;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            Tape tape;
            const Tensor loss = instance_loss(params, batch[i], rng);
            const double value = loss.item();
            if (!std::isfinite(value)) {
                throw TrainingError("non-finite loss at step " + std::to_string(step + 1) + ", batch item " +
                                    std::to_string(i) + " (sensor " + batch[i].sensor.str() + ")");
            }
            tape.backward(mul_scalar(loss, inv));
            loss_sum += value;
        }
        const double norm = clip_grad_norm(params, config.grad_clip_norm);
        if (!std::isfinite(norm)) {
            throw TrainingError("non-finite gradient norm at step " + std::to_string(step + 1));
        }
        adam.step(params);

        HistoryRow row{step + 1, loss_sum / static_cast<double>(batch.size()), std::nullopt};
        const bool last = step + 1 == config.max_steps;
        if (validator && ((step + 1) % config.eval_every == 0 || last)) {
            const double score = validator(params);
            row.val_mase = score;
            if (score < best_score) {
                best_score = score;
                best = params.clone();
                history.best_step = step + 1;
                since_best = 0;
            } else if (++since_best >= config.early_stop_patience) {
                history.rows.push_back(row);
                history.stopped_early = !last;
                break;
            }
        }
        history.rows.push_back(row);
    }

    if (best) {
        params.assign(*best);
        history.best_val_mase = best_score;
    } else {
        history.best_step = history.rows.empty() ? 0 : history.rows.back().step;
        history.best_val_mase = std::numeric_limits<double>::quiet_NaN();
    }
    params.zero_grad();
    return result;
}

BatchSource window_sampler(const SensorDataset& dataset, const FeatureConfig& features, std::size_t batch_size,
                           std::uint64_t seed)
{
    features.validate();
    return [&dataset, features, batch_size, seed](std::size_t step) {
        return make_instances(dataset, features, InstanceMode::train, mix_seed(seed, step + 2), batch_size);
    };
}

std::vector<double> point_forecast(const ModelParams& params, const TrainingInstance& inst, std::size_t samples,
                                   std::uint64_t seed)
{
    return sample_forecast(params, inst, samples, seed).median();
}

MetricReport evaluate_span(const ModelParams& params, const SensorDataset& dataset, const SensorSeries& insample,
                           const FeatureConfig& features, const SensorId& sensor, std::size_t span,
                           std::size_t samples, std::uint64_t seed, std::size_t season)
{
    const std::size_t C = features.context_length;
    const std::size_t P = features.prediction_length;
    const std::size_t windows = std::max<std::size_t>(1, span / P);
    if (dataset.length() < C + windows * P) {
        throw InsufficientDataError("evaluation needs " + std::to_string(C + windows * P) + " steps, have " +
                                    std::to_string(dataset.length()));
    }
    const std::size_t first = dataset.length() - C - windows * P;
    std::vector<double> forecast, actual;
    Mask observed;
    for (std::size_t w = 0; w < windows; ++w) {
        const auto inst = make_instance(dataset, features, sensor, first + w * P);
        const auto f = point_forecast(params, inst, samples, seed);
        forecast.insert(forecast.end(), f.begin(), f.end());
        actual.insert(actual.end(), inst.target_future.begin(), inst.target_future.end());
        observed.insert(observed.end(), inst.observed_future.begin(), inst.observed_future.end());
    }
    return evaluate_forecast(sensor, forecast, actual, observed, insample, season);
}

double mean_span_mase(const ModelParams& params, const SensorDataset& dataset, const SensorDataset& insample,
                      const FeatureConfig& features, std::size_t span, std::size_t samples, std::uint64_t seed,
                      std::size_t season, std::span<const SensorId> sensors)
{
    const std::vector<SensorId> chosen =
        sensors.empty() ? features.sensors : std::vector<SensorId>(sensors.begin(), sensors.end());
    if (chosen.empty()) {
        throw InsufficientDataError("no sensors to evaluate");
    }
    double total = 0.0;
    for (const auto& sensor : chosen) {
        total += evaluate_span(params, dataset, insample[insample.index_of(sensor)], features, sensor, span, samples,
                               seed, season)
                     .mase;
    }
    return total / static_cast<double>(chosen.size());
}

// --- ablation -----------------------------------------------------------------------

std::string to_string(ArmKind kind)
{
    switch (kind) {
    case ArmKind::all_sensors_no_cov:
        return "all_sensors_no_cov";
    case ArmKind::single_sensor_no_cov:
        return "single_sensor_no_cov";
    case ArmKind::informative_cov:
        return "informative_cov";
    case ArmKind::less_informative_cov:
        return "less_informative_cov";
    }
    return "unknown";
}

ArmKind arm_kind_from_string(const std::string& s)
{
    for (ArmKind k : all_arm_kinds()) {
        if (to_string(k) == s) {
            return k;
        }
    }
    throw ValidationError("unknown ablation arm '" + s + "'");
}

const std::vector<ArmKind>& all_arm_kinds()
{
    static const std::vector<ArmKind> kinds{ArmKind::all_sensors_no_cov, ArmKind::single_sensor_no_cov,
                                            ArmKind::informative_cov, ArmKind::less_informative_cov};
    return kinds;
}

nlohmann::json AblationConfig::to_json() const
{
    nlohmann::json arm_names = nlohmann::json::array();
    for (ArmKind k : arms) {
        arm_names.push_back(to_string(k));
    }
    return {{"model", model.to_json()},
            {"train", train.to_json()},
            {"split", {{"train_len", split.train_len}, {"val_len", split.val_len}, {"test_len", split.test_len}}},
            {"context_length", context_length},
            {"prediction_length", prediction_length},
            {"lags", lags},
            {"top_k", top_k},
            {"arms", arm_names}};
}

AblationConfig AblationConfig::from_json(const nlohmann::json& j)
{
    AblationConfig c;
    if (j.contains("model")) {
        c.model = ModelConfig::from_json(j.at("model"));
    }
    if (j.contains("train")) {
        c.train = TrainConfig::from_json(j.at("train"));
    }
    if (j.contains("split")) {
        const auto& s = j.at("split");
        c.split.train_len = s.value("train_len", c.split.train_len);
        c.split.val_len = s.value("val_len", c.split.val_len);
        c.split.test_len = s.value("test_len", c.split.test_len);
    }
    c.context_length = j.value("context_length", c.context_length);
    c.prediction_length = j.value("prediction_length", c.prediction_length);
    c.lags = j.value("lags", c.lags);
    c.top_k = j.value("top_k", c.top_k);
    if (j.contains("arms")) {
        c.arms.clear();
        for (const auto& a : j.at("arms")) {
            c.arms.push_back(arm_kind_from_string(a.get<std::string>()));
        }
    }
    return c;
}

MetricReport ArmResult::mean() const
{
    MetricReport m;
    m.target = SensorId("mean");
    if (reports.empty()) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        m.mase = m.smape = m.mae = m.rmse = nan;
        return m;
    }
    m.horizon = reports.front().horizon;
    for (const auto& r : reports) {
        m.mase += r.mase;
        m.smape += r.smape;
        m.mae += r.mae;
        m.rmse += r.rmse;
    }
    const double n = static_cast<double>(reports.size());
    m.mase /= n;
    m.smape /= n;
    m.mae /= n;
    m.rmse /= n;
    return m;
}

const ArmResult& AblationReport::arm(ArmKind kind) const
{
    for (const auto& a : arms) {
        if (a.arm == kind) {
            return a;
        }
    }
    throw RangeError("ablation report has no arm " + to_string(kind));
}

std::string AblationReport::to_csv() const
{
    std::ostringstream out;
    out << "metric";
    for (const auto& a : arms) {
        out << ',' << to_string(a.arm);
    }
    out << '\n';
    const std::pair<const char*, double MetricReport::*> rows[] = {
        {"mase", &MetricReport::mase}, {"smape", &MetricReport::smape}, {"mae", &MetricReport::mae},
        {"rmse", &MetricReport::rmse}};
    for (const auto& [name, field] : rows) {
        out << name;
        for (const auto& a : arms) {
            out << ',' << (a.error ? "NA" : fixed(a.mean().*field));
        }
        out << '\n';
    }
    return out.str();
}

std::string AblationReport::per_target_csv() const
{
    std::ostringstream out;
    out << "arm,target,covariates,mase,smape,mae,rmse\n";
    for (const auto& a : arms) {
        for (const auto& r : a.reports) {
            std::string cov;
            if (auto it = a.covariates.find(r.target); it != a.covariates.end()) {
                for (const auto& c : it->second) {
                    cov += (cov.empty() ? "" : ";") + c.str();
                }
            }
            out << to_string(a.arm) << ',' << r.target.str() << ',' << cov << ',' << fixed(r.mase) << ','
                << fixed(r.smape) << ',' << fixed(r.mae) << ',' << fixed(r.rmse) << '\n';
        }
    }
    return out.str();
}

std::string AblationReport::to_text() const
{
    std::ostringstream out;
    out << "targets:";
    for (const auto& t : targets) {
        out << ' ' << t.str();
    }
    out << '\n';
    char line[160];
    std::snprintf(line, sizeof line, "%-22s %10s %10s %10s %10s\n", "arm", "MASE", "sMAPE", "MAE", "RMSE");
    out << line;
    for (const auto& a : arms) {
        if (a.error) {
            out << to_string(a.arm) << "  failed: " << *a.error << '\n';
            continue;
        }
        const auto m = a.mean();
        std::snprintf(line, sizeof line, "%-22s %10.4f %10.4f %10.2f %10.2f\n", to_string(a.arm).c_str(), m.mase,
                      m.smape, m.mae, m.rmse);
        out << line;
    }
    return out.str();
}

namespace {

struct ArmPlan {
    std::vector<SensorId> sensors;
    std::map<SensorId, std::vector<SensorId>> covariates;
};

/// Trains one model on `plan` and scores it on the test windows of `eval`.
void train_and_score(const DatasetSplits& splits, const ArmPlan& plan, const std::vector<SensorId>& eval,
                     const AblationConfig& config, const std::vector<std::size_t>& lags, ArmResult& out)
{
    FeatureConfig features;
    features.context_length = config.context_length;
    features.prediction_length = config.prediction_length;
    features.lags = lags;
    features.sensors = plan.sensors;
    features.covariates = plan.covariates;
    features.validate();

    const ModelConfig model = with_features(config.model, features);
    const TrainConfig& tc = config.train;

    const auto batches = window_sampler(splits.train, features, tc.batch_size, tc.seed);
    const std::size_t val_span = config.split.val_len - config.split.train_len;
    const std::size_t test_span = config.split.test_len - config.split.val_len;
    const Validator validator = [&](const ModelParams& p) {
        return mean_span_mase(p, splits.validation, splits.train, features, val_span, tc.eval_samples, tc.seed,
                              tc.season, eval);
    };
    const auto trained = train(model, tc, batches, validator);

    for (const auto& target : eval) {
        out.reports.push_back(evaluate_span(trained.params, splits.test, splits.train[splits.train.index_of(target)],
                                            features, target, test_span, tc.eval_samples, tc.seed, tc.season));
    }
    if (out.history.rows.empty()) {
        out.history = trained.history;
    }
}

} // namespace

AblationReport run_ablation(const SensorDataset& dataset, const std::vector<SensorId>& targets, const MiMatrix& mi,
                            const AblationConfig& config)
{
    if (targets.empty()) {
        throw ValidationError("ablation needs at least one target sensor");
    }
    config.split.validate(dataset.length());
    for (const auto& t : targets) {
        dataset.index_of(t);
    }
    const auto splits = split(dataset, config.split);
    const auto lags = config.lags.empty()
                          ? default_lags(dataset.step(), config.context_length, config.split.train_len)
                          : config.lags;

    std::vector<SensorId> sorted_targets = targets;
    std::sort(sorted_targets.begin(), sorted_targets.end());

    const auto informative = select_informative_covariates(mi, sorted_targets, config.top_k);
    std::set<SensorId> chosen;
    for (const auto& sel : informative) {
        chosen.insert(sel.covariates.begin(), sel.covariates.end());
    }
    const std::vector<SensorId> exclude(chosen.begin(), chosen.end());
    const auto less = select_less_informative(mi, sorted_targets, exclude, config.top_k);

    AblationReport report;
    report.targets = sorted_targets;
    for (ArmKind kind : config.arms) {
        ArmResult result;
        result.arm = kind;
        try {
            switch (kind) {
            case ArmKind::all_sensors_no_cov: {
                ArmPlan plan{dataset.ids(), {}};
                result.training_sensors = plan.sensors;
                train_and_score(splits, plan, sorted_targets, config, lags, result);
                break;
            }
            case ArmKind::single_sensor_no_cov:
                result.training_sensors = sorted_targets;
                for (const auto& t : sorted_targets) {
                    train_and_score(splits, ArmPlan{{t}, {}}, {t}, config, lags, result);
                }
                break;
            case ArmKind::informative_cov:
            case ArmKind::less_informative_cov: {
                const auto& selections = kind == ArmKind::informative_cov ? informative : less;
                ArmPlan plan{sorted_targets, {}};
                std::size_t width = std::numeric_limits<std::size_t>::max();
                for (const auto& sel : selections) {
                    width = std::min(width, sel.covariates.size());
                }
                for (const auto& sel : selections) {
                    if (sel.covariates.size() > width) {
                        warn("trimming covariates of " + sel.target.str() + " to " + std::to_string(width) +
                             " so every target has the same count");
                    }
                    plan.covariates[sel.target] =
                        std::vector<SensorId>(sel.covariates.begin(), sel.covariates.begin() + width);
                }
                if (width == 0) {
                    throw InsufficientDataError("no eligible covariates for arm " + to_string(kind));
                }
                result.training_sensors = plan.sensors;
                result.covariates = plan.covariates;
                train_and_score(splits, plan, sorted_targets, config, lags, result);
                break;
            }
            }
        } catch (const Error& e) {
            result.reports.clear();
            result.error = e.what();
            warn("ablation arm " + to_string(kind) + " failed: " + e.what());
        }
        report.arms.push_back(std::move(result));
    }
    return report;
}

} // namespace gattf
