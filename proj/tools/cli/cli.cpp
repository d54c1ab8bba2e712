#include "cli.hpp"

#include "manifest.hpp"

#include "gattf/checkpoint.hpp"
#include "gattf/errors.hpp"
#include "gattf/ingest.hpp"
#include "gattf/log.hpp"
#include "gattf/metrics.hpp"
#include "gattf/mi_select.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

namespace gattf::cli {

namespace fs = std::filesystem;

namespace {

std::vector<SensorId> to_ids(const std::vector<std::string>& labels)
{
    std::vector<SensorId> ids;
    for (const auto& l : labels) {
        ids.emplace_back(l);
    }
    return ids;
}

nlohmann::json ids_json(const std::vector<SensorId>& ids)
{
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& id : ids) {
        arr.push_back(id.str());
    }
    return arr;
}

std::vector<SensorId> ids_from_json(const nlohmann::json& j)
{
    return to_ids(j.get<std::vector<std::string>>());
}

nlohmann::json read_json_file(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open " + path.string());
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text)
{
    write_file_atomic(path, text);
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

// --- config ---------------------------------------------------------------------------

nlohmann::json PipelineConfig::to_json() const
{
    nlohmann::json j = ablation.to_json();
    j["synth"] = synth ? synth->to_json() : nlohmann::json{{"noise_fraction", synth_noise}};
    j["mi"] = {{"lag", mi_lag}};
    j["targets"] = ids_json(targets);
    j["forecast"] = {{"samples", forecast_samples}};
    return j;
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j)
{
    static const std::set<std::string> known{"model", "train", "split", "context_length", "prediction_length",
                                             "lags", "top_k", "arms", "synth", "mi", "targets", "forecast"};
    if (!j.is_object()) {
        throw ValidationError("config must be a JSON object");
    }
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) {
            throw ValidationError("unknown config key '" + key + "'");
        }
    }
    PipelineConfig c;
    try {
        c.ablation = AblationConfig::from_json(j);
        if (j.contains("synth")) {
            const auto& s = j.at("synth");
            if (s.contains("sensors")) {
                c.synth = SynthNetworkSpec::from_json(s);
            } else {
                c.synth_noise = s.value("noise_fraction", c.synth_noise);
            }
        }
        if (j.contains("mi")) {
            c.mi_lag = j.at("mi").value("lag", c.mi_lag);
        }
        if (j.contains("targets")) {
            c.targets = ids_from_json(j.at("targets"));
        }
        if (j.contains("forecast")) {
            c.forecast_samples = j.at("forecast").value("samples", c.forecast_samples);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    return c;
}

nlohmann::json feature_config_to_json(const FeatureConfig& f)
{
    nlohmann::json cov = nlohmann::json::object();
    for (const auto& [sensor, list] : f.covariates) {
        cov[sensor.str()] = ids_json(list);
    }
    return {{"context_length", f.context_length},
            {"prediction_length", f.prediction_length},
            {"lags", f.lags},
            {"sensors", ids_json(f.sensors)},
            {"covariates", cov}};
}

FeatureConfig feature_config_from_json(const nlohmann::json& j)
{
    FeatureConfig f;
    f.context_length = j.at("context_length").get<std::size_t>();
    f.prediction_length = j.at("prediction_length").get<std::size_t>();
    f.lags = j.at("lags").get<std::vector<std::size_t>>();
    f.sensors = ids_from_json(j.at("sensors"));
    for (const auto& [sensor, list] : j.at("covariates").items()) {
        f.covariates[SensorId(sensor)] = ids_from_json(list);
    }
    return f;
}

// --- commands -------------------------------------------------------------------------

namespace {

struct Options {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::string data;
    std::string mi;
    std::string selection;
    std::string checkpoint;
    std::vector<std::string> targets;
    std::vector<std::string> sensors;
    std::vector<std::string> arms;
    std::string kind = "informative";
    std::optional<std::size_t> top_k;
    std::optional<std::size_t> lag;
    std::optional<std::size_t> prefix;
    std::optional<std::size_t> max_steps;
    std::optional<std::size_t> samples;
    std::optional<std::size_t> length;
    std::optional<double> noise;
    std::optional<std::size_t> mase_season;
    bool all_data = false;
};

class Command {
public:
    Command(std::string name, const Options& opt) : opt_(opt), name_(std::move(name))
    {
        std::string path = opt.config_path;
        if (path.empty()) {
            if (const char* env = std::getenv(kConfigEnv)) {
                path = env;
            }
        }
        if (!path.empty()) {
            config_ = PipelineConfig::from_json(read_json_file(path));
            config_file_ = path;
        }
        if (opt.seed) {
            config_.ablation.train.seed = *opt.seed;
            if (config_.synth) {
                config_.synth->seed = *opt.seed;
            }
        }
        if (opt.max_steps) {
            config_.ablation.train.max_steps = *opt.max_steps;
        }
        if (opt.top_k) {
            config_.ablation.top_k = *opt.top_k;
        }
        if (opt.lag) {
            config_.mi_lag = *opt.lag;
        }
        if (opt.samples) {
            config_.forecast_samples = *opt.samples;
            config_.ablation.train.eval_samples = *opt.samples;
        }
        if (opt.noise) {
            config_.synth_noise = *opt.noise;
        }
        if (opt.mase_season) {
            config_.ablation.train.season = *opt.mase_season;
        }
        if (!opt.targets.empty()) {
            config_.targets = to_ids(opt.targets);
        }
        if (!opt.arms.empty()) {
            config_.ablation.arms.clear();
            for (const auto& a : opt.arms) {
                config_.ablation.arms.push_back(arm_kind_from_string(a));
            }
        }
        if (opt.out_dir.empty()) {
            throw ValidationError("--out is required");
        }
        out_ = opt.out_dir;
        fs::create_directories(out_);
        manifest_.emplace(name_, out_);
        if (!config_file_.empty()) {
            manifest_->add_input(config_file_);
        }
    }

    PipelineConfig& config() { return config_; }
    bool has_config_file() const { return !config_file_.empty(); }
    const Options& opt() const { return opt_; }
    RunManifest& manifest() { return *manifest_; }

    fs::path artifact(const std::string& name, const std::string& contents)
    {
        const auto path = out_ / name;
        write_text(path, contents);
        manifest_->add_artifact(path);
        return path;
    }

    SensorDataset load_data(const std::string& flag_value)
    {
        if (flag_value.empty()) {
            throw ValidationError("--data is required");
        }
        if (!fs::exists(flag_value)) {
            throw ValidationError("data file not found: " + flag_value);
        }
        manifest_->add_input(flag_value);
        return parse_csv(flag_value);
    }

    Checkpoint load_model()
    {
        if (opt_.checkpoint.empty()) {
            throw ValidationError("--checkpoint is required");
        }
        if (!fs::exists(opt_.checkpoint)) {
            throw ValidationError("checkpoint not found: " + opt_.checkpoint);
        }
        manifest_->add_input(opt_.checkpoint);
        return load_checkpoint(opt_.checkpoint);
    }

    void finish()
    {
        manifest_->set_config(config_.to_json());
        manifest_->write();
        std::cerr << name_ << ": wrote " << (out_ / "manifest.json").string() << '\n';
    }

private:
    const Options& opt_;
    std::string name_;
    PipelineConfig config_;
    std::string config_file_;
    fs::path out_;
    std::optional<RunManifest> manifest_;
};

FeatureConfig features_for(const PipelineConfig& cfg, const SensorDataset& data, std::vector<SensorId> sensors,
                           std::map<SensorId, std::vector<SensorId>> covariates)
{
    FeatureConfig f;
    f.context_length = cfg.ablation.context_length;
    f.prediction_length = cfg.ablation.prediction_length;
    f.lags = cfg.ablation.lags.empty()
                 ? default_lags(data.step(), f.context_length, std::min(cfg.ablation.split.train_len, data.length()))
                 : cfg.ablation.lags;
    f.sensors = std::move(sensors);
    f.covariates = std::move(covariates);
    for (const auto& s : f.sensors) {
        data.index_of(s);
    }
    for (const auto& [s, list] : f.covariates) {
        for (const auto& c : list) {
            data.index_of(c);
        }
    }
    f.validate();
    return f;
}

std::vector<CovariateSelection> read_selection(const std::string& path)
{
    const auto j = read_json_file(path);
    std::vector<CovariateSelection> out;
    for (const auto& item : j.at("selections")) {
        out.push_back(CovariateSelection::from_json(item));
    }
    return out;
}

nlohmann::json selection_json(const std::vector<CovariateSelection>& sel, const std::string& kind)
{
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : sel) {
        arr.push_back(s.to_json());
    }
    return {{"kind", kind}, {"selections", arr}};
}

void cmd_synth(const Options& opt)
{
    Command cmd("synth", opt);
    auto& cfg = cmd.config();
    SynthNetworkSpec spec = cfg.synth ? *cfg.synth : default_template(cfg.ablation.train.seed, cfg.synth_noise);
    if (opt.length) {
        spec.length = *opt.length;
    }
    spec.validate();
    cmd.manifest().add_seed("synth", spec.seed);
    const auto t0 = std::chrono::steady_clock::now();
    const auto data = generate(spec);
    std::ostringstream csv;
    write_csv(csv, data);
    cmd.artifact("data.csv", csv.str());
    cmd.artifact("network.json", spec.to_json().dump(2) + "\n");
    cmd.manifest().add_timing("generate_seconds", seconds_since(t0));
    cfg.synth = spec;
    cmd.finish();
}

void cmd_mi_matrix(const Options& opt)
{
    Command cmd("mi-matrix", opt);
    auto data = cmd.load_data(opt.data);
    if (opt.prefix) {
        if (*opt.prefix == 0 || *opt.prefix > data.length()) {
            throw ValidationError("--prefix must lie in [1, " + std::to_string(data.length()) + "]");
        }
        data = data.prefix(*opt.prefix);
    } else if (!opt.all_data) {
        const std::size_t train_len = cmd.config().ablation.split.train_len;
        if (train_len <= data.length()) {
            data = data.prefix(train_len);
        } else {
            warn("data has " + std::to_string(data.length()) + " steps, fewer than the training prefix " +
                 std::to_string(train_len) + "; using all of it");
        }
    }
    const auto t0 = std::chrono::steady_clock::now();
    const auto matrix = mi_matrix(data, MiOptions{cmd.config().mi_lag});
    cmd.manifest().add_timing("mi_seconds", seconds_since(t0));
    cmd.artifact("mi_matrix.csv", matrix.to_csv());
    cmd.artifact("mi_matrix.json", matrix.to_json().dump(2) + "\n");
    cmd.finish();
}

void cmd_select(const Options& opt)
{
    Command cmd("select", opt);
    if (opt.mi.empty()) {
        throw ValidationError("--mi is required");
    }
    cmd.manifest().add_input(opt.mi);
    const auto matrix = MiMatrix::from_json(read_json_file(opt.mi));
    const auto& targets = cmd.config().targets;
    if (targets.empty()) {
        throw ValidationError("no targets given (--targets or config 'targets')");
    }
    const std::size_t k = cmd.config().ablation.top_k;
    const auto informative = select_informative_covariates(matrix, targets, k);
    std::vector<CovariateSelection> chosen;
    if (opt.kind == "informative") {
        chosen = informative;
    } else if (opt.kind == "less") {
        std::set<SensorId> used;
        for (const auto& s : informative) {
            used.insert(s.covariates.begin(), s.covariates.end());
        }
        const std::vector<SensorId> exclude(used.begin(), used.end());
        chosen = select_less_informative(matrix, targets, exclude, k);
    } else {
        throw ValidationError("--kind must be 'informative' or 'less'");
    }
    cmd.artifact("selection.json", selection_json(chosen, opt.kind).dump(2) + "\n");
    cmd.finish();
}

void cmd_train(const Options& opt)
{
    Command cmd("train", opt);
    auto& cfg = cmd.config();
    const auto data = cmd.load_data(opt.data);
    cfg.ablation.split.validate(data.length());
    const auto splits = split(data, cfg.ablation.split);

    std::vector<SensorId> sensors = !opt.sensors.empty() ? to_ids(opt.sensors) : cfg.targets;
    if (sensors.size() == 1 && sensors.front().str() == "all") {
        sensors = data.ids();
    }
    if (sensors.empty()) {
        throw ValidationError("no sensors to train on (--sensors, --targets or config 'targets')");
    }
    std::map<SensorId, std::vector<SensorId>> covariates;
    if (!opt.selection.empty()) {
        cmd.manifest().add_input(opt.selection);
        for (const auto& sel : read_selection(opt.selection)) {
            covariates[sel.target] = sel.covariates;
        }
    }
    const auto features = features_for(cfg, data, sensors, covariates);
    const auto model = with_features(cfg.ablation.model, features);
    const auto& tc = cfg.ablation.train;
    cmd.manifest().add_seed("train", tc.seed);

    const auto t0 = std::chrono::steady_clock::now();
    const auto batches = window_sampler(splits.train, features, tc.batch_size, tc.seed);
    const std::size_t val_span = cfg.ablation.split.val_len - cfg.ablation.split.train_len;
    const Validator validator = [&](const ModelParams& p) {
        return mean_span_mase(p, splits.validation, splits.train, features, val_span, tc.eval_samples, tc.seed,
                              tc.season);
    };
    const auto result = train(model, tc, batches, validator);
    cmd.manifest().add_timing("train_seconds", seconds_since(t0));

    const nlohmann::json metadata{{"features", feature_config_to_json(features)},
                                  {"train", tc.to_json()},
                                  {"split",
                                   {{"train_len", cfg.ablation.split.train_len},
                                    {"val_len", cfg.ablation.split.val_len},
                                    {"test_len", cfg.ablation.split.test_len}}},
                                  {"best_step", result.history.best_step},
                                  {"best_val_mase", result.history.best_val_mase}};
    const auto ck = fs::path(opt.out_dir) / "checkpoint.gattf";
    save_checkpoint(ck, result.params, metadata);
    cmd.manifest().add_artifact(ck);
    cmd.artifact("history.csv", result.history.to_csv());
    cmd.finish();
}

std::vector<SensorId> model_sensors(const FeatureConfig& f, const Options& opt)
{
    if (opt.sensors.empty()) {
        return f.sensors;
    }
    const auto wanted = to_ids(opt.sensors);
    for (const auto& s : wanted) {
        if (std::find(f.sensors.begin(), f.sensors.end(), s) == f.sensors.end()) {
            throw ValidationError("sensor " + s.str() + " is not modelled by this checkpoint");
        }
    }
    return wanted;
}

void cmd_forecast(const Options& opt)
{
    Command cmd("forecast", opt);
    const auto ck = cmd.load_model();
    auto data = cmd.load_data(opt.data);
    if (opt.prefix) {
        if (*opt.prefix > data.length()) {
            throw ValidationError("--prefix exceeds the data length " + std::to_string(data.length()));
        }
        data = data.prefix(*opt.prefix);
    }
    const auto features = feature_config_from_json(ck.metadata.at("features"));
    const std::size_t W = features.context_length + features.prediction_length;
    if (data.length() < W + features.max_lag()) {
        throw ValidationError("need at least " + std::to_string(W + features.max_lag()) + " steps, have " +
                              std::to_string(data.length()));
    }
    const std::size_t n = cmd.config().forecast_samples;
    const std::uint64_t seed = cmd.config().ablation.train.seed;
    cmd.manifest().add_seed("sampling", seed);

    std::ostringstream points, samples;
    points << "sensor,step,timestamp,actual,median,q10,q90\n";
    samples << "sensor,sample,step,value\n";
    const auto t0 = std::chrono::steady_clock::now();
    for (const auto& sensor : model_sensors(features, opt)) {
        const auto inst = make_instance(data, features, sensor, data.length() - W);
        const auto dist = sample_forecast(ck.params, inst, n, seed);
        const auto med = dist.median();
        const auto q10 = dist.quantile(0.1);
        const auto q90 = dist.quantile(0.9);
        const auto& series = data[data.index_of(sensor)];
        for (std::size_t t = 0; t < dist.horizon; ++t) {
            const std::size_t idx = inst.start + features.context_length + t;
            points << sensor.str() << ',' << t + 1 << ',' << format_iso8601(series.timestamp(idx)) << ','
                   << (inst.observed_future[t] ? format_double(inst.target_future[t]) : "") << ','
                   << format_double(med[t]) << ',' << format_double(q10[t]) << ',' << format_double(q90[t]) << '\n';
        }
        for (std::size_t s = 0; s < dist.num_samples; ++s) {
            for (std::size_t t = 0; t < dist.horizon; ++t) {
                samples << sensor.str() << ',' << s << ',' << t + 1 << ',' << format_double(dist.sample(s, t))
                        << '\n';
            }
        }
    }
    cmd.manifest().add_timing("forecast_seconds", seconds_since(t0));
    cmd.artifact("forecast.csv", points.str());
    cmd.artifact("samples.csv", samples.str());
    cmd.finish();
}

void cmd_evaluate(const Options& opt)
{
    Command cmd("evaluate", opt);
    const auto ck = cmd.load_model();
    const auto data = cmd.load_data(opt.data);
    const auto features = feature_config_from_json(ck.metadata.at("features"));
    auto& cfg = cmd.config();
    if (!cmd.has_config_file() && ck.metadata.contains("split")) {
        const auto& s = ck.metadata.at("split");
        cfg.ablation.split = SplitSpec{s.at("train_len"), s.at("val_len"), s.at("test_len")};
    }
    cfg.ablation.split.validate(data.length());
    const auto splits = split(data, cfg.ablation.split);
    const auto& tc = cfg.ablation.train;
    cmd.manifest().add_seed("sampling", tc.seed);

    const std::size_t test_span = cfg.ablation.split.test_len - cfg.ablation.split.val_len;
    nlohmann::json reports = nlohmann::json::array();
    std::ostringstream csv;
    csv << "target,horizon,mase,smape,mae,rmse\n";
    for (const auto& sensor : model_sensors(features, opt)) {
        const auto r = evaluate_span(ck.params, splits.test, splits.train[splits.train.index_of(sensor)], features,
                                     sensor, test_span, cfg.forecast_samples, tc.seed, tc.season);
        reports.push_back(r.to_json());
        csv << sensor.str() << ',' << r.horizon << ',' << format_double(r.mase) << ',' << format_double(r.smape)
            << ',' << format_double(r.mae) << ',' << format_double(r.rmse) << '\n';
    }
    cmd.artifact("metrics.json", reports.dump(2) + "\n");
    cmd.artifact("metrics.csv", csv.str());
    cmd.finish();
}

/// Trains one model on every sensor and returns those whose validation MASE exceeds 1.
std::vector<SensorId> auto_targets(const PipelineConfig& cfg, const SensorDataset& data, const DatasetSplits& splits,
                                   Command& cmd)
{
    const auto features = features_for(cfg, data, data.ids(), {});
    const auto& tc = cfg.ablation.train;
    const auto batches = window_sampler(splits.train, features, tc.batch_size, tc.seed);
    const std::size_t val_span = cfg.ablation.split.val_len - cfg.ablation.split.train_len;
    const Validator validator = [&](const ModelParams& p) {
        return mean_span_mase(p, splits.validation, splits.train, features, val_span, tc.eval_samples, tc.seed,
                              tc.season);
    };
    const auto result = train(with_features(cfg.ablation.model, features), tc, batches, validator);
    std::map<SensorId, double> scores;
    std::ostringstream csv;
    csv << "sensor,val_mase\n";
    for (const auto& s : features.sensors) {
        const std::vector<SensorId> one{s};
        scores[s] = mean_span_mase(result.params, splits.validation, splits.train, features, val_span,
                                   tc.eval_samples, tc.seed, tc.season, one);
        csv << s.str() << ',' << format_double(scores[s]) << '\n';
    }
    cmd.artifact("predictability.csv", csv.str());
    auto targets = low_predictability_targets(scores);
    if (targets.empty()) {
        throw InsufficientDataError("no sensor has validation MASE above 1; pass --targets explicitly");
    }
    return targets;
}

void cmd_ablation(const Options& opt)
{
    Command cmd("ablation", opt);
    auto& cfg = cmd.config();
    SensorDataset data;
    if (opt.data.empty()) {
        const SynthNetworkSpec spec =
            cfg.synth ? *cfg.synth : default_template(cfg.ablation.train.seed, cfg.synth_noise);
        spec.validate();
        cmd.manifest().add_seed("synth", spec.seed);
        data = generate(spec);
        std::ostringstream csv;
        write_csv(csv, data);
        cmd.artifact("data.csv", csv.str());
        cfg.synth = spec;
    } else {
        data = cmd.load_data(opt.data);
    }
    cfg.ablation.split.validate(data.length());
    cmd.manifest().add_seed("train", cfg.ablation.train.seed);
    const auto splits = split(data, cfg.ablation.split);

    const auto t0 = std::chrono::steady_clock::now();
    const auto mi = mi_matrix(splits.train, MiOptions{cfg.mi_lag});
    cmd.artifact("mi_matrix.csv", mi.to_csv());

    if (cfg.targets.size() == 1 && cfg.targets.front().str() == "auto") {
        cfg.targets = auto_targets(cfg, data, splits, cmd);
    }
    if (cfg.targets.empty()) {
        throw ValidationError("no targets given (--targets, config 'targets', or 'auto')");
    }
    const auto report = run_ablation(data, cfg.targets, mi, cfg.ablation);
    cmd.manifest().add_timing("ablation_seconds", seconds_since(t0));

    nlohmann::json arms = nlohmann::json::array();
    for (const auto& a : report.arms) {
        nlohmann::json cov = nlohmann::json::object();
        for (const auto& [t, list] : a.covariates) {
            cov[t.str()] = ids_json(list);
        }
        arms.push_back({{"arm", to_string(a.arm)},
                        {"training_sensors", ids_json(a.training_sensors)},
                        {"covariates", cov},
                        {"best_step", a.history.best_step},
                        {"error", a.error ? nlohmann::json(*a.error) : nlohmann::json()}});
        cmd.artifact("history_" + to_string(a.arm) + ".csv", a.history.to_csv());
    }
    cmd.artifact("ablation.csv", report.to_csv());
    cmd.artifact("ablation_per_target.csv", report.per_target_csv());
    cmd.artifact("ablation.txt", report.to_text());
    cmd.artifact("arms.json", arms.dump(2) + "\n");
    std::cout << report.to_text();
    cmd.finish();
}

} // namespace

int run_cli(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    return run_cli(args);
}

int run_cli(const std::vector<std::string>& args)
{
    CLI::App app{"Covariate-selection forecasting pipeline for traffic-flow sensors"};
    app.require_subcommand(1);
    Options opt;
    std::function<void(const Options&)> action;

    auto common = [&opt](CLI::App* sub) {
        sub->add_option("-c,--config", opt.config_path,
                        std::string("JSON config file (default: $") + kConfigEnv + ")");
        sub->add_option("-o,--out", opt.out_dir, "Output directory")->required();
        sub->add_option("--seed", opt.seed, "Master seed (overrides config)");
    };

    auto* synth = app.add_subcommand("synth", "Generate a synthetic sensor network");
    common(synth);
    synth->add_option("--noise", opt.noise, "Noise std as a fraction of the amplitude (default template)");
    synth->add_option("--length", opt.length, "Number of steps");
    synth->callback([&] { action = cmd_synth; });

    auto* mi = app.add_subcommand("mi-matrix", "Pairwise mutual information of every sensor pair");
    common(mi);
    mi->add_option("-d,--data", opt.data, "Sensor CSV")->required();
    mi->add_option("--lag", opt.lag, "Pair x[t] with y[t - lag]");
    mi->add_option("--prefix", opt.prefix, "Use only the first N steps (default: the training prefix)");
    mi->add_flag("--all-data", opt.all_data, "Use every step, including validation and test");
    mi->callback([&] { action = cmd_mi_matrix; });

    auto* sel = app.add_subcommand("select", "Pick covariates for target sensors from an MI matrix");
    common(sel);
    sel->add_option("--mi", opt.mi, "mi_matrix.json from mi-matrix")->required();
    sel->add_option("-t,--targets", opt.targets, "Target sensors")->delimiter(',');
    sel->add_option("-k,--top-k", opt.top_k, "Covariates per target");
    sel->add_option("--kind", opt.kind, "informative or less")->check(CLI::IsMember({"informative", "less"}));
    sel->callback([&] { action = cmd_select; });

    auto* tr = app.add_subcommand("train", "Train a forecasting model");
    common(tr);
    tr->add_option("-d,--data", opt.data, "Sensor CSV")->required();
    tr->add_option("-t,--targets", opt.targets, "Sensors to model")->delimiter(',');
    tr->add_option("--sensors", opt.sensors, "Sensors to model ('all' for every sensor)")->delimiter(',');
    tr->add_option("--selection", opt.selection, "selection.json with covariates per sensor");
    tr->add_option("--max-steps", opt.max_steps, "Optimisation steps");
    tr->add_option("--samples", opt.samples, "Samples per validation forecast");
    tr->add_option("--mase-season", opt.mase_season, "Seasonal period of the MASE denominator (1 = naive)");
    tr->callback([&] { action = cmd_train; });

    auto* fc = app.add_subcommand("forecast", "Sample forecasts for the last window of the data");
    common(fc);
    fc->add_option("--checkpoint", opt.checkpoint, "Trained checkpoint")->required();
    fc->add_option("-d,--data", opt.data, "Sensor CSV")->required();
    fc->add_option("--sensors", opt.sensors, "Subset of modelled sensors")->delimiter(',');
    fc->add_option("--prefix", opt.prefix, "Forecast the window ending at step N");
    fc->add_option("--samples", opt.samples, "Sample paths per sensor");
    fc->callback([&] { action = cmd_forecast; });

    auto* ev = app.add_subcommand("evaluate", "Score a checkpoint on the test window");
    common(ev);
    ev->add_option("--checkpoint", opt.checkpoint, "Trained checkpoint")->required();
    ev->add_option("-d,--data", opt.data, "Sensor CSV")->required();
    ev->add_option("--sensors", opt.sensors, "Subset of modelled sensors")->delimiter(',');
    ev->add_option("--samples", opt.samples, "Samples per forecast");
    ev->add_option("--mase-season", opt.mase_season, "Seasonal period of the MASE denominator (1 = naive)");
    ev->callback([&] { action = cmd_evaluate; });

    auto* ab = app.add_subcommand("ablation", "Four-way covariate ablation");
    common(ab);
    ab->add_option("-d,--data", opt.data, "Sensor CSV (default: generate the synthetic template)");
    ab->add_option("-t,--targets", opt.targets, "Target sensors, or 'auto'")->delimiter(',');
    ab->add_option("--arms", opt.arms, "Subset of arms")->delimiter(',');
    ab->add_option("-k,--top-k", opt.top_k, "Covariates per target");
    ab->add_option("--max-steps", opt.max_steps, "Optimisation steps per arm");
    ab->add_option("--samples", opt.samples, "Samples per forecast");
    ab->add_option("--noise", opt.noise, "Synthetic noise fraction when no data is given");
    ab->add_option("--mase-season", opt.mase_season, "Seasonal period of the MASE denominator (1 = naive)");
    ab->callback([&] { action = cmd_ablation; });

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        action(opt);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const RangeError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}

} // namespace gattf::cli
