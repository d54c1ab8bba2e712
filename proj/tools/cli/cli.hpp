#pragma once

#include "gattf/synthgen.hpp"
#include "gattf/trainer.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace gattf::cli {

/// Exit codes of the gattf tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Environment variable naming the config file used when --config is absent.
inline constexpr const char* kConfigEnv = "GATTF_CONFIG";

/// Everything a command may read from the JSON config file.
struct PipelineConfig {
    AblationConfig ablation;
    /// Full network spec; when absent `synth` uses the default template.
    std::optional<SynthNetworkSpec> synth;
    double synth_noise = 0.2;
    std::size_t mi_lag = 0;
    std::vector<SensorId> targets;
    std::size_t forecast_samples = 100;

    nlohmann::json to_json() const;
    /// Unknown top-level keys are rejected.
    static PipelineConfig from_json(const nlohmann::json& j);
};

nlohmann::json feature_config_to_json(const FeatureConfig& f);
FeatureConfig feature_config_from_json(const nlohmann::json& j);

/// Parses arguments, runs one subcommand and maps errors to exit codes.
int run_cli(int argc, char** argv);
/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args);

} // namespace gattf::cli
