#include "cli.hpp"

#include "gattf/ingest.hpp"
#include "gattf/mi_select.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using gattf::cli::run_cli;

namespace {

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override
    {
        root_ = fs::temp_directory_path() /
                ("gattf_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(root_);
        fs::create_directories(root_);
    }
    void TearDown() override { fs::remove_all(root_); }

    fs::path write(const std::string& name, const std::string& text)
    {
        const auto p = root_ / name;
        std::ofstream(p, std::ios::binary) << text;
        return p;
    }

    fs::path tiny_config()
    {
        return write("tiny.json", R"({
  "model": {"d_model": 8, "ff_dim": 16, "heads": 2, "encoder_layers": 1, "decoder_layers": 1, "dropout": 0.0},
  "train": {"batch_size": 2, "max_steps": 2, "eval_every": 1, "eval_samples": 3, "season": 24},
  "split": {"train_len": 960, "val_len": 1080, "test_len": 1200},
  "context_length": 48, "prediction_length": 12, "lags": [1, 2, 24],
  "targets": ["A6"], "forecast": {"samples": 4}
})");
    }

    fs::path root_;
};

} // namespace

TEST_F(CliTest, MiMatrixOfIdenticalSensors)
{
    std::ostringstream csv;
    csv << "timestamp,sensor_id,flow\n";
    for (int t = 0; t < 400; ++t) {
        const auto ts = gattf::format_iso8601(1704067200 + t * 300);
        const int v = (t * 37) % 101;
        csv << ts << ",X," << v << '\n' << ts << ",Y," << v << '\n';
    }
    const auto data = write("data.csv", csv.str());
    const auto out = root_ / "mi";
    ASSERT_EQ(run_cli({"mi-matrix", "--data", data.string(), "--out", out.string(), "--all-data"}), 0);
    const auto m = gattf::MiMatrix::from_json(nlohmann::json::parse(slurp(out / "mi_matrix.json")));
    ASSERT_EQ(m.size(), 2u);
    EXPECT_GT(m.at(0, 1), 0.0);
    EXPECT_DOUBLE_EQ(m.at(0, 1), m.at(1, 0));
    EXPECT_NEAR(m.at(0, 0), m.at(0, 1), 1e-12);
    EXPECT_NEAR(m.at(1, 1), m.at(0, 1), 1e-12);
    EXPECT_EQ(slurp(out / "mi_matrix.csv"), m.to_csv());

    const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
    EXPECT_EQ(manifest.at("command"), "mi-matrix");
    std::vector<std::string> artifacts;
    for (const auto& a : manifest.at("artifacts")) {
        artifacts.push_back(fs::path(a.at("path").get<std::string>()).filename().string());
        EXPECT_EQ(a.at("sha256").get<std::string>().size(), 64u);
    }
    EXPECT_NE(std::find(artifacts.begin(), artifacts.end(), "mi_matrix.csv"), artifacts.end());
    EXPECT_EQ(manifest.at("inputs").size(), 1u);
}

TEST_F(CliTest, MissingCheckpointIsValidationError)
{
    const auto data = write("data.csv", "timestamp,sensor_id,flow\n2024-01-01T00:00:00Z,A,1\n");
    const auto ckpt = root_ / "nowhere" / "model.gattf";
    ::testing::internal::CaptureStderr();
    const int code = run_cli({"forecast", "--checkpoint", ckpt.string(), "--data", data.string(), "--out",
                              (root_ / "fc").string()});
    const std::string err = ::testing::internal::GetCapturedStderr();
    EXPECT_EQ(code, gattf::cli::kExitValidation);
    EXPECT_NE(err.find(ckpt.string()), std::string::npos) << err;
}

TEST_F(CliTest, UsageErrors)
{
    ::testing::internal::CaptureStderr();
    ::testing::internal::CaptureStdout();
    EXPECT_EQ(run_cli({"mi-matrix", "--out", (root_ / "x").string()}), gattf::cli::kExitValidation);
    EXPECT_EQ(run_cli({"no-such-command"}), gattf::cli::kExitValidation);
    EXPECT_EQ(run_cli({"mi-matrix", "--data", (root_ / "absent.csv").string(), "--out",
                       (root_ / "x").string()}),
              gattf::cli::kExitValidation);
    const auto bad = write("bad.json", R"({"modle": {}})");
    EXPECT_EQ(run_cli({"synth", "--config", bad.string(), "--out", (root_ / "s").string()}),
              gattf::cli::kExitValidation);
    ::testing::internal::GetCapturedStdout();
    const std::string err = ::testing::internal::GetCapturedStderr();
    EXPECT_NE(err.find("modle"), std::string::npos) << err;
}

TEST_F(CliTest, SynthIsByteIdenticalAcrossRuns)
{
    const auto a = root_ / "a";
    const auto b = root_ / "b";
    ASSERT_EQ(run_cli({"synth", "--seed", "5", "--length", "1200", "--out", a.string()}), 0);
    ASSERT_EQ(run_cli({"synth", "--seed", "5", "--length", "1200", "--out", b.string()}), 0);
    EXPECT_EQ(slurp(a / "data.csv"), slurp(b / "data.csv"));
    EXPECT_EQ(slurp(a / "network.json"), slurp(b / "network.json"));
    const auto ds = gattf::parse_csv(a / "data.csv");
    EXPECT_EQ(ds.size(), 14u);
    EXPECT_EQ(ds.length(), 1200u);
}

TEST_F(CliTest, TrainForecastEvaluatePipeline)
{
    const auto cfg = tiny_config();
    const auto s = root_ / "s";
    ASSERT_EQ(run_cli({"synth", "--seed", "1", "--length", "1200", "--out", s.string()}), 0);
    const auto data = (s / "data.csv").string();

    const auto mi = root_ / "mi";
    ASSERT_EQ(run_cli({"mi-matrix", "--config", cfg.string(), "--data", data, "--out", mi.string()}), 0);
    const auto sel = root_ / "sel";
    ASSERT_EQ(run_cli({"select", "--config", cfg.string(), "--mi", (mi / "mi_matrix.json").string(),
                       "--top-k", "2", "--out", sel.string()}),
              0);
    const auto selection = nlohmann::json::parse(slurp(sel / "selection.json"));
    ASSERT_EQ(selection.at("selections").size(), 1u);
    EXPECT_EQ(selection.at("selections")[0].at("covariates").size(), 2u);

    const auto tr = root_ / "tr";
    ASSERT_EQ(run_cli({"train", "--config", cfg.string(), "--data", data, "--selection",
                       (sel / "selection.json").string(), "--out", tr.string()}),
              0);
    EXPECT_TRUE(fs::exists(tr / "checkpoint.gattf"));
    EXPECT_EQ(slurp(tr / "history.csv").rfind("step,train_loss,val_mase\n", 0), 0u);

    const auto fc = root_ / "fc";
    ASSERT_EQ(run_cli({"forecast", "--config", cfg.string(), "--checkpoint", (tr / "checkpoint.gattf").string(), "--data", data,
                       "--out", fc.string()}),
              0);
    const std::string forecast = slurp(fc / "forecast.csv");
    EXPECT_EQ(forecast.rfind("sensor,step,timestamp,actual,median,q10,q90\n", 0), 0u);
    EXPECT_EQ(std::count(forecast.begin(), forecast.end(), '\n'), 1 + 12);
    const std::string samples = slurp(fc / "samples.csv");
    EXPECT_EQ(std::count(samples.begin(), samples.end(), '\n'), 1 + 4 * 12);

    const auto ev = root_ / "ev";
    ASSERT_EQ(run_cli({"evaluate", "--checkpoint", (tr / "checkpoint.gattf").string(), "--data", data,
                       "--out", ev.string()}),
              0);
    const auto metrics = nlohmann::json::parse(slurp(ev / "metrics.json"));
    EXPECT_FALSE(metrics.empty());

    const auto tr2 = root_ / "tr2";
    ASSERT_EQ(run_cli({"train", "--config", cfg.string(), "--data", data, "--selection",
                       (sel / "selection.json").string(), "--out", tr2.string()}),
              0);
    EXPECT_EQ(slurp(tr / "history.csv"), slurp(tr2 / "history.csv"));
    EXPECT_EQ(slurp(tr / "checkpoint.gattf"), slurp(tr2 / "checkpoint.gattf"));
}
