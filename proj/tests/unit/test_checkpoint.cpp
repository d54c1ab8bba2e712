#include "gattf/checkpoint.hpp"
#include "gattf/errors.hpp"

#include <gtest/gtest.h>
#include <zlib.h>

#include <cstring>
#include <filesystem>
#include <fstream>

using namespace gattf;

namespace {

ModelParams small_params(std::uint64_t seed)
{
    ModelConfig m;
    m.d_model = 8;
    m.heads = 2;
    m.ff_dim = 16;
    m.encoder_layers = 1;
    m.decoder_layers = 1;
    m.context_length = 6;
    m.prediction_length = 3;
    m.lags = {1, 2};
    m.num_covariates = 1;
    m.num_static = 3;
    return ModelParams::initialize(m, seed);
}

void reseal(std::string& bytes)
{
    const std::size_t body = bytes.size() - 4;
    const auto crc = static_cast<std::uint32_t>(crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()),
                                                      static_cast<uInt>(body)));
    std::memcpy(bytes.data() + body, &crc, 4);
}

} // namespace

TEST(Checkpoint, RoundTripIsExact)
{
    const auto params = small_params(11);
    const nlohmann::json meta{{"best_step", 40}, {"note", "x"}};
    const auto ck = deserialize_checkpoint(serialize_checkpoint(params, meta));
    EXPECT_EQ(ck.metadata, meta);
    EXPECT_EQ(ck.params.config(), params.config());
    ASSERT_EQ(ck.params.entries().size(), params.entries().size());
    for (std::size_t i = 0; i < params.entries().size(); ++i) {
        const auto& [name, t] = params.entries()[i];
        const auto& [name2, t2] = ck.params.entries()[i];
        EXPECT_EQ(name, name2);
        EXPECT_EQ(t.shape(), t2.shape());
        EXPECT_TRUE(std::equal(t.data().begin(), t.data().end(), t2.data().begin()));
    }
}

TEST(Checkpoint, SerializationIsDeterministic)
{
    EXPECT_EQ(serialize_checkpoint(small_params(3)), serialize_checkpoint(small_params(3)));
    EXPECT_NE(serialize_checkpoint(small_params(3)), serialize_checkpoint(small_params(4)));
}

TEST(Checkpoint, FlippedByteFailsCrc)
{
    auto bytes = serialize_checkpoint(small_params(1));
    bytes[bytes.size() / 2] ^= 0x01;
    try {
        deserialize_checkpoint(bytes);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("CRC"), std::string::npos);
    }
}

TEST(Checkpoint, BadMagicAndVersion)
{
    auto bytes = serialize_checkpoint(small_params(1));
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    reseal(bad_magic);
    EXPECT_THROW(deserialize_checkpoint(bad_magic), FormatError);

    auto bad_version = bytes;
    const std::uint32_t v = kCheckpointVersion + 1;
    std::memcpy(bad_version.data() + sizeof kCheckpointMagic, &v, 4);
    reseal(bad_version);
    try {
        deserialize_checkpoint(bad_version);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
    }
}

TEST(Checkpoint, TruncatedInput)
{
    const auto bytes = serialize_checkpoint(small_params(1));
    EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, 10)), FormatError);
    auto cut = bytes.substr(0, bytes.size() - 40);
    cut.append(4, '\0');
    reseal(cut);
    EXPECT_THROW(deserialize_checkpoint(cut), FormatError);
}

TEST(Checkpoint, FileRoundTripAndMissingFile)
{
    const auto dir = std::filesystem::temp_directory_path() / "gattf_ckpt_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / "model.gattf";
    const auto params = small_params(5);
    save_checkpoint(path, params, {{"k", 1}});
    const auto ck = load_checkpoint(path);
    EXPECT_EQ(ck.metadata.at("k"), 1);
    EXPECT_EQ(serialize_checkpoint(ck.params, ck.metadata), serialize_checkpoint(params, {{"k", 1}}));
    std::filesystem::remove_all(dir);
    try {
        load_checkpoint(path);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find(path.string()), std::string::npos);
    }
}
