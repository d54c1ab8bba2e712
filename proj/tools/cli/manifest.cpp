#include "manifest.hpp"

#include "gattf/checkpoint.hpp"
#include "gattf/errors.hpp"
#include "gattf/ingest.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>

namespace gattf::cli {

std::string sha256_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot read " + path.string());
    }
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 initialisation failed");
    }
    std::array<char, 1 << 16> buf;
    while (in) {
        in.read(buf.data(), buf.size());
        const auto n = in.gcount();
        if (n > 0) {
            EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(n));
        }
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xf];
    }
    return out;
}

RunManifest::RunManifest(std::string command, std::filesystem::path out_dir)
    : command_(std::move(command)), out_dir_(std::move(out_dir)), started_(std::chrono::system_clock::now()),
      t0_(std::chrono::steady_clock::now())
{
}

nlohmann::json RunManifest::to_json() const
{
    auto files = [](const std::vector<std::filesystem::path>& paths) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& p : paths) {
            arr.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
        }
        return arr;
    };
    nlohmann::json timings = timings_;
    timings["total_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    const auto started = std::chrono::system_clock::to_time_t(started_);
    return {{"command", command_},
            {"started_at", format_iso8601(static_cast<Timestamp>(started))},
            {"config", config_},
            {"seeds", seeds_},
            {"inputs", files(inputs_)},
            {"artifacts", files(artifacts_)},
            {"timings", timings}};
}

std::filesystem::path RunManifest::write() const
{
    const auto path = out_dir_ / "manifest.json";
    write_file_atomic(path, to_json().dump(2) + "\n");
    return path;
}

} // namespace gattf::cli
