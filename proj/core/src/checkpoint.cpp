#include "gattf/checkpoint.hpp"

#include "gattf/errors.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace gattf {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

enum class Dtype : std::uint8_t { f32 = 1, f64 = 2 };

class Writer {
public:
    template <typename T>
    void put(T v)
    {
        char buf[sizeof(T)];
        std::memcpy(buf, &v, sizeof(T));
        out_.append(buf, sizeof(T));
    }
    void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
    std::string& str() { return out_; }

private:
    std::string out_;
};

class Reader {
public:
    Reader(const std::string& in, std::size_t end) : in_(in), end_(end) {}

    template <typename T>
    T get()
    {
        T v;
        std::memcpy(&v, take(sizeof(T)), sizeof(T));
        return v;
    }
    const char* take(std::size_t n)
    {
        if (n > end_ - pos_) {
            throw FormatError("checkpoint truncated at byte " + std::to_string(pos_));
        }
        const char* p = in_.data() + pos_;
        pos_ += n;
        return p;
    }
    bool done() const { return pos_ == end_; }

private:
    const std::string& in_;
    std::size_t end_;
    std::size_t pos_ = 0;
};

std::uint32_t crc_of(const char* data, std::size_t n)
{
    return static_cast<std::uint32_t>(crc32(0L, reinterpret_cast<const Bytef*>(data), static_cast<uInt>(n)));
}

} // namespace

std::string serialize_checkpoint(const ModelParams& params, const nlohmann::json& metadata)
{
    Writer w;
    w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
    w.put<std::uint32_t>(kCheckpointVersion);
    const std::string header = nlohmann::json{{"model", params.config().to_json()}, {"metadata", metadata}}.dump();
    w.put<std::uint64_t>(header.size());
    w.bytes(header.data(), header.size());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(params.entries().size()));
    const Dtype dtype = sizeof(Scalar) == 4 ? Dtype::f32 : Dtype::f64;
    for (const auto& [name, t] : params.entries()) {
        w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
        w.bytes(name.data(), name.size());
        w.put<std::uint8_t>(static_cast<std::uint8_t>(dtype));
        w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.shape()) {
            w.put<std::uint64_t>(d);
        }
        w.bytes(t.data().data(), t.numel() * sizeof(Scalar));
    }
    w.put<std::uint32_t>(crc_of(w.str().data(), w.str().size()));
    return std::move(w.str());
}

Checkpoint deserialize_checkpoint(const std::string& bytes)
{
    if (bytes.size() < sizeof kCheckpointMagic + 8) {
        throw FormatError("checkpoint too short");
    }
    const std::size_t body = bytes.size() - 4;
    std::uint32_t stored = 0;
    std::memcpy(&stored, bytes.data() + body, 4);
    if (stored != crc_of(bytes.data(), body)) {
        throw FormatError("checkpoint CRC mismatch");
    }
    Reader r(bytes, body);
    if (std::memcmp(r.take(sizeof kCheckpointMagic), kCheckpointMagic, sizeof kCheckpointMagic) != 0) {
        throw FormatError("not a checkpoint file (bad magic)");
    }
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version));
    }
    const auto header_len = r.get<std::uint64_t>();
    const char* hp = r.take(header_len);
    const auto header = nlohmann::json::parse(std::string(hp, header_len));
    const ModelConfig config = ModelConfig::from_json(header.at("model"));

    Checkpoint ck;
    ck.params = ModelParams::zeros(config);
    ck.metadata = header.value("metadata", nlohmann::json::object());
    const auto count = r.get<std::uint32_t>();
    if (count != ck.params.entries().size()) {
        throw FormatError("checkpoint holds " + std::to_string(count) + " tensors, config implies " +
                          std::to_string(ck.params.entries().size()));
    }
    for (auto& [expected, tensor] : ck.params.entries()) {
        const auto name_len = r.get<std::uint32_t>();
        const std::string name(r.take(name_len), name_len);
        if (name != expected) {
            throw FormatError("checkpoint tensor '" + name + "' where '" + expected + "' was expected");
        }
        const auto dtype = static_cast<Dtype>(r.get<std::uint8_t>());
        const auto rank = r.get<std::uint32_t>();
        Shape shape(rank);
        for (auto& d : shape) {
            d = static_cast<std::size_t>(r.get<std::uint64_t>());
        }
        if (shape != tensor.shape()) {
            throw FormatError("tensor '" + name + "' has shape " + shape_string(shape) + ", expected " +
                              shape_string(tensor.shape()));
        }
        auto dst = tensor.data();
        if (dtype == Dtype::f64) {
            const char* p = r.take(dst.size() * 8);
            for (std::size_t i = 0; i < dst.size(); ++i) {
                double v;
                std::memcpy(&v, p + 8 * i, 8);
                dst[i] = static_cast<Scalar>(v);
            }
        } else if (dtype == Dtype::f32) {
            const char* p = r.take(dst.size() * 4);
            for (std::size_t i = 0; i < dst.size(); ++i) {
                float v;
                std::memcpy(&v, p + 4 * i, 4);
                dst[i] = static_cast<Scalar>(v);
            }
        } else {
            throw FormatError("tensor '" + name + "' has unknown dtype");
        }
    }
    if (!r.done()) {
        throw FormatError("trailing bytes after the last tensor");
    }
    return ck;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents)
{
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error("cannot write " + tmp.string());
        }
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) {
            throw Error("write failed: " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const nlohmann::json& metadata)
{
    write_file_atomic(path, serialize_checkpoint(params, metadata));
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open checkpoint " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize_checkpoint(ss.str());
}

} // namespace gattf
