#include "idr/checkpoint.hpp"

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "idr/errors.hpp"
#include "json.hpp"

namespace idr {
namespace {

constexpr char kMagic[8] = {'I', 'D', 'R', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 24) & 0xff));
}

void put_f32(std::vector<unsigned char>& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

struct Reader {
    const unsigned char* p;
    std::size_t n;
    std::size_t off = 0;

    void need(std::size_t k) const {
        if (off + k > n) throw FormatError("checkpoint truncated");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = static_cast<std::uint32_t>(p[off]) | static_cast<std::uint32_t>(p[off + 1]) << 8 |
                          static_cast<std::uint32_t>(p[off + 2]) << 16 | static_cast<std::uint32_t>(p[off + 3]) << 24;
        off += 4;
        return v;
    }
    float f32() {
        std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    std::string str(std::size_t k) {
        need(k);
        std::string s(reinterpret_cast<const char*>(p + off), k);
        off += k;
        return s;
    }
};

std::string config_json(const ModelConfig& cfg) {
    nlohmann::json j;
    j["levels"] = cfg.levels;
    j["base_channels"] = cfg.base_channels;
    j["in_channels"] = cfg.in_channels;
    j["leaky_slope"] = cfg.leaky_slope;
    j["init_seed"] = cfg.init_seed;
    return j.dump();
}

ModelConfig parse_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint config blob is not valid JSON: ") + e.what());
    }
    ModelConfig cfg;
    try {
        cfg.levels = j.at("levels").get<int>();
        cfg.base_channels = j.at("base_channels").get<int>();
        cfg.in_channels = j.at("in_channels").get<int>();
        cfg.leaky_slope = j.at("leaky_slope").get<float>();
        cfg.init_seed = j.at("init_seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint config blob missing field: ") + e.what());
    }
    return cfg;
}

}  // namespace

void save_checkpoint(const UNet& model, const std::string& path) {
    std::vector<unsigned char> buf;
    buf.insert(buf.end(), kMagic, kMagic + 8);
    put_u32(buf, kVersion);

    const std::string cfg = config_json(model.cfg);
    put_u32(buf, static_cast<std::uint32_t>(cfg.size()));
    buf.insert(buf.end(), cfg.begin(), cfg.end());

    const std::vector<std::string> names = model.param_names();
    put_u32(buf, static_cast<std::uint32_t>(names.size()));
    for (std::size_t i = 0; i < names.size(); ++i) {
        const Tensor<float>& t = model.params[i];
        put_u32(buf, static_cast<std::uint32_t>(names[i].size()));
        buf.insert(buf.end(), names[i].begin(), names[i].end());
        put_u32(buf, static_cast<std::uint32_t>(t.shape.size()));
        for (int e : t.shape) put_u32(buf, static_cast<std::uint32_t>(e));
        for (float v : t.v) put_f32(buf, v);
    }

    const std::uint32_t crc =
        static_cast<std::uint32_t>(crc32(0L, buf.data(), static_cast<uInt>(buf.size())));
    put_u32(buf, crc);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open checkpoint for writing: " + path);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw FormatError("short write on checkpoint: " + path);
}

UNet load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open checkpoint: " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (buf.size() < 8 + 4 + 4) throw FormatError("checkpoint truncated");
    if (std::memcmp(buf.data(), kMagic, 8) != 0) throw FormatError("bad checkpoint magic: " + path);

    const std::uint32_t stored_crc = static_cast<std::uint32_t>(buf[buf.size() - 4]) |
                                     static_cast<std::uint32_t>(buf[buf.size() - 3]) << 8 |
                                     static_cast<std::uint32_t>(buf[buf.size() - 2]) << 16 |
                                     static_cast<std::uint32_t>(buf[buf.size() - 1]) << 24;
    const std::uint32_t actual_crc =
        static_cast<std::uint32_t>(crc32(0L, buf.data(), static_cast<uInt>(buf.size() - 4)));
    if (stored_crc != actual_crc) throw FormatError("checkpoint checksum failure: " + path);

    Reader r{buf.data(), buf.size() - 4, 8};
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw FormatError("checkpoint version mismatch: got " + std::to_string(version) + ", expected " +
                          std::to_string(kVersion));

    const std::uint32_t cfg_len = r.u32();
    const ModelConfig cfg = parse_config(r.str(cfg_len));
    validate(cfg);

    const std::vector<ParamSpec> specs = unet_param_specs(cfg);
    const std::uint32_t count = r.u32();
    if (count != specs.size())
        throw FormatError("checkpoint parameter count " + std::to_string(count) + " does not match config (" +
                          std::to_string(specs.size()) + ")");

    UNet model = UNet::build(cfg);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = r.u32();
        const std::string name = r.str(name_len);
        if (name != specs[i].name)
            throw FormatError("checkpoint parameter '" + name + "' does not match config (expected '" +
                              specs[i].name + "')");
        const std::uint32_t rank = r.u32();
        if (rank != specs[i].shape.size())
            throw FormatError("checkpoint parameter '" + name + "' rank mismatch");
        Shape shape;
        for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(static_cast<int>(r.u32()));
        if (shape != specs[i].shape)
            throw FormatError("checkpoint parameter '" + name + "' extents do not match config");
        Tensor<float>& t = model.params[i];
        for (std::size_t k = 0; k < t.v.size(); ++k) t.v[k] = r.f32();
    }
    if (r.off != r.n) throw FormatError("checkpoint has trailing bytes: " + path);
    return model;
}

std::string checkpoint_hash(const UNet& model) { return model.param_hash(); }

}  // namespace idr
