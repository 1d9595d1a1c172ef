#include "pesto/model.hpp"

#include "pesto/config.hpp"

#include <cstring>
#include <fstream>

namespace pesto {

std::size_t param_count(const ModelConfig& cfg) {
    cfg.validate();
    std::size_t n = 2; // layer-norm gain/bias (per-channel, single input channel)
    for (int l = 0; l < 6; ++l) {
        const int ci = l == 0 ? 1 : cfg.conv_channels[std::size_t(l - 1)];
        const int co = cfg.conv_channels[std::size_t(l)];
        const int k = cfg.kernel_sizes[std::size_t(l)];
        n += std::size_t(co) * ci * k + std::size_t(co);
        if (l < 2 && ci != co) n += std::size_t(co) * ci + std::size_t(co); // 1x1 skip projection
    }
    const std::size_t flat = std::size_t(cfg.conv_channels[5]) * cfg.in_bins;
    if (cfg.toeplitz)
        n += flat + std::size_t(cfg.out_dim) - 1;
    else
        n += flat * std::size_t(cfg.out_dim);
    return n;
}

namespace {

constexpr char kMagic[6] = {'P', 'E', 'S', 'T', 'O', '1'};
constexpr std::uint32_t kModelVersion = 1;

nlohmann::json meta_to_json(const ModelConfig& model, const ModelMeta& meta) {
    nlohmann::json j;
    j["model"] = model;
    j["cqt"] = meta.cqt;
    j["crop"] = meta.crop;
    j["loss"] = meta.loss;
    j["p0"] = meta.p0;
    j["fingerprint"] = meta.fingerprint;
    return j;
}

} // namespace

void save_model(const std::string& path, const Network<float>& net, const ModelMeta& meta) {
    const std::string header = meta_to_json(net.config(), meta).dump();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("save_model: cannot open " + path + " for writing");
    f.write(kMagic, 6);
    f.write(reinterpret_cast<const char*>(&kModelVersion), 4);
    const std::uint64_t hlen = header.size();
    f.write(reinterpret_cast<const char*>(&hlen), 8);
    f.write(header.data(), std::streamsize(header.size()));
    const auto& store = net.params();
    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto& t = store.entry(i).t;
        f.write(reinterpret_cast<const char*>(t.v.data()),
                std::streamsize(t.v.size() * sizeof(float)));
    }
    if (!f) throw FormatError("save_model: write failed for " + path);
}

LoadedModel load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("load_model: cannot open " + path);
    char magic[6];
    if (!f.read(magic, 6) || std::memcmp(magic, kMagic, 6) != 0)
        throw FormatError("load_model: bad magic in " + path);
    std::uint32_t version = 0;
    if (!f.read(reinterpret_cast<char*>(&version), 4) || version != kModelVersion)
        throw FormatError("load_model: unsupported version in " + path);
    std::uint64_t hlen = 0;
    if (!f.read(reinterpret_cast<char*>(&hlen), 8))
        throw FormatError("load_model: truncated header in " + path);
    std::string header(hlen, '\0');
    if (!f.read(header.data(), std::streamsize(hlen)))
        throw FormatError("load_model: truncated header in " + path);

    ModelConfig model_cfg;
    ModelMeta meta;
    try {
        const auto j = nlohmann::json::parse(header);
        model_cfg = j.at("model").get<ModelConfig>();
        meta.cqt = j.at("cqt").get<CqtConfig>();
        meta.crop = j.at("crop").get<CropConfig>();
        meta.loss = j.at("loss").get<LossConfig>();
        meta.p0 = j.at("p0").get<int>();
        meta.fingerprint = j.at("fingerprint").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("load_model: bad header json: ") + e.what());
    }

    LoadedModel out{Network<float>(model_cfg), meta};
    auto& store = out.net.params();
    for (std::size_t i = 0; i < store.size(); ++i) {
        auto& t = store.entry(i).t;
        if (!f.read(reinterpret_cast<char*>(t.v.data()),
                    std::streamsize(t.v.size() * sizeof(float))))
            throw FormatError("load_model: truncated payload in " + path);
    }
    return out;
}

} // namespace pesto
