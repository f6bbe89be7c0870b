#include "imb/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace imb {

namespace {
constexpr char kMagic[8] = {'I', 'M', 'B', 'C', 'K', 'P', 'T', '1'};
}

void save_checkpoint(const std::string& path, const NetworkParams& params,
                     const nlohmann::json& config_snapshot, int epoch) {
    params.validate();
    nlohmann::json header;
    header["version"] = 1;
    header["epoch"] = epoch;
    std::vector<int> widths;
    for (const auto& lp : params.layers) widths.push_back(lp.W.rows);
    header["arch"] = {{"input_dim", params.input_dim},
                      {"widths", widths},
                      {"n_classes", params.n_classes()}};
    header["config"] = config_snapshot;
    const std::string hs = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f.write(kMagic, 8);
    const std::uint32_t len = static_cast<std::uint32_t>(hs.size());
    unsigned char lenb[4] = {static_cast<unsigned char>(len), static_cast<unsigned char>(len >> 8),
                             static_cast<unsigned char>(len >> 16),
                             static_cast<unsigned char>(len >> 24)};
    f.write(reinterpret_cast<char*>(lenb), 4);
    f.write(hs.data(), static_cast<std::streamsize>(hs.size()));

    Vector flat(params.flat_size());
    params.to_flat(flat);
    f.write(reinterpret_cast<const char*>(flat.data()),
            static_cast<std::streamsize>(flat.size() * sizeof(double)));
    if (!f) throw std::runtime_error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error(path + ": not an IMBCKPT1 checkpoint");
    unsigned char lenb[4];
    f.read(reinterpret_cast<char*>(lenb), 4);
    if (!f) throw std::runtime_error(path + ": truncated header length");
    const std::uint32_t len = std::uint32_t(lenb[0]) | (std::uint32_t(lenb[1]) << 8) |
                              (std::uint32_t(lenb[2]) << 16) | (std::uint32_t(lenb[3]) << 24);
    std::string hs(len, '\0');
    f.read(hs.data(), len);
    if (!f) throw std::runtime_error(path + ": truncated header");
    const nlohmann::json header = nlohmann::json::parse(hs);
    if (header.at("version").get<int>() != 1)
        throw std::runtime_error(path + ": unsupported checkpoint version");

    Checkpoint cp;
    cp.epoch = header.at("epoch").get<int>();
    cp.config = header.value("config", nlohmann::json::object());

    const auto& arch = header.at("arch");
    const int input_dim = arch.at("input_dim").get<int>();
    const std::vector<int> widths = arch.at("widths").get<std::vector<int>>();
    const int n_classes = arch.at("n_classes").get<int>();

    NetworkParams p;
    p.input_dim = input_dim;
    int prev = input_dim;
    for (int w : widths) {
        LayerParams lp;
        lp.W = Matrix(w, prev);
        lp.b.assign(w, 0.0);
        lp.r_logits.assign(w, 0.0);
        p.layers.push_back(std::move(lp));
        prev = w;
    }
    p.head.W = Matrix(n_classes, prev);
    p.head.b.assign(n_classes, 0.0);

    Vector flat(p.flat_size());
    f.read(reinterpret_cast<char*>(flat.data()),
           static_cast<std::streamsize>(flat.size() * sizeof(double)));
    if (!f) throw std::runtime_error(path + ": truncated tensor payload");
    p.from_flat(flat);
    p.validate();
    cp.params = std::move(p);
    return cp;
}

}  // namespace imb
