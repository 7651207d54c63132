#include "fairkit/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace fairkit {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian; big-endian hosts are unsupported");

namespace {

constexpr char kMagic[4] = {'F', 'K', 'N', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T take(std::ifstream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw DataError("checkpoint: truncated file");
    return v;
}

void put_doubles(std::ofstream& os, const std::vector<double>& v) {
    put<std::uint64_t>(os, v.size());
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> take_doubles(std::ifstream& is) {
    const auto n = take<std::uint64_t>(is);
    std::vector<double> v(n);
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw DataError("checkpoint: truncated payload");
    return v;
}

}  // namespace

void save_net(const DenseNet& net, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("checkpoint: cannot open for write: " + path);
    os.write(kMagic, 4);
    put<std::uint32_t>(os, kVersion);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(net.layers.size()));
    put<std::uint64_t>(os, net.input_width);
    for (const Layer& l : net.layers) {
        put<std::uint32_t>(os, static_cast<std::uint32_t>(l.kind));
        put<std::uint64_t>(os, l.in_width);
        put<std::uint64_t>(os, l.out_width);
        put<std::uint32_t>(os, static_cast<std::uint32_t>(l.embed_dim));
        put<std::uint32_t>(os, static_cast<std::uint32_t>(l.categories.size()));
        for (int c : l.categories) put<std::int32_t>(os, c);
        put<double>(os, l.slope);
        put<double>(os, l.sigma);
        put<std::uint64_t>(os, l.weights.rows);
        put<std::uint64_t>(os, l.weights.cols);
        os.write(reinterpret_cast<const char*>(l.weights.values.data()),
                 static_cast<std::streamsize>(l.weights.values.size() * sizeof(double)));
        put_doubles(os, l.biases);
    }
    if (!os) throw DataError("checkpoint: write failed: " + path);
}

DenseNet load_net(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("checkpoint: cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("checkpoint: bad magic in " + path);
    const auto version = take<std::uint32_t>(is);
    if (version != kVersion) throw DataError("checkpoint: unsupported version");
    const auto layer_count = take<std::uint32_t>(is);
    DenseNet net;
    net.input_width = take<std::uint64_t>(is);
    net.layers.resize(layer_count);
    for (Layer& l : net.layers) {
        l.kind = static_cast<LayerKind>(take<std::uint32_t>(is));
        l.in_width = take<std::uint64_t>(is);
        l.out_width = take<std::uint64_t>(is);
        l.embed_dim = static_cast<int>(take<std::uint32_t>(is));
        const auto ncats = take<std::uint32_t>(is);
        l.categories.resize(ncats);
        for (auto& c : l.categories) c = take<std::int32_t>(is);
        l.slope = take<double>(is);
        l.sigma = take<double>(is);
        const auto wr = take<std::uint64_t>(is);
        const auto wc = take<std::uint64_t>(is);
        l.weights = Tensor2(wr, wc);
        is.read(reinterpret_cast<char*>(l.weights.values.data()),
                static_cast<std::streamsize>(wr * wc * sizeof(double)));
        if (!is) throw DataError("checkpoint: truncated weights");
        l.biases = take_doubles(is);
    }
    return net;
}

}  // namespace fairkit
