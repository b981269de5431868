// Model file layout (all integers and floats little-endian):
//   "XFMRNN1"                      7 bytes magic
//   u8   format version (1)
//   u32  input_dim, u32 output_dim
//   u32  hidden layer count, then u32 width per hidden layer
//   u32  shortcut count, then (u32 from, u32 to) per shortcut
//   u8   projection mode (0 learned, 1 fixed)
//   u32  standardizer dimension d
//   f64  mean[d], std[d], envelope_lo[d], envelope_hi[d]
//   u64  parameter count, then f64 parameters in Model::parameters() order
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "xfmr/errors.hpp"
#include "xfmr/nn.hpp"

namespace xfmr::nn {
namespace {

constexpr char kMagic[7] = {'X', 'F', 'M', 'R', 'N', 'N', '1'};
constexpr std::uint8_t kFormatVersion = 1;

class Writer {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* c = static_cast<const char*>(p);
        buf_.insert(buf_.end(), c, c + n);
    }
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    std::vector<char> take() { return std::move(buf_); }

private:
    std::vector<char> buf_;
};

class Reader {
public:
    explicit Reader(std::span<const char> data) : data_(data) {}

    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) throw CorruptFileError("model file truncated");
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(data_[pos_++]);
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::span<const char> bytes(std::size_t n) {
        need(n);
        auto out = data_.subspan(pos_, n);
        pos_ += n;
        return out;
    }
    bool done() const { return pos_ == data_.size(); }

private:
    std::span<const char> data_;
    std::size_t pos_ = 0;
};

std::uint32_t narrow(std::size_t v) {
    if (v > UINT32_MAX) throw InvalidArgument("model dimension too large to serialize");
    return static_cast<std::uint32_t>(v);
}

}  // namespace

std::vector<char> serialize(const Network& network) {
    const auto& model = network.model;
    const auto& arch = model.architecture();
    const std::size_t d = network.standardizer.dim();
    if (network.envelope.lo.size() != static_cast<Eigen::Index>(d) ||
        network.envelope.hi.size() != static_cast<Eigen::Index>(d)) {
        throw ShapeError("serialize: envelope and standardizer dimensions differ");
    }

    Writer w;
    w.bytes(kMagic, sizeof kMagic);
    w.u8(kFormatVersion);
    w.u32(narrow(arch.input_dim));
    w.u32(narrow(arch.output_dim));
    w.u32(narrow(arch.hidden.size()));
    for (auto width : arch.hidden) w.u32(narrow(width));
    w.u32(narrow(arch.shortcuts.size()));
    for (const auto& s : arch.shortcuts) {
        w.u32(narrow(s.from));
        w.u32(narrow(s.to));
    }
    w.u8(static_cast<std::uint8_t>(arch.projection));
    w.u32(narrow(d));
    for (const auto* v : {&network.standardizer.mean(), &network.standardizer.stddev(), &network.envelope.lo,
                          &network.envelope.hi}) {
        for (Eigen::Index i = 0; i < v->size(); ++i) w.f64((*v)(i));
    }
    w.u64(model.parameter_count());
    for (double p : model.parameters()) w.f64(p);
    return w.take();
}

Network deserialize(std::span<const char> bytes) {
    Reader r(bytes);
    const auto magic = r.bytes(sizeof kMagic);
    if (std::memcmp(magic.data(), kMagic, sizeof kMagic) != 0) throw CorruptFileError("model file: bad magic");
    const auto version = r.u8();
    if (version != kFormatVersion) {
        throw VersionMismatchError("model file: format version " + std::to_string(version) + ", expected " +
                                   std::to_string(kFormatVersion));
    }

    Architecture arch;
    arch.input_dim = r.u32();
    arch.output_dim = r.u32();
    const auto depth = r.u32();
    r.need(std::size_t{4} * depth);
    for (std::uint32_t i = 0; i < depth; ++i) arch.hidden.push_back(r.u32());
    const auto shortcut_count = r.u32();
    r.need(std::size_t{8} * shortcut_count);
    for (std::uint32_t i = 0; i < shortcut_count; ++i) {
        Shortcut s;
        s.from = r.u32();
        s.to = r.u32();
        arch.shortcuts.push_back(s);
    }
    const auto mode = r.u8();
    if (mode > 1) throw CorruptFileError("model file: unknown projection mode");
    arch.projection = static_cast<ProjectionMode>(mode);
    try {
        arch.validate();
    } catch (const InvalidArgument& e) {
        throw CorruptFileError(std::string("model file: ") + e.what());
    }

    const auto d = r.u32();
    r.need(std::size_t{32} * d);
    auto read_vec = [&r, d] {
        Eigen::VectorXd v(d);
        for (std::uint32_t i = 0; i < d; ++i) v(i) = r.f64();
        return v;
    };
    Eigen::VectorXd mean = read_vec();
    Eigen::VectorXd sd = read_vec();
    Network net;
    net.envelope.lo = read_vec();
    net.envelope.hi = read_vec();
    try {
        net.standardizer = data::Standardizer(std::move(mean), std::move(sd));
    } catch (const Error& e) {
        throw CorruptFileError(std::string("model file: ") + e.what());
    }

    net.model = Model(arch);
    const auto count = r.u64();
    if (count != net.model.parameter_count()) throw CorruptFileError("model file: parameter count mismatch");
    r.need(8 * count);
    for (double& p : net.model.parameters()) p = r.f64();
    if (!r.done()) throw CorruptFileError("model file: trailing bytes");
    return net;
}

void save_model(const Network& network, const std::filesystem::path& path) {
    const auto bytes = serialize(network);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

Network load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize(bytes);
}

}  // namespace xfmr::nn
