#include <catch2/catch_amalgamated.hpp>

#include <fstream>

#include "test_support.hpp"
#include "xfmr/errors.hpp"
#include "xfmr/nn.hpp"
#include "xfmr/surrogate.hpp"

using namespace xfmr;
using namespace xfmr::nn;

namespace {

Network small_network(ProjectionMode mode = ProjectionMode::learned) {
    auto arch = make_preset("N7", 8);
    arch.projection = mode;
    HyperParams hp;
    hp.epochs = 1;
    hp.seed = 9;
    return train(arch, generate_dataset(64, 4), hp, LossKind::sdmse).network;
}

void write_bytes(const std::filesystem::path& p, std::span<const char> bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("save, load, save is byte-identical", "[model_io]") {
    for (auto mode : {ProjectionMode::learned, ProjectionMode::fixed}) {
        const auto net = small_network(mode);
        const auto a = testing::temp_path("model_a.bin");
        const auto b = testing::temp_path("model_b.bin");
        save_model(net, a);
        const auto loaded = load_model(a);
        save_model(loaded, b);
        const bool identical = testing::read_file(a) == testing::read_file(b);
        CHECK(identical);

        CHECK(loaded.model.architecture() == net.model.architecture());
        const Eigen::MatrixXd x = generate_dataset(10, 77).y;
        CHECK(loaded.predict(x) == net.predict(x));
        CHECK(loaded.envelope.lo == net.envelope.lo);
        CHECK(loaded.standardizer.stddev() == net.standardizer.stddev());
    }
}

TEST_CASE("truncated and padded files are corrupt", "[model_io]") {
    const auto bytes = serialize(small_network());
    for (std::size_t cut : {std::size_t{0}, std::size_t{5}, std::size_t{8}, std::size_t{40}, bytes.size() - 1}) {
        INFO("cut at " << cut);
        CHECK_THROWS_AS(deserialize(std::span(bytes).first(cut)), CorruptFileError);
    }
    auto padded = bytes;
    padded.push_back('\0');
    CHECK_THROWS_AS(deserialize(padded), CorruptFileError);

    const auto p = testing::temp_path("model_trunc.bin");
    write_bytes(p, std::span(bytes).first(bytes.size() / 2));
    CHECK_THROWS_AS(load_model(p), CorruptFileError);
}

TEST_CASE("bad magic and unknown versions are rejected", "[model_io]") {
    auto bytes = serialize(small_network());
    auto bad_magic = bytes;
    bad_magic[0] = 'Y';
    CHECK_THROWS_AS(deserialize(bad_magic), CorruptFileError);

    bytes[7] = 2;
    CHECK_THROWS_AS(deserialize(bytes), VersionMismatchError);
    CHECK_THROWS_AS(deserialize(bytes), IoError);
}

TEST_CASE("missing model file is an I/O error", "[model_io]") {
    CHECK_THROWS_AS(load_model(testing::temp_path("does_not_exist.bin")), IoError);
}
