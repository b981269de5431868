#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "test_support.hpp"
#include "xfmr/data.hpp"
#include "xfmr/nn.hpp"

using namespace xfmr;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = 0;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream out, err;
    Run r;
    r.code = cli::dispatch(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string tmp(const std::string& name) { return testing::temp_path(name).string(); }

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

const std::string& small_dataset() {
    static const std::string path = [] {
        const auto p = tmp("cli_data.csv");
        const auto r = run({"gen-data", "--n", "300", "--out", p, "--seed", "42"});
        REQUIRE(r.code == 0);
        return p;
    }();
    return path;
}

}  // namespace

TEST_CASE("every subcommand has help", "[cli]") {
    const std::vector<std::pair<std::string, std::string>> cmds = {
        {"gen-data", "--noise"}, {"train", "--exclude-feed-length"}, {"eval", "--model"},
        {"sweep", "--repeats"},  {"synthesize", "--targets"},         {"check", "--seed"},
    };
    for (const auto& [cmd, flag] : cmds) {
        INFO(cmd);
        const auto r = run({cmd, "--help"});
        CHECK(r.code == 0);
        CHECK(r.out.find(flag) != std::string::npos);
        CHECK(r.out.find("--threads") != std::string::npos);
    }
    CHECK(run({"--help"}).code == 0);
}

TEST_CASE("gen-data writes n rows plus a header", "[cli]") {
    const auto p = tmp("cli_gen.csv");
    const auto r = run({"gen-data", "--n", "25", "--out", p, "--seed", "3"});
    REQUIRE(r.code == 0);
    const auto text = testing::read_file(p);
    CHECK(line_count(text) == 26);
    CHECK(text.starts_with("lp_pH,"));

    const auto q = tmp("cli_gen2.csv");
    REQUIRE(run({"gen-data", "--n", "25", "--out", q, "--seed", "3", "--threads", "4"}).code == 0);
    CHECK(testing::read_file(q) == text);
}

TEST_CASE("usage errors exit 1 with a diagnostic line", "[cli]") {
    for (const auto& args : std::vector<std::vector<std::string>>{
             {},
             {"frobnicate"},
             {"gen-data", "--n", "10", "--out", tmp("x.csv")},  // no seed
             {"gen-data", "--n", "ten", "--out", tmp("x.csv"), "--seed", "1"},
             {"train", "--data", small_dataset(), "--out", tmp("m.bin"), "--seed", "1", "--arch", "N9"},
             {"train", "--data", small_dataset(), "--out", tmp("m.bin"), "--seed", "1", "--train-size", "5000"},
         }) {
        const auto r = run(args);
        INFO(r.err);
        CHECK(r.code == 1);
        CHECK(r.err.starts_with("error="));
        CHECK(r.err.find("code=1") != std::string::npos);
    }
}

TEST_CASE("I/O errors exit 2", "[cli]") {
    auto r = run({"train", "--data", tmp("missing.csv"), "--out", tmp("m.bin"), "--seed", "1"});
    CHECK(r.code == 2);
    CHECK(r.err.starts_with("error=io code=2"));
    r = run({"gen-data", "--n", "10", "--out", tmp("no_dir/x.csv"), "--seed", "1"});
    CHECK(r.code == 2);

    const auto bad = tmp("bad.csv");
    std::ofstream(bad) << "a,b,c\n1,2,3\n";
    CHECK(run({"eval", "--data", bad, "--model", tmp("m.bin"), "--out", tmp("r.csv"), "--seed", "1"}).code == 2);
}

TEST_CASE("train is reproducible and writes a log", "[cli][train]") {
    const std::vector<std::string> base = {"train",   "--data",       small_dataset(), "--seed", "7",
                                           "--arch",  "N7",           "--width",       "8",      "--epochs",
                                           "3",       "--train-size", "120",           "--test-size", "60"};
    auto a = base;
    a.insert(a.end(), {"--out", tmp("cli_a.bin")});
    auto b = base;
    b.insert(b.end(), {"--out", tmp("cli_b.bin"), "--log", tmp("cli_b_log.csv")});
    REQUIRE(run(a).code == 0);
    REQUIRE(run(b).code == 0);
    const bool same_model = testing::read_file(tmp("cli_a.bin")) == testing::read_file(tmp("cli_b.bin"));
    CHECK(same_model);
    const bool same_log = testing::read_file(tmp("cli_a.bin.log.csv")) == testing::read_file(tmp("cli_b_log.csv"));
    CHECK(same_log);
    CHECK(line_count(testing::read_file(tmp("cli_b_log.csv"))) == 4);

    const auto ev = run({"eval", "--data", small_dataset(), "--model", tmp("cli_a.bin"), "--out", tmp("cli_eval.csv"),
                         "--seed", "7", "--test-size", "60", "--name", "N7"});
    REQUIRE(ev.code == 0);
    const auto report = testing::read_file(tmp("cli_eval.csv"));
    CHECK(line_count(report) == 2);
    CHECK(report.find("\nN7,sdmse,") != std::string::npos);
}

TEST_CASE("five-target training and evaluation", "[cli][train]") {
    REQUIRE(run({"train", "--data", small_dataset(), "--out", tmp("cli_5.bin"), "--seed", "7", "--arch", "FN2",
                 "--width", "8", "--epochs", "1", "--train-size", "100", "--test-size", "50", "--exclude-feed-length"})
                .code == 0);
    CHECK(nn::load_model(tmp("cli_5.bin")).model.architecture().output_dim == 5);
    REQUIRE(run({"eval", "--data", small_dataset(), "--model", tmp("cli_5.bin"), "--out", tmp("cli_5.csv"), "--seed",
                 "7", "--test-size", "50"})
                .code == 0);
    CHECK(testing::read_file(tmp("cli_5.csv")).find(",5,") != std::string::npos);
}

TEST_CASE("config files supply defaults that flags override", "[cli]") {
    const auto cfg = tmp("cli.cfg");
    std::ofstream(cfg) << "# small run\nepochs = 2\nwidth=8\narch=FN2\ntrain-size=100\ntest-size=50\n";
    const std::vector<std::string> base = {"train", "--data", small_dataset(), "--seed", "7", "--config", cfg};

    auto a = base;
    a.insert(a.end(), {"--out", tmp("cfg_a.bin")});
    REQUIRE(run(a).code == 0);
    CHECK(nn::load_model(tmp("cfg_a.bin")).model.architecture().hidden == std::vector<std::size_t>{8, 8});
    CHECK(line_count(testing::read_file(tmp("cfg_a.bin.log.csv"))) == 3);

    auto b = base;
    b.insert(b.end(), {"--out", tmp("cfg_b.bin"), "--epochs", "4", "--arch", "FN3"});
    REQUIRE(run(b).code == 0);
    CHECK(nn::load_model(tmp("cfg_b.bin")).model.architecture().hidden.size() == 3);
    CHECK(line_count(testing::read_file(tmp("cfg_b.bin.log.csv"))) == 5);

    const auto bad = tmp("bad.cfg");
    std::ofstream(bad) << "surrogate.nonsense = 1\n";
    CHECK(run({"gen-data", "--n", "5", "--out", tmp("c.csv"), "--seed", "1", "--config", bad}).code == 1);
    CHECK(run({"gen-data", "--n", "5", "--out", tmp("c.csv"), "--seed", "1", "--config", tmp("none.cfg")}).code == 2);
}

TEST_CASE("surrogate constants from config change the data", "[cli]") {
    const auto cfg = tmp("mu.cfg");
    std::ofstream(cfg) << "surrogate.mu = 2.0\n";
    REQUIRE(run({"gen-data", "--n", "5", "--out", tmp("mu_a.csv"), "--seed", "1"}).code == 0);
    REQUIRE(run({"gen-data", "--n", "5", "--out", tmp("mu_b.csv"), "--seed", "1", "--config", cfg}).code == 0);
    const auto a = data::load_csv(tmp("mu_a.csv"));
    const auto b = data::load_csv(tmp("mu_b.csv"));
    CHECK(a.y == b.y);
    CHECK(a.x(0, 0) != b.x(0, 0));
}

TEST_CASE("synthesize from flags and from a targets file", "[cli]") {
    REQUIRE(run({"train", "--data", small_dataset(), "--out", tmp("syn.bin"), "--seed", "7", "--arch", "FN2",
                 "--width", "8", "--epochs", "2", "--train-size", "100", "--test-size", "50"})
                .code == 0);
    auto r = run({"synthesize", "--model", tmp("syn.bin"), "--lp", "150", "--ls", "170", "--k", "0.5", "--srf",
                  "100", "--qp", "20", "--qs", "20"});
    CHECK(r.code == 0);
    CHECK(r.out.find("geometry") != std::string::npos);

    r = run({"synthesize", "--model", tmp("syn.bin"), "--lp", "150", "--ls", "170", "--k", "0.95", "--srf", "100",
             "--qp", "20", "--qs", "20"});
    CHECK(r.code == 0);
    CHECK(r.err.find("warning=out_of_envelope") != std::string::npos);

    const auto targets = tmp("targets.csv");
    std::ofstream(targets) << "lp_pH,ls_pH,k,srf_GHz,qp,qs\n150,170,0.5,100,20,20\n140,160,0.6,110,18,19\n";
    const auto out = tmp("syn_out.csv");
    r = run({"synthesize", "--model", tmp("syn.bin"), "--targets", targets, "--out", out});
    CHECK(r.code == 0);
    CHECK(line_count(testing::read_file(out)) == 3);

    r = run({"synthesize", "--model", tmp("syn.bin"), "--lp", "150"});
    CHECK(r.code == 1);
    CHECK(run({"synthesize", "--model", tmp("syn.bin")}).code == 1);

    r = run({"synthesize", "--model", tmp("syn.bin"), "--lp", "150", "--ls", "170", "--k", "1.5", "--srf", "100",
             "--qp", "20", "--qs", "20"});
    CHECK(r.code == 3);
}

TEST_CASE("sweep writes a report", "[cli]") {
    const auto out = tmp("sweep.csv");
    const auto r = run({"sweep", "--data", small_dataset(), "--out", out, "--seed", "1", "--models", "LR,GB",
                        "--sizes", "50,100", "--losses", "sdmse", "--repeats", "2", "--test-size", "60",
                        "--gb-rounds", "5", "--quiet"});
    REQUIRE(r.code == 0);
    const auto text = testing::read_file(out);
    CHECK(line_count(text) == 5);
    CHECK(text.find("seconds") == std::string::npos);
}

TEST_CASE("check passes", "[cli]") {
    const auto r = run({"check", "--seed", "1"});
    CHECK(r.code == 0);
    CHECK(r.out.find("FAIL") == std::string::npos);
}
