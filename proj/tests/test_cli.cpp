#include "gdf/cli.hpp"

#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace gdf;
namespace fs = std::filesystem;

namespace {

const char* kSmallConfig = R"(# tiny experiment
[data]
units = 3
events = 4
horizon = 6

[model]
hidden = 4

[problem]
kind = deployment
stock = 3
edge_cost = 40

[training]
pretrain_epochs = 20
finetune_epochs = 2

[experiment]
seed = 0
seeds = 0, 1
sweep = travel
sweep_values = 1, 2
)";

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("gdf_cli_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
    const fs::path p = dir / "exp.ini";
    std::ofstream(p) << text;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

int run(std::vector<std::string> args) {
    args.insert(args.begin(), "gdf");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return cli::run(static_cast<int>(argv.size()), argv.data());
}

} // namespace

TEST_CASE("config parsing", "[config]") {
    const auto c = config::parse(kSmallConfig);
    CHECK(c.data.events == 4);
    CHECK(c.training.hidden == 4);
    CHECK(c.seeds == std::vector<std::uint64_t>{0, 1});
    CHECK(c.sweep_values == std::vector<double>{1, 2});
    CHECK(c.problem_for(6).network.edges.size() == 6);

    try {
        config::parse("[training]\nlamda = 1\n", "exp.ini");
        FAIL("unknown key accepted");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("exp.ini:2") != std::string::npos);
        CHECK(std::string(e.what()).find("lamda") != std::string::npos);
    }
    CHECK_THROWS_AS(config::parse("[nope]\n"), ConfigError);
    CHECK_THROWS_AS(config::parse("[data]\nevents = many\n"), ConfigError);
    CHECK_THROWS_AS(config::parse("[data]\nevents = 0\n"), ConfigError);
    CHECK_THROWS_AS(config::parse("units = 3\n"), ConfigError);
}

TEST_CASE("generate is deterministic and round-trips", "[cli]") {
    const fs::path dir = scratch("generate");
    const fs::path cfg = write_config(dir, kSmallConfig);
    REQUIRE(run({"generate", "--config", cfg.string(), "--out", (dir / "a").string()}) == 0);
    REQUIRE(run({"generate", "--config", cfg.string(), "--out", (dir / "b").string()}) == 0);
    for (const auto& f : fs::directory_iterator(dir / "a")) {
        CHECK(slurp(f.path()) == slurp(dir / "b" / f.path().filename()));
    }
    const io::Dataset d = io::read_dataset(dir / "a");
    const io::Dataset expected = experiment::synthetic_dataset(config::parse(kSmallConfig));
    REQUIRE(d.events.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(d.events[i].outages == expected.events[i].outages);
        CHECK(d.events[i].covariates == expected.events[i].covariates);
        CHECK(d.events[i].timestamps == expected.events[i].timestamps);
    }
}

TEST_CASE("invalid event count writes nothing", "[cli]") {
    const fs::path dir = scratch("invalid");
    std::string text = kSmallConfig;
    text.replace(text.find("events = 4"), 10, "events = 0");
    const fs::path cfg = write_config(dir, text);
    CHECK(run({"generate", "--config", cfg.string(), "--out", (dir / "out").string()}) == 2);
    CHECK_FALSE(fs::exists(dir / "out"));
}

TEST_CASE("schema violations name the file, row and column", "[io]") {
    const fs::path dir = scratch("schema");
    const fs::path cfg = write_config(dir, kSmallConfig);
    REQUIRE(run({"generate", "--config", cfg.string(), "--out", (dir / "data").string()}) == 0);
    const fs::path traj = dir / "data" / io::trajectory_file("1");
    std::string text = slurp(traj);
    const auto line2 = text.find('\n') + 1;
    const auto end2 = text.find('\n', line2);
    text.replace(line2, end2 - line2, "1,u1,0,abc");
    io::write_text(traj, text);
    try {
        io::read_dataset(dir / "data");
        FAIL("bad value accepted");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("event_1_trajectory.csv:2") != std::string::npos);
        CHECK(msg.find("outaged_customers") != std::string::npos);
    }
    CHECK(run({"train", "--config", cfg.string(), "--data", (dir / "data").string(), "--out", (dir / "run").string()}) == 3);
}

TEST_CASE("start trigger re-bases the event", "[io]") {
    ode::HazardEvent e;
    e.id = "x";
    e.customers = {100.0, 100.0};
    e.covariates = {{0.0}, {0.0}};
    e.timestamps = {10, 11, 12, 13, 14};
    e.outages = {{0, 1, 2, 3, 4}, {0, 0, 1, 5, 6}};
    const ode::HazardEvent t = io::apply_start_trigger(e, 0.01, 2);
    // shares: 0, 0.005, 0.015 -> starts at timestamp 12
    CHECK(t.timestamps == std::vector<double>{0, 1, 2});
    CHECK(t.outages[1] == std::vector<double>{1, 5, 6});
    CHECK_THROWS_AS(io::apply_start_trigger(e, 0.01, 3), DataError);
    CHECK_THROWS_AS(io::apply_start_trigger(e, 0.5, 1), DataError);
}

TEST_CASE("checkpoint round trip and version check", "[io]") {
    io::Checkpoint c{ode::OutageModel::initialized(3, 5, 11, {4.0, 0.5}), {{0.1, 0.2, 0.3}, {1.0, 2.0, 3.0}}};
    const std::string bytes = io::encode_checkpoint(c);
    CHECK(io::decode_checkpoint(bytes) == c);
    std::string bad = bytes;
    bad[8] = 9; // version
    CHECK_THROWS_AS(io::decode_checkpoint(bad), DataError);
    CHECK_THROWS_AS(io::decode_checkpoint(bytes.substr(0, bytes.size() - 3)), DataError);
    CHECK_THROWS_AS(io::decode_checkpoint("not a checkpoint"), DataError);
}

TEST_CASE("train and evaluate", "[cli]") {
    const fs::path dir = scratch("train");
    const fs::path cfg = write_config(dir, kSmallConfig);
    const std::string data = (dir / "data").string();
    REQUIRE(run({"generate", "--config", cfg.string(), "--out", data}) == 0);
    REQUIRE(run({"train", "--config", cfg.string(), "--data", data, "--out", (dir / "r1").string()}) == 0);
    REQUIRE(run({"train", "--config", cfg.string(), "--data", data, "--out", (dir / "r2").string()}) == 0);
    CHECK(slurp(dir / "r1" / "gdf.ckpt") == slurp(dir / "r2" / "gdf.ckpt"));
    CHECK(slurp(dir / "r1" / "curves.csv") == slurp(dir / "r2" / "curves.csv"));

    std::string no_ft = kSmallConfig;
    no_ft.replace(no_ft.find("finetune_epochs = 2"), 19, "finetune_epochs = 0");
    const fs::path cfg0 = write_config(dir, no_ft);
    REQUIRE(run({"train", "--config", cfg0.string(), "--data", data, "--out", (dir / "r0").string()}) == 0);
    CHECK(slurp(dir / "r0" / "gdf.ckpt") == slurp(dir / "r0" / "two_stage.ckpt"));

    REQUIRE(run({"evaluate", "--config", cfg.string(), "--data", data, "--out", (dir / "r1").string()}) == 0);
    const io::CsvTable metrics = io::read_csv(dir / "r1" / "metrics.csv");
    const std::size_t method = metrics.column("method"), regret = metrics.column("regret");
    bool saw_online = false;
    for (std::size_t r = 0; r < metrics.rows.size(); ++r) {
        if (metrics.rows[r][method] == "true_optimal") CHECK(metrics.number(r, regret) == 0.0);
        if (metrics.rows[r][method] == "online_lag_1") saw_online = true;
        CHECK(metrics.number(r, regret) >= -1e-9);
    }
    CHECK(saw_online);
    const auto json = nlohmann::json::parse(slurp(dir / "r1" / "metrics.json"));
    CHECK(json["methods"].size() == 6);

    // missing GDF checkpoint: explicit gaps, still exit 0
    fs::remove(dir / "r1" / "gdf.ckpt");
    REQUIRE(run({"evaluate", "--config", cfg.string(), "--data", data, "--out", (dir / "r1").string()}) == 0);
    const io::CsvTable partial = io::read_csv(dir / "r1" / "metrics.csv");
    for (std::size_t r = 0; r < partial.rows.size(); ++r) {
        if (partial.rows[r][method] == "gdf") CHECK(partial.rows[r][regret] == "NA");
    }
}

TEST_CASE("sweep and flag handling", "[cli]") {
    const fs::path dir = scratch("sweep");
    const fs::path cfg = write_config(dir, kSmallConfig);
    REQUIRE(run({"sweep", "--config", cfg.string(), "--out", (dir / "s").string()}) == 0);
    const io::CsvTable t = io::read_csv(dir / "s" / "sweep.csv");
    CHECK(t.rows.size() == 2 * 2 * 6);
    CHECK(run({"train", "--config", cfg.string(), "--out", (dir / "x").string()}) == 2); // --data missing
    CHECK(run({"sweep", "--config", cfg.string(), "--out", (dir / "s").string(), "--problem", "bogus"}) == 2);
    CHECK(run({"sweep", "--config", (dir / "missing.ini").string(), "--out", (dir / "s").string()}) == 2);
}
