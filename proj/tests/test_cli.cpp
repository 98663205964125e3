#include <doctest.h>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qkdnoise/cli.hpp"
#include "qkdnoise/dv_source_mid.hpp"

#include <sys/wait.h>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "qkdnoise");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = qkdnoise::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

// CSV body without the "# ..." metadata lines
std::vector<std::string> csv_rows(const std::string& text) {
    std::vector<std::string> rows;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);)
        if (!line.empty() && line[0] != '#') rows.push_back(line);
    return rows;
}

fs::path scratch(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / "qkdnoise_cli_test";
    fs::create_directories(d);
    return d / name;
}

}  // namespace

TEST_CASE("key-rate example: six-state source-mid JSON") {
    const auto r = run({"key-rate", "--protocol", "six-state-source-mid", "--T", "0.5", "--mu", "0.1", "--pnr"});
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    const auto& res = j.at("result");
    CHECK(std::abs(res.at("p_exp").get<double>() - 0.24671746551298502) < 1e-12);
    CHECK(std::abs(res.at("Q").get<double>() - 0.083175803402646507) < 1e-12);
    CHECK(res.at("K").get<double>() ==
          doctest::Approx(qkdnoise::dv::key_rate_six_state(0.24671746551298502, 0.083175803402646507)).epsilon(1e-12));
    CHECK(j.at("metadata").at("version") == "0.3.0");
    CHECK(j.at("metadata").at("seed") == 42);
    CHECK(j.at("metadata").at("config").at("T") == "0.5");
}

TEST_CASE("threshold-curve example: CV source-mid ends near 1 - 1/e") {
    const auto r = run({"threshold-curve", "--protocol", "cv-source-mid", "--v-infinite"});
    REQUIRE(r.code == 0);
    const auto rows = csv_rows(r.out);
    REQUIRE(rows.size() > 2);
    CHECK(rows[0] == "x,y,status");
    // first secure T: leftmost converged row
    double first = -1.0;
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].find(",converged") != std::string::npos) {
            first = std::stod(rows[i].substr(0, rows[i].find(',')));
            break;
        }
    CHECK(std::abs(first - 0.6321) < 1e-3);
    CHECK(r.out.rfind("# program: qkdnoise", 0) == 0);
    CHECK(r.out.find("# seed: 42") != std::string::npos);
}

TEST_CASE("validate example: every check listed, none failing") {
    const auto r = run({"validate", "--seed", "42", "--samples", "1000000"});
    CHECK(r.code == 0);
    const auto rows = csv_rows(r.out);
    REQUIRE(rows.size() == 10);
    CHECK(rows[0] == "check,status,value,tolerance,detail");
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].find(",pass,") != std::string::npos);
    CHECK(r.out.find("# failures: 0") != std::string::npos);
}

TEST_CASE("identical configuration gives byte-identical output") {
    const std::vector<std::string> a = {"benchmark", "--curve", "min-q", "--protocol", "six-state-source-mid",
                                        "--points", "4", "--t-min", "0.8"};
    CHECK(run(a).out == run(a).out);
    const std::vector<std::string> b = {"ratio-map", "--points", "5", "--mu-points", "4", "--format", "json"};
    const auto rb = run(b);
    CHECK(rb.code == 0);
    CHECK(rb.out == run(b).out);
    const auto j = json::parse(rb.out);
    CHECK(j.at("columns") == json::array({"T", "mu", "ratio", "region"}));
    CHECK(j.at("rows").size() == 20);
}

TEST_CASE("config file sits between defaults and flags") {
    const fs::path cfg = scratch("recipe.cfg");
    {
        std::ofstream f(cfg);
        f << "# recipe\nprotocol = bb84-source-mid\nT = 0.7\nmu = 0.05\nonoff = true\n";
    }
    const auto via_file = run({"key-rate", "--config", cfg.string(), "--mu", "0.02"});
    const auto direct = run({"key-rate", "--protocol", "bb84-source-mid", "--T", "0.7", "--mu", "0.02", "--onoff"});
    REQUIRE(via_file.code == 0);
    REQUIRE(direct.code == 0);
    CHECK(json::parse(via_file.out).at("result") == json::parse(direct.out).at("result"));
    CHECK(json::parse(via_file.out).at("metadata").at("config_file") == cfg.string());

    {
        std::ofstream f(cfg);
        f << "temperature = 3\n";
    }
    const auto bad = run({"key-rate", "--config", cfg.string()});
    CHECK(bad.code == 2);
    CHECK(bad.err.find("configuration error") != std::string::npos);
}

TEST_CASE("exit status on configuration errors") {
    CHECK(run({}).code == 2);
    CHECK(run({"unknown-command"}).code == 2);
    CHECK(run({"key-rate", "--T", "2"}).code == 2);
    CHECK(run({"key-rate", "--protocol", "bb85"}).code == 2);
    CHECK(run({"key-rate", "--protocol", "cv-source-mid"}).code == 2);  // needs --V or --v-infinite
    CHECK(run({"key-rate", "--pnr", "--onoff"}).code == 2);
    CHECK(run({"--help"}).code == 0);
    CHECK(run({"--version"}).code == 0);
}

TEST_CASE("numerical failures name the module") {
    const auto r = run({"key-rate", "--protocol", "six-state-mdi", "--mdi-engine", "appendix", "--mu", "5", "--max-terms", "3"});
    CHECK(r.code == 1);
    CHECK(r.err.find("numerical failure in") != std::string::npos);
}

TEST_CASE("relative output paths resolve against the output directory variable") {
    const fs::path dir = scratch("outdir");
    fs::create_directories(dir);
    fs::remove(dir / "curve.json");
    setenv("QKDNOISE_OUTPUT_DIR", dir.c_str(), 1);
    const auto r = run({"di-curve", "--points", "3", "-o", "curve.json"});
    unsetenv("QKDNOISE_OUTPUT_DIR");
    REQUIRE(r.code == 0);
    REQUIRE(fs::exists(dir / "curve.json"));
    std::ifstream f(dir / "curve.json");
    const auto j = json::parse(f);
    CHECK(j.at("columns") == json::array({"x", "y", "status"}));
    CHECK(j.at("metadata").at("command") == "di-curve");
}

TEST_CASE("installed binary reports exit codes through the process status") {
    const char* bin = std::getenv("QKDNOISE_CLI");
    if (!bin) return;
    auto status = [&](const std::string& args) {
        const std::string cmd = std::string(bin) + " " + args + " >/dev/null 2>&1";
        const int s = std::system(cmd.c_str());
        return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
    };
    CHECK(status("key-rate --T 0.5 --mu 0.1") == 0);
    CHECK(status("key-rate --T 2") == 2);
    CHECK(status("key-rate --protocol six-state-mdi --mdi-engine appendix --mu 5 --max-terms 3") == 1);
}
