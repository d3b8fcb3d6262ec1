#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

const char* kCli = TANGLESIM_CLI_PATH;
const char* kConfigs = TANGLESIM_CONFIG_DIR;

struct RunResult {
    int exitCode = -1;
    std::string stdoutText;
};

fs::path temp_dir() {
    fs::path dir = fs::temp_directory_path() / "tanglesim-cli-tests";
    fs::create_directories(dir);
    return dir;
}

RunResult run_cli(const std::string& args) {
    fs::path outFile = temp_dir() / "stdout.txt";
    std::string cmd = std::string(kCli) + " " + args + " > " + outFile.string() + " 2> /dev/null";
    int raw = std::system(cmd.c_str());
    RunResult result;
    result.exitCode = WEXITSTATUS(raw);
    std::ifstream in(outFile);
    std::stringstream ss;
    ss << in.rdbuf();
    result.stdoutText = ss.str();
    return result;
}

std::string file_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

}  // namespace

TEST_CASE("version prints and exits zero") {
    RunResult r = run_cli("version");
    CHECK(r.exitCode == 0);
    CHECK(r.stdoutText.rfind("tanglesim ", 0) == 0);
}

TEST_CASE("validate-config accepts the shipped configs") {
    for (const char* name : {"fpc_basic.json", "fpc_sweep_n.json", "fpc_sweep_k.json", "fpc_sweep_q.json",
                             "tangle_honest.json", "tangle_double_spend.json", "tangle_spam.json"}) {
        RunResult r = run_cli("validate-config --config " + (fs::path(kConfigs) / name).string());
        INFO(name);
        CHECK(r.exitCode == 0);
        CHECK(r.stdoutText.empty());  // data stream stays clean
    }
}

TEST_CASE("config errors exit with code 1") {
    fs::path bad = temp_dir() / "bad.json";

    write_file(bad, R"({"N":100,"k":20,"quorum":5})");
    CHECK(run_cli("validate-config --config " + bad.string()).exitCode == 1);

    write_file(bad, R"({"N":100,"k":100})");
    CHECK(run_cli("validate-config --config " + bad.string()).exitCode == 1);

    write_file(bad, R"({"nodes":4,"duration":50,"doubleSpendSchedule":[{"time":99,"outputIndex":0,"spenders":[0,1]}]})");
    CHECK(run_cli("validate-config --config " + bad.string() + " --set duration=10").exitCode == 1);

    CHECK(run_cli("validate-config --config " + (temp_dir() / "missing.json").string()).exitCode == 1);
    CHECK(run_cli("fpc-run --config " + (fs::path(kConfigs) / "fpc_basic.json").string() + " --set q=0.9").exitCode ==
          1);
}

TEST_CASE("runtime errors exit with code 2") {
    fs::path cfg = temp_dir() / "tiny.json";
    write_file(cfg, R"({"nodes":2,"issueRate":1.0,"duration":5})");
    RunResult r = run_cli("tangle-run --config " + cfg.string() + " --out /nonexistent-dir/x.csv");
    CHECK(r.exitCode == 2);
}

TEST_CASE("fpc-run emits one CSV row and is byte-stable") {
    fs::path out1 = temp_dir() / "fpc1.csv";
    fs::path out2 = temp_dir() / "fpc2.csv";
    std::string base = "fpc-run --config " + (fs::path(kConfigs) / "fpc_basic.json").string() + " --runs 10 --seed 5";
    CHECK(run_cli(base + " --out " + out1.string()).exitCode == 0);
    CHECK(run_cli(base + " --out " + out2.string()).exitCode == 0);

    std::string text = file_text(out1);
    CHECK(text.rfind("N,k,q,p0,tau,beta,l,M,seed,runs,agreement_rate,mean_termination_round,not_finalized_rate\n",
                     0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 2);
    CHECK(text == file_text(out2));
    CHECK(fs::exists(out1.string() + ".config.json"));
}

TEST_CASE("fpc-sweep reports infeasible rows with empty cells") {
    fs::path cfg = temp_dir() / "sweep.json";
    write_file(cfg, R"({"N":30,"k":10,"q":0,"seed":2,"runs":5,"sweep":{"k":[10,30]}})");
    fs::path out = temp_dir() / "sweep.csv";
    RunResult r = run_cli("fpc-sweep --config " + cfg.string() + " --jobs 2 --out " + out.string());
    CHECK(r.exitCode == 0);
    std::string text = file_text(out);
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);  // header + 2 rows
    CHECK(text.find("30,30,0,") != std::string::npos);
    CHECK(text.find(",,\n") != std::string::npos);  // empty metric cells on the infeasible row
}

TEST_CASE("tangle-run writes CSV, trace and resolved config deterministically") {
    fs::path cfg = temp_dir() / "tangle.json";
    write_file(cfg, R"({"nodes":5,"issueRate":1.0,"duration":20,"seed":11})");
    fs::path out1 = temp_dir() / "t1.csv";
    fs::path out2 = temp_dir() / "t2.csv";
    CHECK(run_cli("tangle-run --config " + cfg.string() + " --out " + out1.string()).exitCode == 0);
    CHECK(run_cli("tangle-run --config " + cfg.string() + " --out " + out2.string()).exitCode == 0);

    std::string csv = file_text(out1);
    CHECK(csv.rfind("tps,mean_confirmation_time,orphan_rate,conflicts_resolved\n", 0) == 0);
    CHECK(csv == file_text(out2));
    CHECK(file_text(out1.string() + ".trace") == file_text(out2.string() + ".trace"));
    CHECK(!file_text(out1.string() + ".trace").empty());
    CHECK(fs::exists(out1.string() + ".config.json"));
}

TEST_CASE("stdout carries only data when --out is omitted") {
    RunResult r = run_cli("fpc-run --config " + (fs::path(kConfigs) / "fpc_basic.json").string() + " --runs 5");
    CHECK(r.exitCode == 0);
    CHECK(r.stdoutText.rfind("N,k,q,", 0) == 0);
}
