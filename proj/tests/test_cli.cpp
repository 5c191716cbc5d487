#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

const std::string kCli = COMPENKIT_CLI_PATH;

int run(const std::string& args) {
    const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string run_capture(const std::string& args) {
    const fs::path tmp = fs::temp_directory_path() / "compenkit_cli_out.txt";
    const std::string cmd = kCli + " " + args + " >" + tmp.string() + " 2>&1";
    std::system(cmd.c_str());
    std::ifstream in(tmp);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TmpDir {
    fs::path path;
    explicit TmpDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TmpDir() { fs::remove_all(path); }
};

} // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("help lists every verb and exits cleanly") {
    CHECK(run("--help") == 0);
    const auto out = run_capture("--help");
    for (const char* verb : {"gen", "train", "compensate", "eval", "ablate", "gradcheck"})
        CHECK(out.find(verb) != std::string::npos);
}

TEST_CASE("usage errors exit with code 2") {
    CHECK(run("frobnicate") == 2);
    CHECK(run("train") == 2);                      // --data is required
    CHECK(run("train --data /nonexistent -o /tmp/x.ckpt") == 2);
    CHECK(run("eval --checkpoint /nonexistent.ckpt --data /nonexistent") == 2);
}

TEST_CASE("config rejects unknown keys and bad values") {
    TmpDir dir("compenkit_cli_cfg");
    const fs::path cfg = dir.path / "bad.json";
    std::ofstream(cfg) << "{\"sizzle\": 3}";
    CHECK(run("gen --config " + cfg.string() + " -o " + (dir.path / "ds").string()) == 2);
    std::ofstream(cfg) << "{\"size\": 16}"; // below the supported minimum
    CHECK(run("gen --config " + cfg.string() + " -o " + (dir.path / "ds").string()) == 2);
}

TEST_CASE("gen, train, compensate and eval chain together") {
    TmpDir dir("compenkit_cli_chain");
    const fs::path cfg = dir.path / "cfg.json";
    std::ofstream(cfg) << R"({"size": 64, "n_train": 4, "n_test": 2, "iters": 2})";
    const std::string ds = (dir.path / "ds").string();
    const std::string ckpt = (dir.path / "m.ckpt").string();

    CHECK(run("gen --config " + cfg.string() + " --seed 3 -o " + ds) == 0);
    CHECK(fs::exists(fs::path(ds) / "manifest.json"));
    CHECK(fs::exists(fs::path(ds) / "surface.png"));

    CHECK(run("train --config " + cfg.string() + " --seed 3 --data " + ds + " -o " + ckpt) == 0);
    CHECK(fs::exists(ckpt));

    const std::string comp_out = (dir.path / "comp").string();
    const std::string input = ds + "/test/prj_0000.png";
    REQUIRE(fs::exists(input));
    CHECK(run("compensate --checkpoint " + ckpt + " --data " + ds + " -o " + comp_out + " " + input) ==
          0);
    const fs::path produced = fs::path(comp_out) / "prj_0000.png";
    CHECK(fs::exists(produced));

    // Re-running overwrites with identical bytes.
    const auto before = fs::file_size(produced);
    std::ifstream f1(produced, std::ios::binary);
    std::stringstream b1;
    b1 << f1.rdbuf();
    CHECK(run("compensate --checkpoint " + ckpt + " --data " + ds + " -o " + comp_out + " " + input) ==
          0);
    std::ifstream f2(produced, std::ios::binary);
    std::stringstream b2;
    b2 << f2.rdbuf();
    CHECK(before == fs::file_size(produced));
    CHECK(b1.str() == b2.str());

    const auto eval_out = run_capture("eval --checkpoint " + ckpt + " --data " + ds);
    CHECK(eval_out.find("PSNR") != std::string::npos);
}

TEST_CASE("deterministic training given seed and single thread") {
    TmpDir dir("compenkit_cli_repro");
    const fs::path cfg = dir.path / "cfg.json";
    std::ofstream(cfg) << R"({"size": 64, "n_train": 4, "n_test": 2, "iters": 2})";
    const std::string ds = (dir.path / "ds").string();
    REQUIRE(run("gen --config " + cfg.string() + " --seed 5 -o " + ds) == 0);

    const std::string base = "train --threads 1 --config " + cfg.string() + " --seed 5 --data " +
                             ds + " -o " + (dir.path / "m.ckpt").string() + " --log ";
    REQUIRE(run(base + (dir.path / "log1.csv").string()) == 0);
    REQUIRE(run(base + (dir.path / "log2.csv").string()) == 0);
    std::ifstream l1(dir.path / "log1.csv"), l2(dir.path / "log2.csv");
    std::stringstream s1, s2;
    s1 << l1.rdbuf();
    s2 << l2.rdbuf();
    CHECK(s1.str() == s2.str());
    CHECK(s1.str().find("iter,loss") == 0);
}

TEST_SUITE_END();
