#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "mpag/text.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Workdir {
    fs::path dir;
    Workdir() {
        dir = fs::temp_directory_path() /
              ("mpag_cli_" + std::to_string(::getpid()) + "_" +
               std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(dir);
    }
    ~Workdir() { fs::remove_all(dir); }
    fs::path operator/(const std::string& name) const { return dir / name; }
};

int run_cli(const std::string& args) {
    std::string cmd = std::string(MPAG_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

void write_file(const fs::path& p, const std::string& contents) {
    std::ofstream out(p);
    out << contents;
}

std::string tiny_dataset() {
    return
        R"({"id":"e1","question":"does the cup leak","answer":"no it never leaks","reviews":["no leaks at all","holds water fine"],"attributes":[{"key":"capacity","value":"400ml"}]})"
        "\n"
        R"({"id":"e2","question":"is the cup heavy","answer":"it is light","reviews":["very light cup","light and nice"],"attributes":[]})"
        "\n";
}

std::string tiny_config() {
    return "epochs=30\nbatch=4\nclusters=2\ncluster_size=4\nvocab_size=100\n";
}

std::size_t count_lines(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++n;
    return n;
}

} // namespace

TEST_CASE("cli exit codes") {
    Workdir wd;
    write_file(wd / "data.jsonl", tiny_dataset());
    write_file(wd / "bad.cfg", "hidden=33\nwidths=1\n"); // odd hidden
    write_file(wd / "cfg.txt", tiny_config());

    SECTION("invalid config exits 2") {
        CHECK(run_cli("train --data " + (wd / "data.jsonl").string() + " --out " +
                      (wd / "out").string() + " --config " + (wd / "bad.cfg").string()) == 2);
    }

    SECTION("missing dataset exits 3") {
        CHECK(run_cli("train --data " + (wd / "missing.jsonl").string() + " --out " +
                      (wd / "out").string() + " --profile desk") == 3);
    }

    SECTION("schema error exits 3") {
        write_file(wd / "broken.jsonl", "{\"id\":\"x\",\"question\":\"q\"}\n");
        CHECK(run_cli("prepare --data " + (wd / "broken.jsonl").string() + " --out " +
                      (wd / "p.jsonl").string() + " --profile desk") == 3);
    }

    SECTION("generate without checkpoint or baseline exits 2") {
        CHECK(run_cli("generate --data " + (wd / "data.jsonl").string() + " --out " +
                      (wd / "a.jsonl").string()) == 2);
    }
}

TEST_CASE("cli end-to-end: prepare, train, generate, evaluate, inspect") {
    Workdir wd;
    write_file(wd / "data.jsonl", tiny_dataset());
    write_file(wd / "cfg.txt", tiny_config());
    std::string common = " --profile desk --config " + (wd / "cfg.txt").string() + " --seed 5";

    REQUIRE(run_cli("prepare --data " + (wd / "data.jsonl").string() + " --out " +
                    (wd / "prepared.jsonl").string() + common) == 0);
    REQUIRE(fs::exists(wd / "prepared.jsonl"));

    REQUIRE(run_cli("train --data " + (wd / "prepared.jsonl").string() + " --out " +
                    (wd / "run").string() + common) == 0);
    REQUIRE(fs::exists(wd / "run" / "model.ckpt"));
    CHECK(count_lines(wd / "run" / "train_log.jsonl") == 30); // one batch per epoch

    std::string ckpt = (wd / "run" / "model.ckpt").string();
    REQUIRE(run_cli("generate --data " + (wd / "prepared.jsonl").string() + " --out " +
                    (wd / "answers.jsonl").string() + " --checkpoint " + ckpt) == 0);
    CHECK(count_lines(wd / "answers.jsonl") == 2); // one line per example

    SECTION("evaluate on gold-copied answers reports BLEU 100") {
        std::ofstream gold(wd / "gold.jsonl");
        gold << R"({"id":"e1","answer":"no it never leaks"})" << "\n";
        gold << R"({"id":"e2","answer":"it is light"})" << "\n";
        gold.close();
        REQUIRE(run_cli("evaluate --data " + (wd / "prepared.jsonl").string() + " --answers " +
                        (wd / "gold.jsonl").string() + " --checkpoint " + ckpt + " --out " +
                        (wd / "metrics.json").string()) == 0);
        std::ifstream in(wd / "metrics.json");
        json rep = json::parse(in);
        CHECK(rep["bleu"].get<double>() == 100.0);
        CHECK(rep["emb_average"].get<double>() > 0.999999999);
    }

    SECTION("evaluate with mismatched ids exits 3") {
        std::ofstream gold(wd / "bad_ids.jsonl");
        gold << R"({"id":"zzz","answer":"no"})" << "\n";
        gold.close();
        CHECK(run_cli("evaluate --data " + (wd / "prepared.jsonl").string() + " --answers " +
                      (wd / "bad_ids.jsonl").string()) == 3);
    }

    SECTION("inspect emits salience with zero mass on padding") {
        REQUIRE(run_cli("inspect --data " + (wd / "prepared.jsonl").string() + " --checkpoint " +
                        ckpt + " --id e1 --out " + (wd / "diag.json").string()) == 0);
        std::ifstream in(wd / "diag.json");
        json diag = json::parse(in);
        REQUIRE(diag.contains("clusters"));
        for (const auto& cluster : diag["clusters"]) {
            double sum = 0.0;
            for (double s : cluster["salience"]) sum += s;
            if (!cluster["empty"].get<bool>()) CHECK(std::abs(sum - 1.0) < 1e-9);
            else CHECK(sum == 0.0);
        }
        CHECK(diag["steps"].size() ==
              mpag::tokenize(diag["generated_answer"].get<std::string>()).size());
    }

    SECTION("inspect with unknown id exits 3") {
        CHECK(run_cli("inspect --data " + (wd / "prepared.jsonl").string() + " --checkpoint " +
                      ckpt + " --id nosuch") == 3);
    }

    SECTION("baseline generation works without a checkpoint") {
        REQUIRE(run_cli("generate --data " + (wd / "prepared.jsonl").string() + " --out " +
                        (wd / "bm25.jsonl").string() + " --baseline bm25") == 0);
        CHECK(count_lines(wd / "bm25.jsonl") == 2);
    }
}

TEST_CASE("cli generate on an empty dataset writes an empty file, exit 0") {
    Workdir wd;
    write_file(wd / "empty.jsonl", "");
    write_file(wd / "data.jsonl", tiny_dataset());
    write_file(wd / "cfg.txt", "epochs=1\nbatch=4\nclusters=2\ncluster_size=4\nvocab_size=100\n");
    std::string common = " --profile desk --config " + (wd / "cfg.txt").string();

    REQUIRE(run_cli("train --data " + (wd / "data.jsonl").string() + " --out " +
                    (wd / "run").string() + common) == 0);
    REQUIRE(run_cli("generate --data " + (wd / "empty.jsonl").string() + " --out " +
                    (wd / "answers.jsonl").string() + " --checkpoint " +
                    (wd / "run" / "model.ckpt").string()) == 0);
    CHECK(count_lines(wd / "answers.jsonl") == 0);
}
