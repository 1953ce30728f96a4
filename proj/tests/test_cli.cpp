#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct CliResult {
    int exit_code;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CliResult run_cli(const std::string& args) {
    const fs::path dir = fs::temp_directory_path();
    const fs::path out = dir / "tabbench_cli_stdout.txt";
    const fs::path err = dir / "tabbench_cli_stderr.txt";
    const std::string cmd =
        std::string(TABBENCH_BIN) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int raw = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

// A self-contained working directory with a schema + CSV fixture.
struct Workspace {
    fs::path root;

    Workspace() {
        root = fs::temp_directory_path() / "tabbench_cli_ws";
        fs::remove_all(root);
        fs::create_directories(root);
        write_schema();
        write_csv();
    }
    ~Workspace() { fs::remove_all(root); }

    fs::path schema() const { return root / "schema.json"; }
    fs::path csv() const { return root / "data.csv"; }
    fs::path cache() const { return root / "prepared" / "toy.bin"; }

    void write_schema(const std::string& sensitive_a = "sex") const {
        std::ofstream out(schema());
        out << R"({
  "name": "toy",
  "target": "label",
  "positive_value": "yes",
  "sensitive": [")" << sensitive_a
            << R"(:b", "race:d"],
  "columns": [
    {"name": "x0", "kind": "numeric"},
    {"name": "x1", "kind": "numeric"},
    {"name": "x2", "kind": "numeric"}
  ]
})";
    }

    void write_csv() const {
        std::ofstream out(csv());
        out << "x0,x1,x2,sex,race,label\n";
        std::mt19937_64 rng(99);
        std::normal_distribution<double> g(0.0, 1.0);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int i = 0; i < 400; ++i) {
            const double x0 = g(rng), x1 = g(rng), x2 = g(rng);
            const char* sex = (i / 2) % 2 == 0 ? "a" : "b";
            const char* race = i % 2 == 0 ? "c" : "d";
            const double logit = 1.5 * x0 + 0.8 * x1 + (sex[0] == 'b' ? 0.4 : -0.4);
            const char* label = u(rng) < 1.0 / (1.0 + std::exp(-logit)) ? "yes" : "no";
            out << x0 << "," << x1 << "," << x2 << "," << sex << "," << race << "," << label
                << "\n";
        }
    }

    void write_grid() const {
        std::ofstream out(root / "grid.json");
        out << R"({
  "family": "boosted",
  "params": {
    "learning_rate": [0.1, 0.5],
    "n_estimators": [5],
    "max_depth": [2, 3]
  }
})";
    }
};

}  // namespace

TEST_CASE("cli: end-to-end prepare, sweep, analyze") {
    Workspace ws;
    const std::string prep = "prepare --schema " + ws.schema().string() + " --data " +
                             ws.csv().string() + " --out " + (ws.root / "prepared").string();

    auto r = run_cli(prep);
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("dataset toy") != std::string::npos);
    REQUIRE(fs::exists(ws.cache()));

    SUBCASE("prepare is byte-identical on rerun") {
        const std::string first = slurp(ws.cache());
        auto r2 = run_cli(prep);
        CHECK(r2.exit_code == 0);
        CHECK(slurp(ws.cache()) == first);
    }

    SUBCASE("sweep, resume, and analyses") {
        ws.write_grid();
        const std::string store = (ws.root / "results.jsonl").string();
        const std::string sweep_cmd = "sweep --data " + ws.cache().string() + " --grid " +
                                      (ws.root / "grid.json").string() + " --out " + store +
                                      " --seed 7 --parallelism 1";
        auto s1 = run_cli(sweep_cmd);
        CHECK(s1.exit_code == 0);
        CHECK(s1.out.find("4 ok, 0 failed, 0 skipped") != std::string::npos);

        // Resume: everything already recorded.
        auto s2 = run_cli(sweep_cmd);
        CHECK(s2.exit_code == 0);
        CHECK(s2.out.find("0 ok, 0 failed, 4 skipped") != std::string::npos);

        // Parallel run into a fresh store matches record count.
        const std::string store_p = (ws.root / "results_p.jsonl").string();
        auto s3 = run_cli("sweep --data " + ws.cache().string() + " --grid " +
                          (ws.root / "grid.json").string() + " --out " + store_p +
                          " --seed 7 --parallelism 4");
        CHECK(s3.exit_code == 0);
        CHECK(s3.out.find("4 ok") != std::string::npos);

        const std::string out_dir = (ws.root / "reports").string();
        auto f = run_cli("analyze frontier --store " + store + " --out " + out_dir +
                         " --split test --no-timestamp");
        CHECK(f.exit_code == 0);
        const std::string frontier_csv = slurp(ws.root / "reports" / "frontier.csv");
        CHECK(frontier_csv.rfind("config_id,m1,m2,on_frontier\n", 0) == 0);
        CHECK(frontier_csv.find(",1\n") != std::string::npos);  // something on the frontier

        auto sel = run_cli("analyze select --store " + store + " --out " + out_dir +
                           " --no-timestamp");
        CHECK(sel.exit_code == 0);
        const std::string select_csv = slurp(ws.root / "reports" / "select.csv");
        CHECK(select_csv.find("best_accuracy,") != std::string::npos);
        CHECK(select_csv.find("best_cvar,") != std::string::npos);

        // Reports are byte-identical under --no-timestamp.
        auto sel2 = run_cli("analyze select --store " + store + " --out " + out_dir +
                            " --no-timestamp");
        CHECK(sel2.exit_code == 0);
        CHECK(slurp(ws.root / "reports" / "select.csv") == select_csv);

        auto corr = run_cli("analyze correlations --store " + store + " --out " + out_dir +
                            " --split test --no-timestamp");
        CHECK(corr.exit_code == 0);
        CHECK(slurp(ws.root / "reports" / "correlations.csv").find("accuracy") !=
              std::string::npos);

        // Compare the two frontier endpoints (first two ids in the store).
        std::ifstream in(store);
        std::string line, id1, id2;
        std::getline(in, line);  // header
        for (int i = 0; i < 2 && std::getline(in, line); ++i) {
            const auto pos = line.find("\"config_id\":\"");
            (i == 0 ? id1 : id2) = line.substr(pos + 13, 16);
        }
        auto cmp = run_cli("analyze compare --store " + store + " --out " + out_dir +
                           " --config-a " + id1 + " --config-b " + id2 + " --no-timestamp");
        CHECK(cmp.exit_code == 0);
        CHECK(slurp(ws.root / "reports" / "compare.csv").find("overall," + id1) !=
              std::string::npos);
    }
}

TEST_CASE("cli: exit code matrix") {
    Workspace ws;

    SUBCASE("missing required flag is a usage error") {
        auto r = run_cli("prepare --schema only.json");
        CHECK(r.exit_code == 2);
    }
    SUBCASE("unknown subcommand is a usage error") {
        auto r = run_cli("transmogrify");
        CHECK(r.exit_code == 2);
    }
    SUBCASE("unknown analysis is a usage error") {
        auto r = run_cli("analyze wavelets --store x.jsonl --out " + ws.root.string());
        CHECK(r.exit_code == 2);
        CHECK(r.err.find("unknown analysis") != std::string::npos);
    }
    SUBCASE("schema referencing a missing column names it") {
        ws.write_schema("height");  // sensitive column absent from the CSV
        auto r = run_cli("prepare --schema " + ws.schema().string() + " --data " +
                         ws.csv().string() + " --out " + (ws.root / "prepared").string());
        CHECK(r.exit_code == 2);
        CHECK(r.err.find("height") != std::string::npos);
    }
    SUBCASE("nonexistent store is a data error") {
        auto r = run_cli("analyze frontier --store " + (ws.root / "nope.jsonl").string() +
                         " --out " + ws.root.string());
        CHECK(r.exit_code == 2);
    }
    SUBCASE("help exits zero") {
        auto r = run_cli("--help");
        CHECK(r.exit_code == 0);
    }
}
