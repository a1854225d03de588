#include "otshift/errors.hpp"
#include "otshift/experiment.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace otshift;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("otshift_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p)
{
    std::vector<std::vector<std::string>> rows;
    std::ifstream in(p);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            cells.push_back(cell);
        if (!line.empty() && line.back() == ',')
            cells.emplace_back();
        rows.push_back(cells);
    }
    return rows;
}

json small_labelshift(const fs::path& out)
{
    return {{"experiment", "labelshift"},
            {"seed", 3},
            {"output_dir", out.string()},
            {"emit_svg", true},
            {"da_pair", {{"classes", 3}, {"separation", 10.0}}},
            {"estimator", {{"samples", 80}, {"batch_size", 40}, {"batches", 6}, {"steps_per_batch", 5},
                           {"settings", {"closed", "partial"}}}}};
}

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(OTSHIFT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("schema validation")
{
    CHECK_THROWS_AS(parse_config(json{{"seed", 1}}), ConfigError);
    CHECK_THROWS_AS(parse_config(json{{"experiment", "fig9"}}), ConfigError);
    CHECK_THROWS_AS(parse_config(json{{"experiment", "labelshift"}, {"extra", 1}}), ConfigError);
    CHECK_THROWS_AS(parse_config(json{{"experiment", "labelshift"}, {"da_pair", {{"clases", 3}}}}), ConfigError);
    CHECK_THROWS_AS(parse_config(json{{"experiment", "ldrot"}, {"trainer", {{"alpha", "big"}}}}), ConfigError);
    CHECK_THROWS_AS(parse_config(json{{"experiment", "ldrot"}, {"trainer", {{"tau", -1.0}}}}), ConfigError);
    CHECK_THROWS_AS(parse_config(json{{"experiment", "labelshift"}, {"estimator", {{"epsilon", 0}}}}), ConfigError);
    CHECK_THROWS_AS(parse_config(json{{"experiment", "labelshift"}, {"da_pair", {{"source_marginal", {0.5, 0.5}}}}}),
                    ConfigError);
    CHECK_THROWS_AS(parse_config(json::array()), ConfigError);

    const ExperimentConfig c = parse_config(json{{"experiment", "bounds-sweep"}, {"sweep", {{"seeds", 2}}}});
    CHECK(c.experiment == ExperimentKind::bounds_sweep);
    CHECK(c.sweep.seeds == 2);
    CHECK(c.trainer.ldrot.tau == 0.5);
}

TEST_CASE("OTSHIFT_SEED overrides the config seed")
{
    ExperimentConfig c = parse_config(json{{"experiment", "labelshift"}, {"seed", 5}});
    setenv("OTSHIFT_SEED", "77", 1);
    apply_seed_override(c);
    CHECK(c.seed == 77);
    setenv("OTSHIFT_SEED", "abc", 1);
    CHECK_THROWS_AS(apply_seed_override(c), ConfigError);
    unsetenv("OTSHIFT_SEED");
    apply_seed_override(c);
    CHECK(c.seed == 77);
}

TEST_CASE("labelshift run writes well-formed, reproducible artifacts")
{
    const fs::path out = scratch("ls");
    const ExperimentConfig cfg = parse_config(small_labelshift(out));
    const RunReport r = run_experiment(cfg);
    CHECK(fs::exists(out / "labelshift.svg"));
    CHECK(fs::exists(out / "summary.json"));
    const auto rows = read_csv(out / "labelshift.csv");
    REQUIRE(rows.size() == 1 + 2 * 6);
    CHECK(rows[0] == std::vector<std::string>{"batch", "dual_estimate", "exact_lp", "setting"});
    for (std::size_t i = 1; i < rows.size(); ++i) {
        REQUIRE(rows[i].size() == 4);
        CHECK(std::stoi(rows[i][0]) == static_cast<int>((i - 1) % 6));
        CHECK(std::isfinite(std::stod(rows[i][1])));
        CHECK(std::isfinite(std::stod(rows[i][2])));
        CHECK(rows[i][3] == (i <= 6 ? "closed" : "partial"));
    }
    CHECK(slurp(out / "labelshift.svg").rfind("<svg", 0) == 0);

    const std::string first = slurp(out / "labelshift.csv");
    run_experiment(cfg);
    CHECK(slurp(out / "labelshift.csv") == first);
    (void)r;
}

TEST_CASE("bounds sweep artifacts")
{
    const fs::path out = scratch("sweep");
    json doc = {{"experiment", "bounds-sweep"},
                {"output_dir", out.string()},
                {"da_pair", {{"classes", 3}, {"anticausal", true}}},
                {"sweep", {{"separations", {5, 10}}, {"seeds", 2}, {"samples", 60}, {"n_mc", 200}}}};
    run_experiment(parse_config(doc));
    const auto rows = read_csv(out / "bounds.csv");
    REQUIRE(rows.size() == 1 + 4 * 2 * 2);
    CHECK(rows[0].size() == 9);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        REQUIRE(rows[i].size() == 9);
        CHECK(std::isfinite(std::stod(rows[i][4])));
        CHECK(rows[i][8] != "");  // anti-causal bound present
        CHECK((rows[i][0] == "closed") == rows[i][7].empty());
    }
    CHECK(json::parse(slurp(out / "bounds.json")).size() == 16);
}

TEST_CASE("training experiments write histories and checkpoints")
{
    const fs::path out = scratch("ldrot");
    json doc = {{"experiment", "ldrot"},
                {"seed", 2},
                {"output_dir", out.string()},
                {"emit_svg", true},
                {"da_pair", {{"classes", 3}, {"separation", 6.0}, {"target_rotation", 0.5}}},
                {"trainer", {{"total_steps", 40}, {"pretrain_steps", 20}, {"samples", 90}}}};
    run_experiment(parse_config(doc));
    for (const char* f : {"ldrot.csv", "baseline.csv", "model.json", "ldrot.svg", "baseline.svg", "summary.json"})
        CHECK(fs::exists(out / f));
    const auto rows = read_csv(out / "ldrot.csv");
    REQUIRE(rows.size() > 2);
    CHECK(rows[0].size() == 7);
    const json model = json::parse(slurp(out / "model.json"));
    CHECK(model.contains("g"));
    CHECK(model.contains("phi"));

    const fs::path inv = scratch("inv");
    doc["experiment"] = "invariance";
    doc["output_dir"] = inv.string();
    doc["trainer"].erase("pretrain_steps");
    run_experiment(parse_config(doc));
    CHECK(fs::exists(inv / "invariance.csv"));
}

TEST_CASE("feature summary")
{
    LabeledSample s, t;
    s.points = Matrix::Zero(4, 2);
    s.labels = {0, 0, 1, 1};
    t.points = Matrix::Ones(4, 2);
    t.labels = {0, 1, 1, 1};
    const json j = summarize_features(s, &t);
    CHECK(j["source"]["rows"] == 4);
    CHECK(j["label_shift"]["ls_exact_l1"].get<double>() == doctest::Approx(0.5));
    CHECK(j["label_shift"]["marginal_lb_l1"].get<double>() == doctest::Approx(0.5));
    CHECK_FALSE(summarize_features(s, nullptr).contains("label_shift"));
}

TEST_CASE("command line")
{
    const fs::path dir = scratch("cli");
    fs::create_directories(dir);
    const fs::path out = dir / "out";

    std::ofstream(dir / "missing.json") << json{{"output_dir", out.string()}}.dump();
    CHECK(run_cli("run --config " + (dir / "missing.json").string()) == 2);
    CHECK_FALSE(fs::exists(out));

    std::ofstream(dir / "broken.json") << "{ not json";
    CHECK(run_cli("validate --config " + (dir / "broken.json").string()) == 2);
    CHECK(run_cli("run") == 2);

    std::ofstream(dir / "ok.json") << small_labelshift(out).dump();
    CHECK(run_cli("validate --config " + (dir / "ok.json").string()) == 0);
    CHECK_FALSE(fs::exists(out));
    CHECK(run_cli("run --config " + (dir / "ok.json").string()) == 0);
    CHECK(fs::exists(out / "labelshift.csv"));

    for (const auto& e : fs::directory_iterator(OTSHIFT_CONFIG_DIR))
        CHECK_MESSAGE(run_cli("validate --config " + e.path().string()) == 0, e.path().string());

    std::ofstream(dir / "a.csv") << "label,f0,f1\n0,1,2\n1,3,4\n1,5,6\n";
    std::ofstream(dir / "b.csv") << "label,f0,f1\n0,1,2\n0,3,4\n1,5,6\n";
    CHECK(run_cli("ingest --features " + (dir / "a.csv").string() + " --target " + (dir / "b.csv").string() +
                  " --out " + (dir / "ingest").string()) == 0);
    const json summary = json::parse(slurp(dir / "ingest" / "features_summary.json"));
    CHECK(summary["label_shift"]["ls_exact_l1"].get<double>() == doctest::Approx(2.0 / 3.0));
    std::ofstream(dir / "bad.csv") << "label,f0\nx,1\n";
    CHECK(run_cli("ingest --features " + (dir / "bad.csv").string() + " --out " + (dir / "ingest2").string()) == 2);
}
