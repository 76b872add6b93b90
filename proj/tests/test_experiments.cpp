#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mcga/experiments.hpp"

using namespace mcga;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    std::filesystem::path dir;
    explicit TempDir(const std::string& name) : dir(std::filesystem::path("test_out") / name) {
        std::filesystem::remove_all(dir);
        std::filesystem::create_directories(dir);
    }
    ~TempDir() { std::filesystem::remove_all(dir); }
    std::string str() const { return dir.string(); }
};

}  // namespace

TEST_CASE("per-experiment defaults mirror the reference parameters") {
    ConfigInput in;
    in.set("experiment", "exp1");
    const ExperimentConfig c1 = resolve_config(in);
    CHECK(c1.n == 500000);
    CHECK(c1.dt == 0.001);
    CHECK(c1.t0 == 0.0);
    CHECK(c1.t_star == 1.0);
    CHECK(c1.grid_m == 15);
    CHECK(c1.diffusion_d == 0.1);
    CHECK(c1.mode == "both");
    CHECK(c1.replicates == 1);

    in.set("experiment", "exp2");
    const ExperimentConfig c2 = resolve_config(in);
    CHECK(c2.n == 500000);
    CHECK(c2.dt == 0.01);
    CHECK(c2.t0 == 5.0);
    CHECK(c2.t_star == 6.0);
    CHECK(c2.replicates == 20);
    CHECK(c2.resolutions == std::vector<int>{11, 21, 41, 81});
}

TEST_CASE("scale multiplies particle and replicate counts") {
    ConfigInput in;
    in.set("experiment", "exp2");
    in.set("scale", "0.1");
    const ExperimentConfig cfg = resolve_config(in);
    CHECK(cfg.n == 50000);
    CHECK(cfg.replicates == 2);
    CHECK(cfg.requested_scale == 0.1);
}

TEST_CASE("flat config parsing, comments and overrides") {
    std::stringstream file;
    file << "# sweep base\n"
         << "experiment = exp2\n"
         << "n = 1000   # desk\n"
         << "resolutions = 5, 7\n"
         << "replicates = 2\n";
    ConfigInput in = parse_flat_config(file, "<test>");
    in.set("n", "2000");  // flag wins over file
    const ExperimentConfig cfg = resolve_config(in);
    CHECK(cfg.n == 2000);
    CHECK(cfg.resolutions == std::vector<int>{5, 7});
    CHECK(cfg.replicates == 2);
}

TEST_CASE("config validation rejects bad input") {
    ConfigInput bad_key;
    bad_key.set("experiment", "exp1");
    bad_key.set("particels", "100");
    CHECK_THROWS_AS(resolve_config(bad_key), std::invalid_argument);

    ConfigInput bad_mode;
    bad_mode.set("experiment", "exp1");
    bad_mode.set("mode", "sometimes");
    CHECK_THROWS_AS(resolve_config(bad_mode), std::invalid_argument);

    ConfigInput bad_t0;
    bad_t0.set("experiment", "exp2");
    bad_t0.set("t0", "0");
    CHECK_THROWS_AS(resolve_config(bad_t0), std::invalid_argument);

    ConfigInput bad_steps;
    bad_steps.set("experiment", "exp1");
    bad_steps.set("dt", "0.3");
    CHECK_THROWS_AS(resolve_config(bad_steps), std::invalid_argument);

    ConfigInput custom_without_block;
    custom_without_block.set("experiment", "exp1");
    custom_without_block.set("custom.diffusion", "0.1,0,0");
    CHECK_THROWS_AS(resolve_config(custom_without_block), std::invalid_argument);
}

TEST_CASE("experiment 1 writes the documented output manifest") {
    TempDir tmp("exp1_manifest");
    ConfigInput in;
    in.set("experiment", "exp1");
    in.set("n", "2000");
    in.set("dt", "0.01");
    in.set("seed", "5");
    in.set("out_dir", tmp.str());
    in.set("jobs", "2");
    const ExperimentConfig cfg = resolve_config(in);
    const Experiment1Result result = run_experiment1(cfg);

    const std::vector<std::string> expected = {
        "mc_neglect_phi.csv",        "mc_neglect_ex.csv",
        "mc_neglect_ey.csv",         "mc_neglect_enorm.csv",
        "relerr_mc_neglect_phi.csv", "relerr_mc_neglect_ex.csv",
        "relerr_mc_neglect_ey.csv",  "relerr_mc_neglect_enorm.csv",
        "mc_exact_phi.csv",          "mc_exact_ex.csv",
        "mc_exact_ey.csv",           "mc_exact_enorm.csv",
        "relerr_mc_exact_phi.csv",   "relerr_mc_exact_ex.csv",
        "relerr_mc_exact_ey.csv",    "relerr_mc_exact_enorm.csv",
        "fd_ex.csv",                 "fd_ey.csv",
        "fd_enorm.csv",              "relerr_fd_ex.csv",
        "relerr_fd_ey.csv",          "relerr_fd_enorm.csv",
        "exact_phi.csv",             "exact_ex.csv",
        "exact_ey.csv",              "exact_enorm.csv",
        "summary.json"};
    std::vector<std::string> got = result.files;
    std::vector<std::string> want = expected;
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    CHECK(got == want);

    for (const std::string& name : expected) {
        if (name == "summary.json") continue;
        std::ifstream in_csv(tmp.dir / name);
        REQUIRE(in_csv);
        std::string header;
        std::getline(in_csv, header);
        CHECK(header == "i,j,x_center,y_center,value");
    }

    const nlohmann::json summary = nlohmann::json::parse(slurp((tmp.dir / "summary.json").string()));
    CHECK(summary.at("config").at("n").get<long long>() == 2000);
    CHECK(summary.at("config").at("seed").get<std::uint64_t>() == 5);
    CHECK(summary.at("results").contains("interior_relative_error"));
}

TEST_CASE("emit_snapshots adds the per-field ensemble dumps") {
    TempDir tmp("exp1_snapshots");
    ConfigInput in;
    in.set("experiment", "exp1");
    in.set("n", "500");
    in.set("dt", "0.02");
    in.set("mode", "neglect");
    in.set("emit_snapshots", "1");
    in.set("out_dir", tmp.str());
    const ExperimentConfig cfg = resolve_config(in);
    const Experiment1Result result = run_experiment1(cfg);
    for (const std::string name : {"ensemble_phi.csv", "ensemble_ex.csv", "ensemble_ey.csv"}) {
        CHECK(std::count(result.files.begin(), result.files.end(), name) == 1);
        std::ifstream dump(tmp.dir / name);
        REQUIRE(dump);
        std::string header;
        std::getline(dump, header);
        CHECK(header == "x,y,weight");
    }
}

TEST_CASE("experiment 2 outputs are jobs-invariant and reproducible from their own summary") {
    TempDir tmp1("exp2_a"), tmp2("exp2_b"), tmp3("exp2_c");
    ConfigInput in;
    in.set("experiment", "exp2");
    in.set("n", "2000");
    in.set("replicates", "2");
    in.set("resolutions", "5,7");
    in.set("dt", "0.1");
    in.set("seed", "17");
    in.set("jobs", "1");
    in.set("out_dir", tmp1.str());
    const ExperimentConfig serial = resolve_config(in);
    const Experiment2Result r1 = run_experiment2(serial);

    in.set("jobs", "3");
    in.set("out_dir", tmp2.str());
    const ExperimentConfig threaded = resolve_config(in);
    const Experiment2Result r2 = run_experiment2(threaded);

    CHECK(slurp((tmp1.dir / "variance.csv").string()) ==
          slurp((tmp2.dir / "variance.csv").string()));
    CHECK(r1.summary.at("results") == r2.summary.at("results"));

    // rerun from the emitted summary.json itself
    ConfigInput embedded = load_config_file((tmp1.dir / "summary.json").string());
    embedded.set("out_dir", tmp3.str());
    const ExperimentConfig cfg3 = resolve_config(embedded);
    CHECK(cfg3.n == serial.n);
    CHECK(cfg3.seed == serial.seed);
    CHECK(cfg3.resolutions == serial.resolutions);
    const Experiment2Result r3 = run_experiment2(cfg3);
    CHECK(slurp((tmp1.dir / "variance.csv").string()) ==
          slurp((tmp3.dir / "variance.csv").string()));
    CHECK(r1.summary.at("results") == r3.summary.at("results"));
}

TEST_CASE("experiment 2 summary records the requested sweep parameters") {
    TempDir tmp("exp2_prov");
    ConfigInput in;
    in.set("experiment", "exp2");
    in.set("n", "1500");
    in.set("replicates", "3");
    in.set("resolutions", "5,7,9");
    in.set("dt", "0.1");
    in.set("out_dir", tmp.str());
    Provenance prov;
    prov.argv = {"mcga", "run", "exp2", "--replicates", "3", "--resolutions", "5,7,9"};
    const Experiment2Result r = run_experiment2(resolve_config(in), prov);
    CHECK(r.summary.at("config").at("replicates").get<int>() == 3);
    CHECK(r.summary.at("config").at("resolutions").get<std::vector<int>>() ==
          std::vector<int>{5, 7, 9});
    CHECK(r.summary.at("provenance").at("argv").size() == 7);
    CHECK(r.summary.at("results").at("var_mc").size() == 3);
}

TEST_CASE("custom experiment solves a descriptor-defined problem against its exact solution") {
    TempDir tmp("custom_run");
    ConfigInput in;
    in.set("experiment", "custom");
    in.set("n", "20000");
    in.set("dt", "0.01");
    in.set("t_star", "0.5");
    in.set("grid_m", "9");
    in.set("out_dir", tmp.str());
    in.set("custom.domain", "0,1,0,1");
    in.set("custom.diffusion", "0.05,0,0");
    in.set("custom.exact_poly", "1,0,0; 1,1,1");
    in.set("custom.exact_decay", "-0.2");
    const ExperimentConfig cfg = resolve_config(in);
    const nlohmann::ordered_json summary = run_custom(cfg);
    const double median =
        summary.at("results").at("interior_relative_error").at("median").get<double>();
    CHECK(median < 0.05);
    CHECK(std::filesystem::exists(tmp.dir / "mc_u.csv"));
    CHECK(std::filesystem::exists(tmp.dir / "exact_u.csv"));
    CHECK(std::filesystem::exists(tmp.dir / "relerr_u.csv"));
}
