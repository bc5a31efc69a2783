#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "corrprobit/io.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace corrprobit;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "corrprobit");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("corrprobit_cli_" + name)).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Json read_json(const std::string& path) { return Json::parse(slurp(path)); }

}  // namespace

TEST_CASE("sampling is deterministic given a seed") {
  const std::string model = temp_path("m3.json");
  write_model_file(model, testsupport::exchangeable_model(3));
  const std::string a = temp_path("a.csv"), b = temp_path("b.csv"), c = temp_path("c.csv");
  for (const auto& [path, seed] : {std::pair{a, "7"}, std::pair{b, "7"}, std::pair{c, "8"}}) {
    const Run r = run_cli({"sample", "--model", model, "--samples-per-triple", "1000", "--seed", seed, "--out", path});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("sampled 1 triple") != std::string::npos);
  }
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(a) != slurp(c));
}

TEST_CASE("zero samples is an input error") {
  const std::string model = temp_path("m3z.json");
  write_model_file(model, testsupport::exchangeable_model(3));
  const Run r = run_cli({"sample", "--model", model, "--samples-per-triple", "0", "--seed", "1", "--out",
                         temp_path("z.csv")});
  CHECK(r.code == 2);
  const Json err = Json::parse(r.err);
  CHECK(err["error"] == "InvalidArgument");
  CHECK(err["exit_code"] == 2);
}

TEST_CASE("missing required flags exit with an input error") {
  CHECK(run_cli({"sample", "--model", "x.json"}).code == 2);
  CHECK(run_cli({}).code == 2);
  CHECK(run_cli({"bogus"}).code == 2);
  CHECK(run_cli({"lowerbound", "--n", "4", "--out", temp_path("lb.json"), "--epsilon", "0.5"}).code == 2);
}

TEST_CASE("three-item counts estimate an exchangeable model") {
  const std::string model = temp_path("m3e.json"), counts = temp_path("e.csv"), est = temp_path("e.json");
  write_model_file(model, testsupport::exchangeable_model(3));
  REQUIRE(run_cli({"sample", "--model", model, "--samples-per-triple", "1000000", "--seed", "3", "--out", counts})
              .code == 0);
  const Run r = run_cli({"estimate", "--counts", counts, "--out", est});
  REQUIRE(r.code == 0);
  const ProbitModel fit = read_model_file(est);
  CHECK((fit.sigma - testsupport::exchangeable_model(3).sigma).cwiseAbs().maxCoeff() <= 0.05);
  CHECK(fit.mu.cwiseAbs().maxCoeff() <= 0.05);
  const Json diag = read_json(est + ".diagnostics.json");
  CHECK(diag["samples"] == 1000000);
  CHECK(diag.contains("gamma_hat"));
}

TEST_CASE("multi-item estimation from a model source") {
  const std::string model = temp_path("m5.json"), est = temp_path("m5est.json"), diag = temp_path("m5diag.json");
  std::mt19937_64 rng(2);
  const ProbitModel truth = testsupport::random_model(5, rng, 0.5);
  write_model_file(model, truth);
  const Run r = run_cli({"estimate", "--model", model, "--exact", "--out", est, "--diagnostics", diag});
  REQUIRE(r.code == 0);
  CHECK((read_model_file(est).sigma - truth.sigma).cwiseAbs().maxCoeff() < 1e-4);
  CHECK(read_json(diag)["triples"].size() > 0);

  const std::string counts = temp_path("m5.csv"), est2 = temp_path("m5est2.json");
  REQUIRE(run_cli({"sample", "--model", model, "--samples-per-triple", "20000", "--seed", "1", "--out", counts})
              .code == 0);
  REQUIRE(run_cli({"estimate", "--counts", counts, "--out", est2}).code == 0);
  CHECK((read_model_file(est2).sigma - truth.sigma).cwiseAbs().maxCoeff() < 0.3);
}

TEST_CASE("disconnected counts are an infeasibility error") {
  const std::string counts = temp_path("disc.csv");
  {
    std::ofstream f(counts);
    f << "i,j,k,perm,count\n";
    for (const char* t : {"0,1,2", "3,4,5"})
      for (const char* perm : {"abc", "acb", "bac", "bca", "cab", "cba"}) f << t << "," << perm << ",1000\n";
  }
  const Run r = run_cli({"estimate", "--counts", counts, "--out", temp_path("disc.json")});
  CHECK(r.code == 4);
  CHECK(Json::parse(r.err)["error"] == "DisconnectedGraph");
}

TEST_CASE("malformed counts name the offending line") {
  const std::string counts = temp_path("bad.csv");
  std::ofstream(counts) << "i,j,k,perm,count\n0,1,2,abc,5\n0,1,2,abc,x\n";
  const Run r = run_cli({"estimate", "--counts", counts, "--out", temp_path("bad.json")});
  CHECK(r.code == 2);
  CHECK(Json::parse(r.err)["message"].get<std::string>().find("line 3") != std::string::npos);
}

TEST_CASE("ingest writes counts") {
  const std::string rows = temp_path("rows.csv"), counts = temp_path("rows_counts.csv");
  std::ofstream(rows) << "user,items\nu1,0,1,2,3\nu2,3,2,1,0\n";
  const Run r = run_cli({"ingest", "--rankings", rows, "--out", counts});
  REQUIRE(r.code == 0);
  const auto c = read_counts_file(counts);
  CHECK(c.size() == 4);
  for (const auto& t : c) CHECK(t.total() == 2);
}

TEST_CASE("witness command builds a family") {
  const std::string model = temp_path("w.json"), out = temp_path("w_out.json");
  std::mt19937_64 rng(9);
  write_model_file(model, testsupport::random_model(4, rng));
  const Run r = run_cli({"witness", "--model", model, "--seed", "5", "--out", out});
  REQUIRE(r.code == 0);
  const Json j = read_json(out);
  CHECK(j["case"] == 3);
  CHECK(j["members"].size() == 5);
  CHECK(j["max_pairwise_deviation"].get<double>() <= 1e-9);
}

TEST_CASE("lowerbound command reports the pair") {
  const std::string out = temp_path("lb3.json");
  const Run r = run_cli({"lowerbound", "--n", "3", "--epsilon", "0.05", "--out", out});
  REQUIRE(r.code == 0);
  const Json j = read_json(out);
  CHECK(j["linf_gap"].get<double>() >= 0.05 / 2 - 1e-12);
  CHECK(j["max_kl"].get<double>() <= 0.05 * 0.05);
  CHECK(r.out.find("max KL") != std::string::npos);
}

TEST_CASE("experiment and welfare commands") {
  const std::string exp = temp_path("exp.csv");
  const Run r = run_cli({"experiment", "--regime", "0/I", "--n", "6", "--training", "2000", "--trials", "50",
                         "--mle-steps", "20", "--no-moment", "--format", "csv", "--seed", "1", "--out", exp});
  REQUIRE(r.code == 0);
  CHECK(slurp(exp).find("oracle") != std::string::npos);
  CHECK(run_cli({"experiment", "--regime", "0/xyz", "--seed", "1", "--out", exp}).code == 2);

  const std::string wel = temp_path("wel.json");
  const Run w = run_cli({"welfare", "--sizes", "1,2", "--mc-draws", "20000", "--seed", "2", "--out", wel});
  REQUIRE(w.code == 0);
  const Json j = read_json(wel);
  CHECK(j.size() == 4);
}

TEST_CASE("config file supplies flags") {
  const std::string model = temp_path("cfg_m.json"), cfg = temp_path("cfg.ini"), out = temp_path("cfg_out.csv");
  write_model_file(model, testsupport::exchangeable_model(3));
  std::ofstream(cfg) << "[sample]\nmodel=\"" << model << "\"\nsamples-per-triple=10\nseed=4\nout=\"" << out << "\"\n";
  const Run r = run_cli({"--config", cfg, "sample"});
  CHECK(r.code == 0);
  CHECK(read_counts_file(out)[0].total() == 10);
}
