#include <doctest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "kgap/common/rng.hpp"
#include "kgap/ingest.hpp"
#include "kgap/llmgate.hpp"

namespace fs = std::filesystem;
using namespace kgap;

namespace {

struct Workdir {
  fs::path dir;
  Workdir() : dir(fs::temp_directory_path() / "kgap_cli_test") {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workdir() { fs::remove_all(dir); }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

int run(const Workdir& w, const std::string& args) {
  const std::string cmd = std::string(KGAP_CLI) + " " + args + " > " + (w / "stdout.txt") +
                          " 2> " + (w / "stderr.txt");
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_inputs(const Workdir& w) {
  Rng rng(17);
  std::vector<ingest::FactRecord> facts;
  std::vector<ingest::CovariateValue> covs;
  for (int e = 0; e < 40; ++e) {
    for (int y = 2000; y < 2006; ++y) {
      const auto id = "E" + std::to_string(e);
      facts.push_back({id, "Company " + std::to_string(e), y, std::round(rng.uniform(100, 5000)),
                       ingest::Unit::millions_usd});
      covs.push_back({id, y, "mcap_log10", rng.uniform(7.5, 10.5), ingest::TransformTag::log10});
    }
  }
  ingest::write_facts(w / "facts.csv", facts);
  ingest::write_covariates(w / "cov.csv", covs);
  llmgate::OracleProfile p;
  p.a_const = -7.0;
  p.c_cov = 0.8;
  p.hallucinate_given_known = 0.5;
  p.noise_seed = 4;
  std::ofstream(w / "profile.json") << llmgate::to_json(p).dump();
}

}  // namespace

TEST_CASE("usage errors exit 2") {
  Workdir w;
  CHECK(run(w, "") == 2);
  CHECK(run(w, "frobnicate") == 2);
  CHECK(run(w, "--help") == 0);
  CHECK(run(w, "gen --out x.jsonl") == 2);
  CHECK(slurp(w / "stderr.txt").find("--facts is required") != std::string::npos);
  CHECK(run(w, "gen --facts " + (w / "missing.csv") + " --out x.jsonl") == 2);
  CHECK(run(w, "classify --threshold notanumber") == 2);
}

TEST_CASE("missing API key is a configuration error") {
  Workdir w;
  write_inputs(w);
  REQUIRE(run(w, "gen --facts " + (w / "facts.csv") + " --out " + (w / "p.jsonl")) == 0);
  ::unsetenv("KGAP_CLI_TEST_UNSET");
  CHECK(run(w, "query --prompts " + (w / "p.jsonl") + " --out " + (w / "r.jsonl") +
                   " --model m --endpoint http://127.0.0.1:9/v1/chat/completions"
                   " --api-key-env KGAP_CLI_TEST_UNSET") == 2);
  CHECK_FALSE(fs::exists(w / "r.jsonl"));
}

TEST_CASE("dry run writes nothing") {
  Workdir w;
  write_inputs(w);
  CHECK(run(w, "--dry-run gen --facts " + (w / "facts.csv") + " --covariates " + (w / "cov.csv") +
                   " --sample stratified --per-cell 3 --out " + (w / "p.jsonl")) == 0);
  CHECK(slurp(w / "stdout.txt").find("prompts would be written") != std::string::npos);
  CHECK_FALSE(fs::exists(w / "p.jsonl"));
}

TEST_CASE("config file values yield to flags") {
  Workdir w;
  write_inputs(w);
  std::ofstream(w / "cfg.json") << R"({"facts": ")" << (w / "facts.csv")
                                << R"(", "gen": {"out": ")" << (w / "from_config.jsonl") << "\"}}";
  REQUIRE(run(w, "gen --config " + (w / "cfg.json")) == 0);
  CHECK(fs::exists(w / "from_config.jsonl"));
  REQUIRE(run(w, "gen --config " + (w / "cfg.json") + " --out " + (w / "from_flag.jsonl")) == 0);
  CHECK(fs::exists(w / "from_flag.jsonl"));
  CHECK(slurp(w / "from_flag.jsonl") == slurp(w / "from_config.jsonl"));

  std::ofstream(w / "bad.json") << R"({"gen": {"no_such_flag": 1}})";
  CHECK(run(w, "gen --config " + (w / "bad.json")) == 2);
  std::ofstream(w / "broken.json") << "{";
  CHECK(run(w, "gen --config " + (w / "broken.json")) == 2);
}

TEST_CASE("mock pipeline runs end to end and reruns byte-identically") {
  Workdir w;
  write_inputs(w);
  const auto pipeline = [&](const std::string& tag) {
    const auto f = [&](const std::string& n) { return w / (tag + n); };
    REQUIRE(run(w, "gen --facts " + (w / "facts.csv") + " --out " + f("p.jsonl")) == 0);
    REQUIRE(run(w, "query --prompts " + f("p.jsonl") + " --facts " + (w / "facts.csv") +
                       " --covariates " + (w / "cov.csv") + " --mock " + (w / "profile.json") +
                       " --out " + f("r.jsonl")) == 0);
    REQUIRE(run(w, "extract --responses " + f("r.jsonl") + " --out " + f("a.jsonl")) == 0);
    REQUIRE(run(w, "classify --answers " + f("a.jsonl") + " --prompts " + f("p.jsonl") +
                       " --facts " + (w / "facts.csv") + " --out " + f("o.csv")) == 0);
    REQUIRE(run(w, "temporal --outcomes " + f("o.csv") + " --out " + f("t")) == 0);
    REQUIRE(run(w, "regress --outcomes " + f("o.csv") + " --covariates " + (w / "cov.csv") +
                       " --x mcap_log10 --fixed year --out " + f("fits.json")) == 0);
    CHECK(slurp(w / "stdout.txt").find("Beta") != std::string::npos);
  };
  pipeline("a_");
  pipeline("b_");
  for (const char* n : {"p.jsonl", "r.jsonl", "a.jsonl", "o.csv", "t/rates.csv", "t/tallies.csv",
                        "t/errors.csv", "fits.json"}) {
    CAPTURE(n);
    CHECK(slurp(w / (std::string("a_") + n)) == slurp(w / (std::string("b_") + n)));
  }
  CHECK(slurp(w / "a_o.csv").rfind("prompt_id,", 0) == 0);
}

TEST_CASE("analysis failures exit 4") {
  Workdir w;
  std::ofstream(w / "o.csv") << "prompt_id,entity_id,year,truth,answer,pct_error,y,threshold\n"
                                "a,e1,2000,100,100,0,2,0.1\n"
                                "b,e2,2000,100,100,0,2,0.1\n";
  std::ofstream(w / "cov.csv") << "entity_id,year,name,value,transform_tag\n"
                                  "e1,2000,x,1,raw\ne2,2000,x,2,raw\n";
  CHECK(run(w, "regress --outcomes " + (w / "o.csv") + " --covariates " + (w / "cov.csv") +
                   " --x x --out " + (w / "fits.json")) == 4);
}

TEST_CASE("transport failures exit 3") {
  Workdir w;
  write_inputs(w);
  std::ofstream(w / "facts1.csv") << "entity_id,entity_name,year,value,unit\nE0,Company 0,2000,5,millions_usd\n";
  REQUIRE(run(w, "gen --facts " + (w / "facts1.csv") + " --out " + (w / "p.jsonl")) == 0);
  ::setenv("KGAP_CLI_TEST_KEY", "k", 1);
  CHECK(run(w, "query --prompts " + (w / "p.jsonl") + " --out " + (w / "r.jsonl") +
                   " --model m --endpoint http://127.0.0.1:9/v1/chat/completions"
                   " --api-key-env KGAP_CLI_TEST_KEY --timeout 2") == 3);
}
