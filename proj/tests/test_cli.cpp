#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "isq/cli.hpp"

using namespace isq;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

cli::Options options(const std::string& config, const std::string& tag) {
  cli::Options o;
  o.config_path = std::string(ISQ_CONFIG_DIR) + "/" + config;
  o.out_dir = (fs::temp_directory_path() / ("isq_test_cli_" + tag)).string();
  fs::remove_all(o.out_dir);
  return o;
}

/// Writes a config variant with replaced lines.
std::string variant(const std::string& config, const std::vector<std::pair<std::string, std::string>>& edits,
                    const std::string& tag) {
  std::string text = slurp(std::string(ISQ_CONFIG_DIR) + "/" + config);
  for (const auto& [from, to] : edits) {
    const auto pos = text.find(from);
    REQUIRE(pos != std::string::npos);
    text.replace(pos, from.size(), to);
  }
  const fs::path p = fs::temp_directory_path() / ("isq_test_cli_" + tag + ".ini");
  std::ofstream(p) << text;
  return p.string();
}

}  // namespace

TEST_CASE("git blob hashes", "[cli]") {
  CHECK(cli::git_blob_sha1("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  CHECK(cli::git_blob_sha1("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST_CASE("every sample config round-trips to a canonical form", "[cli]") {
  int count = 0;
  for (const auto& entry : fs::directory_iterator(ISQ_CONFIG_DIR)) {
    if (entry.path().extension() != ".ini") continue;
    const RunConfig a = load_config(entry.path().string());
    const std::string once = serialize_config(a);
    std::istringstream is(once);
    const std::string twice = serialize_config(parse_config(is));
    CHECK(once == twice);
    ++count;
  }
  CHECK(count >= 4);
}

TEST_CASE("config validation", "[cli]") {
  auto parse = [](const std::string& s) {
    std::istringstream is(s);
    return parse_config(is);
  };
  const std::string base = "[domain]\nkind = torus\n";
  CHECK_NOTHROW(parse(base));
  CHECK_THROWS_AS(parse(base + "[mesh]\nn = 8\nsize = 3\n"), Error);
  CHECK_THROWS_AS(parse(base + "[bogus]\nx = 1\n"), Error);
  CHECK_THROWS_AS(parse(base + "[solve]\nn_eigs = 2\n"), Error);  // no tolerance default
  CHECK_THROWS_AS(parse(base + "[point_0]\nposition_length = 0.5 0.5 0.5\ncutoff_radius_length = 0.2\n"
                               "cutoff_inner_length = 0.1\ncutoff_outer_length = 0.2\n"),
                  Error);  // no Z default
  const auto cfg = parse(base + "[solve]\nn_eigs = 2\ntol_residual = 1e-9\nk_path = 0 0 0 ; 1 2 3\n");
  REQUIRE(cfg.solve);
  CHECK(cfg.solve->k_path.size() == 2);
  CHECK(cfg.solve->k_path[1] == Point(1, 2, 3));
}

TEST_CASE("bspec report", "[cli]") {
  const auto rep = cli::bspec_report(load_config(std::string(ISQ_CONFIG_DIR) + "/ball_z2.ini").spec, 3);
  CHECK(rep["schema_version"] == cli::kSchemaVersion);
  CHECK(rep["eta"].get<double>() == 1.5);
  CHECK(rep["points"][0]["classification"]["regime"] == "EssentiallySelfAdjointStrict");
  CHECK(rep["points"][0]["roots"].size() == 8);
  CHECK(rep["points"][0]["fredholm"].size() == 9);
}

TEST_CASE("oracle table", "[cli]") {
  const auto csv = cli::oracle_table(load_config(std::string(ISQ_CONFIG_DIR) + "/ball_z2.ini"));
  std::istringstream is(csv);
  std::string header, first;
  std::getline(is, header);
  std::getline(is, first);
  CHECK(header == "Z,l,k,nu,j,lambda");
  CHECK(first.rfind("2,0,1,1.5,4.4934094579", 0) == 0);
}

TEST_CASE("verify: free torus matches plane waves", "[cli]") {
  std::ostringstream log;
  const auto o = options("free_torus.ini", "free");
  CHECK(cli::cmd_verify(o, log) == cli::kPass);
  CHECK(log.str().find("FAIL") == std::string::npos);
  CHECK(fs::exists(fs::path(o.out_dir) / "manifest.json"));
  CHECK(fs::exists(fs::path(o.out_dir) / "eigenvectors_k1.txt"));
}

TEST_CASE("verify: Z = 2 ball matches the radial oracle", "[cli]") {
  const std::string cfg = variant("ball_z2.ini", {{"n = 24", "n = 16"}}, "z2");
  cli::Options o = options("ball_z2.ini", "z2");
  o.config_path = cfg;
  std::ostringstream log;
  CHECK(cli::cmd_verify(o, log) == cli::kPass);
  INFO(log.str());
  CHECK(log.str().find("PASS k_index 0 band 0") != std::string::npos);
}

TEST_CASE("verify: assumption violation exits with 2 after the report", "[cli]") {
  std::ostringstream log;
  const auto o = options("ball_z_minus_half.ini", "violation");
  CHECK(cli::cmd_verify(o, log) == cli::kAssumption);
  const auto rep = nlohmann::json::parse(slurp(fs::path(o.out_dir) / "bspec.json"));
  CHECK(rep["assumption2_satisfied"] == false);
  CHECK(rep["points"][0]["classification"]["regime"] == "ImaginaryRootRegime");
  std::ostringstream log2;
  CHECK(cli::cmd_solve(options("ball_z_minus_half.ini", "violation_solve"), log2) == cli::kAssumption);
  CHECK(log2.str().find("assumption") != std::string::npos);
}

TEST_CASE("solve output is deterministic and thread-count independent", "[cli]") {
  const std::string cfg = variant("torus_hardy_critical.ini", {{"n_eigs = 4", "n_eigs = 2"}}, "det");
  std::vector<nlohmann::json> manifests;
  for (int threads : {1, 1, 2}) {
    cli::Options o = options("torus_hardy_critical.ini", "det" + std::to_string(manifests.size()));
    o.config_path = cfg;
    o.threads = threads;
    std::ostringstream log;
    REQUIRE(cli::cmd_solve(o, log) == cli::kPass);
    manifests.push_back(nlohmann::json::parse(slurp(fs::path(o.out_dir) / "manifest.json")));
  }
  set_num_threads(1);
  CHECK(manifests[0]["outputs"]["eigenvalues.csv"] == manifests[1]["outputs"]["eigenvalues.csv"]);
  CHECK(manifests[0]["unwritten_hashes"] == manifests[2]["unwritten_hashes"]);
  CHECK(manifests[0]["config_hash"] == manifests[2]["config_hash"]);
  CHECK(manifests[0]["schema_version"] == cli::kSchemaVersion);
}

TEST_CASE("analyze writes exponent, rate and profile reports", "[cli]") {
  const std::string cfg = variant("ball_z2.ini", {{"refinements = 16 24 32", "refinements = 8 12 16"}}, "analyze");
  cli::Options o = options("ball_z2.ini", "analyze");
  o.config_path = cfg;
  std::ostringstream log;
  REQUIRE(cli::cmd_analyze(o, log) == cli::kPass);
  for (const char* f : {"exponent_point0.csv", "rate.csv", "profile.csv", "summary.json", "manifest.json"})
    CHECK(fs::exists(fs::path(o.out_dir) / f));
  const auto summary = nlohmann::json::parse(slurp(fs::path(o.out_dir) / "summary.json"));
  CHECK(summary["rate"]["reference_kind"] == "oracle");
  CHECK(summary["exponent_fits"][0]["predicted"].get<double>() == 1.0);
}
