// Copyright Contributors to the qre-toolkit Project
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "qre/cli.hpp"

using qre::io::Json;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args, const std::string& stdin_text = "") {
  args.insert(args.begin(), "qre");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::istringstream in(stdin_text);
  std::ostringstream out, err;
  const int code = qre::cli::dispatch(static_cast<int>(argv.size()), argv.data(), in, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

const std::string kRings = QRE_RINGS_DIR;

}  // namespace

TEST_CASE("usage errors exit 1", "[cli]") {
  CHECK(run({}).code == 1);
  CHECK(run({"frobnicate"}).code == 1);
  CHECK(run({"pullback", "verify", "--case", "nope"}).code == 1);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("ring new emits a loadable document", "[cli]") {
  const auto r = run({"ring", "new", "--kind", "s2xs2", "--copies", "2"});
  REQUIRE(r.code == 0);
  const auto doc = Json::parse(r.out);
  CHECK(doc["schema"] == "qre-toolkit/1");
  const auto ring = qre::io::ring_from_json(doc);
  CHECK(ring.betti() == std::vector<int>{1, 0, 4, 0, 1});
  CHECK(qre::validate(ring).valid);
}

TEST_CASE("ring sum reads files", "[cli]") {
  const auto r = run({"ring", "sum", kRings + "/cp2.json", kRings + "/s2xs2.json"});
  REQUIRE(r.code == 0);
  CHECK(qre::io::ring_from_json(Json::parse(r.out)).betti(2) == 3);
}

TEST_CASE("obstruct check exit codes and verdicts", "[cli]") {
  const auto obstructed = run({"obstruct", "check", kRings + "/sum4_s2xs2.json", "--restarts", "4"});
  CHECK(obstructed.code == 2);
  CHECK(Json::parse(obstructed.out)["result"]["verdict"] == "Obstructed");

  const auto embeds = run({"obstruct", "check", "-", "--restarts", "8"}, slurp(kRings + "/cp2.json"));
  CHECK(embeds.code == 0);
  CHECK(Json::parse(embeds.out)["result"]["verdict"] == "Embeds");

  const auto a = run({"obstruct", "check", kRings + "/s2xs2.json", "--seed", "3", "--restarts", "4"});
  const auto b = run({"obstruct", "check", kRings + "/s2xs2.json", "--seed", "3", "--restarts", "4"});
  CHECK(a.out == b.out);
}

TEST_CASE("malformed input names a JSON pointer", "[cli]") {
  auto doc = Json::parse(slurp(kRings + "/cp2.json"));
  doc["betti"][2] = "two";
  const auto r = run({"obstruct", "check", "-"}, doc.dump());
  CHECK(r.code == 1);
  CHECK(r.err.rfind("error: ", 0) == 0);
  CHECK(r.err.find("/betti/2") != std::string::npos);

  const auto broken = run({"obstruct", "check", "-"}, "{not json");
  CHECK(broken.code == 1);
}

TEST_CASE("invalid rings exit 2 with the failing axiom", "[cli]") {
  auto doc = Json::parse(slurp(kRings + "/s2xs2.json"));
  auto ring = qre::io::ring_from_json(doc);
  ring.sc(2, 2, 0, 1, 0) = 5;
  const auto r = run({"obstruct", "check", "-"}, qre::io::to_json(ring).dump());
  CHECK(r.code == 2);
  CHECK(Json::parse(r.out)["result"]["axiom"] == "graded-commutativity");
}

TEST_CASE("classify forms", "[cli]") {
  auto r = run({"classify", "-"}, "[[0,1],[1,0]]");
  REQUIRE(r.code == 0);
  CHECK(Json::parse(r.out)["result"]["homeo"]["name"] == "S^2 x S^2");
  r = run({"classify", "-", "--format", "text"}, "{\"form\": [[1,0],[0,-1]]}");
  CHECK(r.out == "CP^2 # CP^2bar\n");
  r = run({"classify", "-"}, "[[1,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,1]]");
  CHECK(r.code == 2);
  CHECK(Json::parse(r.out)["result"]["elliptic"] == false);
  r = run({"classify", "-"}, "[[2,1],[1,2]]");
  CHECK(r.code == 2);
  CHECK(Json::parse(r.out)["result"]["error"] == "FormError");
}

TEST_CASE("table output is byte-identical to the golden text", "[cli]") {
  CHECK(run({"table", "--format", "text"}).out == slurp(QRE_GOLDEN_DIR "/classification_table.txt"));
  CHECK(run({"classify", "--table", "--format", "text"}).out == slurp(QRE_GOLDEN_DIR "/classification_table.txt"));
  const auto a = run({"table"}), b = run({"table"});
  CHECK(a.out == b.out);
}

TEST_CASE("measure lab writes CSV with a JSON sidecar", "[cli]") {
  const auto dir = std::filesystem::temp_directory_path() / "qre_cli_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "lab.csv").string();
  const auto r = run({"measure-lab", "run", "--j", "1,2", "--grid", "64", "--samples", "64", "--out", path});
  REQUIRE(r.code == 0);
  const auto csv = slurp(path);
  CHECK(std::count(csv.begin(), csv.end(), '\n') >= 3);
  const auto side = Json::parse(slurp(path + ".json"));
  CHECK(side["config"]["grid"] == 64);
  CHECK(side["result"]["records"].size() == 2);
  CHECK(run({"measure-lab", "run", "--j", "0"}).code == 1);
  CHECK(run({"measure-lab", "run", "--n", "5", "--grid", "64"}).code == 1);
}

TEST_CASE("pullback verify cases", "[cli]") {
  auto r = run({"pullback", "verify", "--case", "invariance", "--n", "3"});
  CHECK(r.code == 0);
  CHECK(Json::parse(r.out)["result"]["pass"] == true);
  r = run({"pullback", "verify", "--case", "norm-bound"});
  CHECK(r.code == 0);
  r = run({"pullback", "verify", "--case", "exact-decay", "--n", "3", "--jmax", "5"});
  CHECK(r.code == 1);
  CHECK(run({"pullback", "verify", "--case", "rotated", "--n", "4"}).code == 1);
}
