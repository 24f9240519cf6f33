#include "catch_amalgamated.hpp"

#include "efg/scenario.hpp"

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace efg;
namespace fs = std::filesystem;

namespace {

const fs::path kScenarios = SCENARIO_DIR;

struct Run {
  int code = -1;
  std::string out;
};

Run cli(const std::string& args) {
  const std::string cmd = std::string(EFGAME_CLI_PATH) + " " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p);
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("efgame-cli-" + std::to_string(::getpid()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(path_ / name) << text;
    return (path_ / name).string();
  }

 private:
  fs::path path_;
};

Json load(const std::string& name) {
  std::ifstream in(kScenarios / name);
  return Json::parse(in);
}

GameSpec whole_game(const Presentation& a, const Presentation& b, const Tree& t) {
  return GameSpec{Structure::whole(a), Structure::whole(b), t};
}

}  // namespace

TEST_CASE("exit 0 on the passing catalog") {
  for (const auto& entry : fs::directory_iterator(kScenarios)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("game_", 0) && name.rfind("build_", 0) && name.rfind("equivalence_", 0) && name.rfind("suite_", 0))
      continue;
    INFO(name);
    CHECK(cli("run " + entry.path().string()).code == 0);
  }
}

TEST_CASE("exit 1 on a property failure") {
  TempDir tmp;
  Json wrong = load("game_z2_z3_chain1.json");
  wrong["expect"]["winner"] = "exists";
  CHECK(cli("run " + tmp.write("wrong_winner.json", wrong.dump())).code == 1);

  Json no_chain = load("build_family_guess.json");
  no_chain["expect"]["chain_installed"] = true;
  CHECK(cli("run " + tmp.write("wrong_chain.json", no_chain.dump())).code == 1);

  Json eq = load("equivalence_mismatched_order.json");
  eq["expect"]["equivalent"] = true;
  CHECK(cli("run " + tmp.write("wrong_eq.json", eq.dump())).code == 1);

  // a failing member fails the suite
  Json suite{{"kind", "suite"}, {"scenarios", Json::array({wrong})}};
  const Run r = cli("--format json run " + tmp.write("suite.json", suite.dump()));
  CHECK(r.code == 1);
  CHECK(Json::parse(r.out)["verdicts"].begin().value() == false);

  // a solver budget too small to finish
  CHECK(cli("--max-states 1 run " + (kScenarios / "game_klein_chain3.json").string()).code == 1);
}

TEST_CASE("exit 2 on usage and schema errors") {
  TempDir tmp;
  const std::string good = (kScenarios / "game_z2_z3_chain1.json").string();
  CHECK(cli("").code == 2);
  CHECK(cli("frobnicate").code == 2);
  CHECK(cli("run").code == 2);
  CHECK(cli("--format xml run " + good).code == 2);
  CHECK(cli("--seed minus-one run " + good).code == 2);
  CHECK(cli("run /nonexistent/scenario.json").code == 2);
  CHECK(cli("play --tree x.json").code == 2);

  const std::vector<std::pair<std::string, std::string>> bad = {
      {"malformed", "{\"kind\": \"game\","},
      {"not_object", "[1, 2]"},
      {"no_kind", "{\"name\": \"x\"}"},
      {"unknown_kind", "{\"kind\": \"poker\"}"},
      {"unknown_key", "{\"kind\": \"suite\", \"colour\": 1}"},
      {"bad_seed", "{\"kind\": \"suite\", \"seed\": -4}"},
      {"missing_group", "{\"kind\": \"game\", \"left\": {\"gens\": 1}, \"tree\": [null]}"},
      {"bad_relation", "{\"kind\": \"game\", \"left\": {\"gens\": 1, \"relations\": [[1, 2]]}, "
                       "\"right\": {\"gens\": 1}, \"tree\": [null]}"},
      {"cyclic_tree", "{\"kind\": \"game\", \"left\": {\"gens\": 1, \"relations\": [[2]]}, "
                      "\"right\": {\"gens\": 1, \"relations\": [[2]]}, \"tree\": [1, 0]}"},
      {"infinite_no_ball", "{\"kind\": \"game\", \"left\": {\"gens\": 1}, \"right\": {\"gens\": 1}, \"tree\": [null]}"},
      {"bad_winner", "{\"kind\": \"game\", \"left\": {\"gens\": 1, \"relations\": [[2]]}, "
                     "\"right\": {\"gens\": 1, \"relations\": [[2]]}, \"tree\": [null], \"expect\": {\"winner\": \"nobody\"}}"},
      {"bad_plan", "{\"kind\": \"build\", \"index\": {\"chain\": 2}, \"plan\": [\"free\", \"wobble\"]}"},
      {"gadget_at_free", "{\"kind\": \"build\", \"index\": {\"chain\": 2}, \"plan\": [\"free\", \"free\"], "
                         "\"script\": {\"w_nodes\": {\"1\": [[0]]}}}"},
      {"bad_stage_key", "{\"kind\": \"build\", \"index\": {\"chain\": 2}, \"plan\": [\"free\"], "
                        "\"script\": {\"h\": {\"three\": \"identity\"}}}"},
      {"bad_levels", "{\"kind\": \"equivalence\", \"left\": {\"rank\": 1, \"levels\": [[], [[1]]]}, "
                     "\"right\": {\"rank\": 1, \"levels\": [[], [[1]]]}, \"levels\": 3}"},
      {"not_nested", "{\"kind\": \"equivalence\", \"left\": {\"rank\": 1, \"levels\": [[[1]], [[2]]]}, "
                     "\"right\": {\"rank\": 1, \"levels\": [[], [[1]]]}}"},
      {"suite_missing_file", "{\"kind\": \"suite\", \"scenarios\": [\"no_such_file.json\"]}"},
  };
  for (const auto& [name, text] : bad) {
    INFO(name);
    CHECK(cli("run " + tmp.write(name + ".json", text)).code == 2);
  }

  // play: unreadable or malformed inputs
  const std::string tree = (kScenarios / "tree_chain2.json").string();
  const std::string z2 = (kScenarios / "group_z2.json").string();
  CHECK(cli("play --tree " + tree + " --left " + z2 + " --right /nonexistent.json < /dev/null").code == 2);
  CHECK(cli("play --tree " + tmp.write("t.json", "{}") + " --left " + z2 + " --right " + z2 + " < /dev/null").code == 2);
  CHECK(cli("play --tree " + tree + " --left " + z2 + " --right " + z2 + " --side both < /dev/null").code == 2);
}

TEST_CASE("same scenario and seed give identical bytes") {
  const std::string suite = (kScenarios / "suite_catalog.json").string();
  for (const std::string fmt : {"text", "json"}) {
    const Run a = cli("--format " + fmt + " run " + suite);
    const Run b = cli("--format " + fmt + " run " + suite);
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
    CHECK_FALSE(a.out.empty());
  }
  const Run s1 = cli("--seed 99 --format json run " + (kScenarios / "game_z2_z3_chain1.json").string());
  const Run s2 = cli("--seed 99 --format json run " + (kScenarios / "game_z2_z3_chain1.json").string());
  CHECK(s1.out == s2.out);
  CHECK(Json::parse(s1.out)["seed"] == 99);
}

TEST_CASE("game scenario reports the winner") {
  const Report r = run_scenario(load("game_z2_z3_chain1.json"));
  CHECK(r.body["winner"] == "forall");
  CHECK(r.passed());
  CHECK(r.body["sample_plays"].size() == 3);
}

TEST_CASE("build scenario reports heights and obstruction verdicts") {
  const Report r = run_scenario(load("build_identity_guess.json"));
  REQUIRE(r.passed());
  const Json& h = r.body["heights"];
  REQUIRE(h.size() == 8);
  for (std::size_t i = 0; i < h.size(); ++i) {
    CHECK(h[i]["N"] == i + 1);
    if (i > 0) CHECK(h[i]["height"].get<std::size_t>() > h[i - 1]["height"].get<std::size_t>());
  }
  CHECK(r.body["obstruction"]["exceptions"] == 0);
  CHECK(r.body["obstruction"]["triples"].get<std::size_t>() > 0);
  CHECK(r.body["stages"].size() == 5);
}

TEST_CASE("empty suite is a valid empty report") {
  const Report r = run_scenario(Json{{"kind", "suite"}, {"name", "empty"}});
  CHECK(r.passed());
  CHECK(r.body["verdicts"].empty());
  CHECK(r.body["reports"].empty());
  CHECK(Json::parse(emit_report(r, ReportFormat::Json)) == r.body);
}

TEST_CASE("json and text carry the same verdicts") {
  const Report r = run_scenario_file(kScenarios / "suite_catalog.json");
  const std::string js = emit_report(r, ReportFormat::Json);
  CHECK(Json::parse(js) == r.body);  // round trip
  CHECK(verdicts_of_rendering(js) == verdicts_of_rendering(emit_report(r, ReportFormat::Text)));
  CHECK(verdicts_of_rendering(js).size() == r.body["verdicts"].size());

  Json wrong = load("game_z2_z3_chain1.json");
  wrong["expect"]["winner"] = "exists";
  const Report f = run_scenario(wrong);
  CHECK_FALSE(f.passed());
  CHECK(f.failures() == std::vector<std::string>{"winner"});
  CHECK(verdicts_of_rendering(emit_report(f, ReportFormat::Text)) ==
        verdicts_of_rendering(emit_report(f, ReportFormat::Json)));
}

TEST_CASE("play: the machine as exists never loses on equal groups") {
  const Presentation g = Presentation::diagonal({2, 2});
  const GameSpec spec = whole_game(g, g, Tree::chain(2));
  // every first move of forall, then every second move
  for (NodeId n0 : {0, 1})
    for (const char* s0 : {"L", "R"})
      for (const auto& e0 : spec.left.carrier)
        for (const char* s1 : {"L", "R"})
          for (const auto& e1 : spec.left.carrier) {
            std::ostringstream script;
            script << n0 << " " << s0 << " " << e0.coeffs[0] << " " << e0.coeffs[1] << "\n";
            if (n0 == 0) script << 1 << " " << s1 << " " << e1.coeffs[0] << " " << e1.coeffs[1] << "\n";
            std::istringstream in(script.str());
            std::ostringstream out;
            const Transcript t = interactive_play(spec, Player::Forall, in, out);
            REQUIRE(t.verdict == "exists-wins");
          }
}

TEST_CASE("play: exists loses z2 against z3 whatever it answers") {
  const GameSpec spec = whole_game(Presentation::cyclic(2), Presentation::cyclic(3), Tree::chain(1));
  for (int reply : {0, 1, 2, 3}) {
    std::istringstream in(std::to_string(reply) + "\n0\n1\n");
    std::ostringstream out;
    const Transcript t = interactive_play(spec, Player::Exists, in, out);
    CHECK(t.verdict == "forall-wins");
    CHECK(t.detail.find("violate") != std::string::npos);
    CHECK(transcript_json(t)["verdict"] == "forall-wins");
  }
}

TEST_CASE("play: illegal moves are explained, quit abandons") {
  const Presentation g = Presentation::cyclic(2);
  const GameSpec spec = whole_game(g, g, Tree::chain(2));
  std::istringstream in("7 L 1\n0 X 1\n0 L 1 1\nzero L 1\n1 L 1\n0 L 1\nquit\n");
  std::ostringstream out;
  const Transcript t = interactive_play(spec, Player::Forall, in, out);
  const std::string log = out.str();
  CHECK(log.find("node 7 is not strictly above the start") != std::string::npos);
  CHECK(log.find("side must be L or R") != std::string::npos);
  CHECK(log.find("expected 1 coefficients") != std::string::npos);
  CHECK(log.find("is not a node id") != std::string::npos);
  // "1 L 1" is legal and ends the game on the chain's top node; the rest is never read
  REQUIRE(t.rounds.size() == 1);
  CHECK(t.rounds[0].node == 1);
  CHECK(t.verdict == "exists-wins");

  std::istringstream q("0 L 1\nquit\n");
  std::ostringstream o2;
  const Transcript a = interactive_play(spec, Player::Forall, q, o2);
  CHECK(a.verdict == "abandoned");
  CHECK(a.rounds.size() == 1);
  CHECK(o2.str().find("not strictly above node 0") == std::string::npos);

  // a ball carrier rejects elements outside it
  const GameSpec ball{Structure::ball(Presentation::free(1), 1), Structure::ball(Presentation::free(1), 1), Tree::chain(1)};
  std::istringstream b("0 L 5\nquit\n");
  std::ostringstream o3;
  CHECK(interactive_play(ball, Player::Forall, b, o3).verdict == "abandoned");
  CHECK(o3.str().find("not in the structure") != std::string::npos);
}
