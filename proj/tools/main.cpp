#include "efg/scenario.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace efg;

namespace {

constexpr int kPass = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot read " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ScenarioError(path + ": " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ehrenfeucht-Fraisse games on abelian groups and filtration builds"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_states;
  std::string format = "text";
  app.add_option("--seed", seed, "seed for every random choice");
  app.add_option("--max-states", max_states, "solver position budget");
  app.add_option("--format", format, "report format")->check(CLI::IsMember({"text", "json"}));

  std::string scenario_path;
  std::string out_path;
  auto* run = app.add_subcommand("run", "run a scenario file and print its report");
  run->add_option("scenario", scenario_path, "scenario JSON")->required();
  run->add_option("-o,--output", out_path, "write the report here instead of stdout");

  std::string tree_path, left_path, right_path, side = "forall", transcript_path;
  long ball = -1;
  auto* play = app.add_subcommand("play", "play one side of a game against the solver");
  play->add_option("--tree", tree_path, "tree as a JSON parent array")->required();
  play->add_option("--left", left_path, "left group JSON")->required();
  play->add_option("--right", right_path, "right group JSON")->required();
  play->add_option("--side", side, "the side you play")->check(CLI::IsMember({"forall", "exists"}));
  play->add_option("--ball", ball, "restrict both carriers to this coefficient ball");
  play->add_option("--transcript", transcript_path, "save the transcript here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kUsage;
  }

  try {
    if (*run) {
      RunOptions opts{seed, max_states};
      const Report r = run_scenario_file(scenario_path, opts);
      const std::string text = emit_report(r, format == "json" ? ReportFormat::Json : ReportFormat::Text);
      if (out_path.empty()) {
        std::cout << text;
      } else {
        std::ofstream out(out_path, std::ios::binary);
        if (!(out << text)) throw ScenarioError("cannot write " + out_path);
      }
      for (const auto& f : r.failures()) std::cerr << "failed: " << f << "\n";
      return r.passed() ? kPass : kFailure;
    }
    GameSpec spec;
    spec.tree = parse_tree(read_json(tree_path));
    const Presentation a = parse_group(read_json(left_path)), b = parse_group(read_json(right_path));
    if (ball >= 0) {
      spec.left = Structure::ball(a, static_cast<std::size_t>(ball));
      spec.right = Structure::ball(b, static_cast<std::size_t>(ball));
    } else {
      spec.left = Structure::whole(a);
      spec.right = Structure::whole(b);
    }
    SolveOptions so;
    if (max_states) so.max_states = *max_states;
    const Transcript t =
        interactive_play(spec, side == "forall" ? Player::Forall : Player::Exists, std::cin, std::cout, so);
    const std::string js = transcript_json(t).dump(2) + "\n";
    if (transcript_path.empty()) {
      std::cout << js;
    } else {
      std::ofstream out(transcript_path, std::ios::binary);
      if (!(out << js)) throw ScenarioError("cannot write " + transcript_path);
    }
    return kPass;
  } catch (const ScenarioError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const GroupError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const BudgetExceeded& e) {
    std::cerr << "failed: " << e.what() << "\n";
    return kFailure;
  }
}
