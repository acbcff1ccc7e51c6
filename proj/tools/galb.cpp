#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "galb/action_space.hpp"
#include "galb/instance_io.hpp"
#include "galb/solver.hpp"
#include "galb/training.hpp"

using namespace galb;
using nlohmann::json;

namespace {

std::optional<std::uint64_t> env_number(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::stoull(v);
}

FactoryConfig instance_or_reference(const std::string& path) {
  return path.empty() ? reference_instance() : load_instance(path);
}

SolveOptions solve_options() {
  SolveOptions options;
  if (auto budget = env_number("GALB_NODE_BUDGET")) options.node_budget = *budget;
  return options;
}

// Writes to `out` when given, otherwise to stdout.
void emit(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text;
    return;
  }
  const std::filesystem::path path(out);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream file(path);
  if (!file) throw std::runtime_error("cannot write " + out);
  file << text;
}

std::string row_string(AssignmentRow row, int tasks) {
  std::string s;
  for (int j = 0; j < tasks; ++j) s += (row >> j & 1) ? '1' : '0';
  return s;
}

json schedule_json(const std::vector<ScheduledAction>& schedule, const FactoryConfig& c) {
  json steps = json::array();
  for (const auto& step : schedule) {
    json rows = json::array();
    for (int i = 0; i < c.num_workstations; ++i) rows.push_back(row_string(row_of(step.action, i), c.num_tasks));
    steps.push_back({{"clock", step.clock}, {"rows", rows}});
  }
  return steps;
}

std::string big(const BigCount& v) { return v.str(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Task allocation on resource-constrained assembly lines"};
  app.require_subcommand(1);

  std::string instance, out, algo = "ppo", mode = "central", mask = "on", checkpoint, agent_file, occupancy = "1,3,1";
  std::vector<std::uint64_t> seeds{0};
  int episodes = 2000, samples = 200, depth = 5, max_tasks = 12, states = 10000, window = 100;
  int workstations = 3, tasks = 5;
  bool stop = false, list = false;
  double random_starts = 0.0;

  auto* enumerate = app.add_subcommand("enumerate", "Action-space sizes, optionally the full action list");
  enumerate->add_option("--instance", instance, "Instance JSON (default: built-in reference line)");
  enumerate->add_flag("--list", list, "Also list every centralized action");
  enumerate->add_option("--out", out, "Output JSON file");

  auto* solve_cmd = app.add_subcommand("solve", "Exact minimum ending time and an optimal schedule");
  solve_cmd->add_option("--instance", instance, "Instance JSON");
  solve_cmd->add_option("--out", out, "Output JSON file");

  auto* train = app.add_subcommand("train", "Train controllers and write metrics CSVs and checkpoints");
  train->add_option("--instance", instance, "Instance JSON");
  train->add_option("--algo", algo, "dqn or ppo")->check(CLI::IsMember({"dqn", "ppo"}));
  train->add_option("--mode", mode, "central or multi")->check(CLI::IsMember({"central", "multi"}));
  train->add_option("--mask", mask, "on or off")->check(CLI::IsMember({"on", "off"}));
  train->add_option("--seed", seeds, "One or more seeds");
  train->add_option("--episodes", episodes, "Episode budget per seed (GALB_EPISODES overrides)");
  train->add_option("--window", window, "Trailing window for the convergence median");
  train->add_flag("--stop-on-convergence", stop, "Stop a seed once the window median reaches the optimum");
  train->add_option("--random-starts", random_starts, "Fraction of episodes started from a random reachable state");
  train->add_option("--start-depth", depth, "Maximum random steps behind a sampled start");
  train->add_option("--agent-config", agent_file, "JSON file of hyperparameter overrides");
  train->add_option("--out", out, "Output directory (default: runs)");

  auto* evaluate = app.add_subcommand("evaluate", "Greedy rollout of a checkpoint from reset");
  evaluate->add_option("--instance", instance, "Instance JSON");
  evaluate->add_option("--checkpoint", checkpoint, "Checkpoint JSON")->required();
  evaluate->add_option("--out", out, "Output JSON file");

  auto* robust = app.add_subcommand("robustness", "Greedy rollouts from random reachable states versus the optimum");
  robust->add_option("--instance", instance, "Instance JSON");
  robust->add_option("--checkpoint", checkpoint, "Checkpoint JSON")->required();
  robust->add_option("--samples", samples, "Number of start states");
  robust->add_option("--depth", depth, "Maximum random steps from reset");
  robust->add_option("--seed", seeds, "Sampling seed");
  robust->add_option("--out", out, "Output CSV file");

  auto* mask_check = app.add_subcommand("mask-check", "Audit the centralized mask along random masked rollouts");
  mask_check->add_option("--instance", instance, "Instance JSON");
  mask_check->add_option("--states", states, "Number of states to visit");
  mask_check->add_option("--seed", seeds, "Rollout seed");
  mask_check->add_option("--out", out, "Output JSON file");

  auto* growth = app.add_subcommand("growth", "Action-space sizes versus the number of tasks");
  growth->add_option("--max-tasks", max_tasks, "Largest task count");
  growth->add_option("--occupancy", occupancy, "Comma-separated occupancy caps, one per workstation");
  growth->add_option("--out", out, "Output CSV file");

  auto* generate = app.add_subcommand("generate", "Write a seeded synthetic instance");
  generate->add_option("--workstations", workstations, "Number of workstations")->required();
  generate->add_option("--tasks", tasks, "Number of tasks")->required();
  generate->add_option("--seed", seeds, "Generator seed");
  generate->add_option("--out", out, "Output JSON file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*enumerate) {
      const FactoryConfig c = instance_or_reference(instance);
      json doc{{"unconstrained", big(count_unconstrained(c))},
               {"unique_assignment", big(count_unique_assignment(c))},
               {"occupancy_constrained", big(count_occupancy_constrained(c))}};
      json agents = json::array();
      for (int i = 0; i < c.num_workstations; ++i) agents.push_back(big(count_agent_space(c, i)));
      doc["per_agent"] = agents;
      if (list) {
        const CentralizedActionSpace space(c);
        json actions = json::array();
        for (std::size_t z = 0; z < space.size(); ++z) {
          json rows = json::array();
          for (AssignmentRow r : space.rows(z)) rows.push_back(row_string(r, c.num_tasks));
          actions.push_back(rows);
        }
        doc["actions"] = actions;
      }
      emit(doc.dump(2) + "\n", out);
    } else if (*solve_cmd) {
      const FactoryConfig c = instance_or_reference(instance);
      const SolveResult r = solve(c, solve_options());
      json doc{{"feasible", r.feasible}, {"nodes_expanded", r.nodes_expanded}};
      if (r.feasible) {
        doc["k_opt"] = r.k_opt;
        doc["schedule"] = schedule_json(r.schedule, c);
      }
      emit(doc.dump(2) + "\n", out);
    } else if (*train) {
      const FactoryConfig c = instance_or_reference(instance);
      RunManifest m;
      m.instance = instance;
      m.algorithm = algo;
      m.mode = mode;
      m.masking = mask == "on" ? Masking::on : Masking::off;
      m.seeds = seeds;
      m.episodes = episodes;
      if (auto e = env_number("GALB_EPISODES")) m.episodes = static_cast<int>(*e);
      m.window = window;
      m.stop_on_convergence = stop;
      m.random_starts = random_starts;
      m.start_depth = depth;
      m.out_dir = out.empty() ? "runs" : out;
      if (!agent_file.empty()) m.agent = read_json(agent_file);
      const SolveResult opt = solve(c, solve_options());
      if (!opt.feasible) throw std::runtime_error("instance cannot be finished within its horizon");
      const TrainingReport report = run_training(m, c, opt.k_opt);
      for (const SeedResult& s : report.seeds) {
        std::cout << "seed " << s.seed << ": " << s.episodes_run << " episodes, ";
        if (s.converged_at)
          std::cout << "converged at episode " << *s.converged_at;
        else
          std::cout << "not converged";
        std::cout << ", k_opt " << report.k_opt << ", " << s.metrics_csv.string() << "\n";
      }
    } else if (*evaluate) {
      const FactoryConfig c = instance_or_reference(instance);
      auto controller = controller_from_checkpoint(c, read_json(checkpoint));
      const int k = controller->greedy_rollout(reset(c));
      json doc{{"k_end", k}, {"completed", k >= 0}};
      const SolveResult opt = solve(c, solve_options());
      if (opt.feasible) doc["k_opt"] = opt.k_opt;
      emit(doc.dump(2) + "\n", out);
    } else if (*robust) {
      const FactoryConfig c = instance_or_reference(instance);
      auto controller = controller_from_checkpoint(c, read_json(checkpoint));
      Rng rng(seeds.front());
      const RobustnessReport r = robustness_test(*controller, c, samples, rng, depth, solve_options().node_budget);
      std::ostringstream csv;
      csv << "sample,clock,oracle_feasible,oracle_budget_exhausted,oracle_k,agent_k,optimal\n";
      for (std::size_t k = 0; k < r.samples.size(); ++k) {
        const auto& s = r.samples[k];
        csv << k << ',' << s.state.clock << ',' << s.oracle_feasible << ',' << s.oracle_budget_exhausted << ','
            << s.oracle_k << ',' << s.agent_k << ',' << (s.oracle_feasible && s.agent_k == s.oracle_k) << '\n';
      }
      emit(csv.str(), out);
      std::cerr << "optimal " << r.optimal << " of " << r.evaluated << " (" << r.fraction_optimal() << "), excluded "
                << r.excluded << "\n";
    } else if (*mask_check) {
      const FactoryConfig c = instance_or_reference(instance);
      Rng rng(seeds.front());
      const MaskAudit a = audit_masks(c, static_cast<std::size_t>(states), rng);
      json doc{{"states", a.states},           {"actions_checked", a.actions_checked}, {"admitted", a.admitted},
               {"rejected", a.rejected},       {"discrepancies", a.discrepancies},    {"examples", a.examples}};
      emit(doc.dump(2) + "\n", out);
      return a.discrepancies == 0 ? 0 : 1;
    } else if (*growth) {
      std::vector<int> caps;
      std::stringstream ss(occupancy);
      for (std::string item; std::getline(ss, item, ',');) caps.push_back(std::stoi(item));
      const auto rows = growth_report(max_tasks, caps);
      if (out.empty())
        write_growth_csv(rows, std::cout);
      else
        write_growth_csv(rows, std::filesystem::path(out));
    } else if (*generate) {
      save_instance(synthetic_instance(workstations, tasks, seeds.front()), out);
    }
  } catch (const InstanceError& e) {
    std::cerr << "invalid instance:\n";
    for (const auto& issue : e.issues()) std::cerr << "  " << issue << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
