#include "galb/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

#include "galb/marl.hpp"
#include "galb/network.hpp"
#include "galb/solver.hpp"

namespace galb {

using nlohmann::json;

namespace {

double mean_or_nan(double sum, int count) {
  return count > 0 ? sum / count : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

// ---- centralized controller ---------------------------------------------

CentralController::CentralController(const FactoryConfig& config, const std::string& algorithm,
                                     const json& agent_config, std::uint64_t seed, Masking masking, double penalty,
                                     const RewardConfig& reward)
    : config_(config),
      masking_(masking),
      penalty_(penalty),
      reward_(reward),
      space_(config),
      agent_(make_agent(algorithm, config.state_dim(), space_.size(), agent_config, seed)),
      rng_(seed) {}

ActionMask CentralController::mask(const FactoryState& s) const {
  if (masking_ == Masking::off) return ActionMask(space_.size(), 1);
  return centralized_mask(s, space_, config_);
}

EpisodeLog CentralController::train_from(const FactoryState& start, int episode, int total_episodes) {
  EpisodeLog log;
  log.episode = episode;
  log.start_clock = start.clock;
  double loss_sum = 0.0, value_sum = 0.0;
  int learn_count = 0;
  agent_->begin_episode(episode, total_episodes);

  FactoryState s = start;
  std::vector<double> obs = flatten_state(s, config_);
  ActionMask m = mask(s);
  while (!episode_over(s, config_)) {
    const std::size_t a = agent_->act(obs, m, rng_);
    const double value = agent_->value(obs);
    const double logp = agent_->log_prob(obs, a, m);
    TaskAssignment joint = space_.decode(a);
    double shaping = 0.0;
    if (!action_feasible(s, joint, config_)) {
      if (masking_ == Masking::on) ++totals_.infeasible_executed;
      shaping = penalty_;
      joint = null_assignment(config_);
      ++log.penalties;
    }
    const StepOutcome outcome = step_in_place(s, joint, config_, reward_);
    const double reward = outcome.reward + shaping;
    log.cumulative_reward += reward;
    ++log.steps;
    std::vector<double> next_obs = flatten_state(s, config_);
    ActionMask next_mask = mask(s);
    Experience e;
    e.obs = std::move(obs);
    e.action = a;
    e.log_prob = logp;
    e.value = value;
    e.reward = reward;
    e.done = episode_over(s, config_);
    e.mask = std::move(m);
    e.next_obs = next_obs;
    e.next_mask = next_mask;
    agent_->record(std::move(e));
    if (auto stats = agent_->maybe_learn()) {
      loss_sum += stats->loss;
      value_sum += stats->value_loss;
      ++learn_count;
    }
    obs = std::move(next_obs);
    m = std::move(next_mask);
  }
  log.k_end = s.clock;
  log.completed = s.done;
  log.loss = {mean_or_nan(loss_sum, learn_count)};
  log.value_loss = {mean_or_nan(value_sum, learn_count)};
  log.exploration = {agent_->exploration()};
  totals_.steps += log.steps;
  totals_.penalties += log.penalties;
  return log;
}

int CentralController::greedy_rollout(const FactoryState& start) {
  FactoryState s = start;
  while (!episode_over(s, config_)) {
    TaskAssignment joint = space_.decode(agent_->act_greedy(flatten_state(s, config_), mask(s)));
    if (!action_feasible(s, joint, config_)) joint = null_assignment(config_);
    step_in_place(s, joint, config_, reward_);
  }
  return s.done ? s.clock : -1;
}

json CentralController::checkpoint() const {
  return json{{"mode", "central"}, {"algorithm", agent_->algorithm()}, {"agent", agent_->checkpoint()}};
}

void CentralController::restore(const json& doc) {
  if (doc.at("mode").get<std::string>() != "central") throw std::invalid_argument("checkpoint is not centralized");
  agent_->restore(doc.at("agent"));
}

// ---- construction ----------------------------------------------------------

std::size_t default_hidden_width(const std::string& algorithm, const std::string& mode) {
  const bool multi = mode == "multi";
  if (algorithm == "dqn") return multi ? 178 : 534;
  if (algorithm == "ppo") return multi ? 86 : 258;
  throw std::invalid_argument("unknown algorithm '" + algorithm + "' (expected dqn or ppo)");
}

json default_agent_config(const std::string& algorithm, const std::string& mode) {
  json doc = algorithm == "dqn" ? DqnConfig{}.to_json() : PpoConfig{}.to_json();
  doc["hidden"] = default_hidden_width(algorithm, mode);
  return doc;
}

std::unique_ptr<Controller> make_controller(const FactoryConfig& config, const std::string& algorithm,
                                            const std::string& mode, Masking masking, std::uint64_t seed,
                                            const json& agent_config, double penalty) {
  json merged = default_agent_config(algorithm, mode);
  if (agent_config.is_object()) merged.merge_patch(agent_config);
  if (mode == "central") return std::make_unique<CentralController>(config, algorithm, merged, seed, masking, penalty);
  if (mode == "multi") return std::make_unique<MultiAgentController>(config, algorithm, merged, seed, masking, penalty);
  throw std::invalid_argument("unknown mode '" + mode + "' (expected central or multi)");
}

std::unique_ptr<Controller> controller_from_checkpoint(const FactoryConfig& config, const json& doc) {
  const std::string mode = doc.at("mode").get<std::string>();
  const std::string algorithm = doc.at("algorithm").get<std::string>();
  auto controller = make_controller(config, algorithm, mode, Masking::on, 0, json::object());
  controller->restore(doc);
  return controller;
}

// ---- manifests and training runs ------------------------------------------

json RunManifest::to_json() const {
  return json{{"instance", instance.string()},
              {"algorithm", algorithm},
              {"mode", mode},
              {"mask", masking == Masking::on ? "on" : "off"},
              {"seeds", seeds},
              {"episodes", episodes},
              {"out_dir", out_dir.string()},
              {"window", window},
              {"stop_on_convergence", stop_on_convergence},
              {"penalty", penalty},
              {"random_starts", random_starts},
              {"start_depth", start_depth},
              {"agent", agent.is_null() ? json::object() : agent}};
}

RunManifest RunManifest::from_json(const json& doc) {
  RunManifest m;
  m.instance = doc.value("instance", std::string{});
  m.algorithm = doc.value("algorithm", m.algorithm);
  m.mode = doc.value("mode", m.mode);
  const std::string mask = doc.value("mask", std::string("on"));
  if (mask != "on" && mask != "off") throw std::invalid_argument("mask must be on or off");
  m.masking = mask == "on" ? Masking::on : Masking::off;
  m.seeds = doc.value("seeds", m.seeds);
  m.episodes = doc.value("episodes", m.episodes);
  m.out_dir = doc.value("out_dir", m.out_dir.string());
  m.window = doc.value("window", m.window);
  m.stop_on_convergence = doc.value("stop_on_convergence", m.stop_on_convergence);
  m.penalty = doc.value("penalty", m.penalty);
  m.random_starts = doc.value("random_starts", m.random_starts);
  m.start_depth = doc.value("start_depth", m.start_depth);
  m.agent = doc.value("agent", json::object());
  return m;
}

std::string run_tag(const RunManifest& m) {
  return m.algorithm + "_" + m.mode + "_mask" + (m.masking == Masking::on ? "on" : "off");
}

bool ConvergenceTracker::push(int k_end) {
  if (static_cast<int>(recent_.size()) == window_) recent_.erase(recent_.begin());
  recent_.push_back(k_end);
  ++seen_;
  const auto med = median();
  const bool hit = med && *med == k_opt_;
  if (hit && !converged_at_) converged_at_ = seen_ - 1;
  return hit;
}

std::optional<double> ConvergenceTracker::median() const {
  if (static_cast<int>(recent_.size()) < window_ || recent_.empty()) return std::nullopt;
  std::vector<int> sorted = recent_;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  return n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

namespace {

void write_header(std::ostream& out, std::size_t learners) {
  out << "episode,start_clock,k_end,completed,cumulative_reward";
  for (std::size_t i = 0; i < learners; ++i) out << ",loss_" << i;
  for (std::size_t i = 0; i < learners; ++i) out << ",value_loss_" << i;
  for (std::size_t i = 0; i < learners; ++i) out << ",exploration_" << i;
  out << ",steps,coordination_calls,penalties,wall_clock_s,k_opt,window_median\n";
}

void write_row(std::ostream& out, const EpisodeLog& log, double seconds, int k_opt, std::optional<double> median) {
  out << log.episode << ',' << log.start_clock << ',' << log.k_end << ',' << (log.completed ? 1 : 0) << ',' << log.cumulative_reward;
  for (double v : log.loss) out << ',' << v;
  for (double v : log.value_loss) out << ',' << v;
  for (double v : log.exploration) out << ',' << v;
  out << ',' << log.steps << ',' << log.coordination_calls << ',' << log.penalties << ',' << seconds << ','
      << k_opt << ',';
  if (median) out << *median;
  out << '\n';
}

}  // namespace

TrainingReport run_training(const RunManifest& manifest, const FactoryConfig& config, int k_opt) {
  if (manifest.episodes < 0) throw std::invalid_argument("episode budget must be nonnegative");
  if (!(manifest.random_starts >= 0.0 && manifest.random_starts <= 1.0))
    throw std::invalid_argument("random_starts must lie in [0, 1]");
  std::filesystem::create_directories(manifest.out_dir);
  write_json(manifest.to_json(), manifest.out_dir / (run_tag(manifest) + "_manifest.json"));
  TrainingReport report;
  report.k_opt = k_opt;
  const FactoryState start = reset(config);

  for (std::uint64_t seed : manifest.seeds) {
    auto controller = make_controller(config, manifest.algorithm, manifest.mode, manifest.masking, seed,
                                      manifest.agent, manifest.penalty);
    SeedResult result;
    result.seed = seed;
    const std::string stem = run_tag(manifest) + "_seed" + std::to_string(seed);
    result.metrics_csv = manifest.out_dir / (stem + ".csv");
    std::ofstream csv(result.metrics_csv);
    if (!csv) throw std::runtime_error("cannot write " + result.metrics_csv.string());
    csv.precision(10);
    write_header(csv, controller->num_learners());

    ConvergenceTracker tracker(manifest.window, k_opt);
    const auto t0 = std::chrono::steady_clock::now();
    int best_greedy = std::numeric_limits<int>::max();
    result.best_k_end = std::numeric_limits<int>::max();
    Rng start_rng(seed ^ 0x2545f4914f6cdd1dULL);
    std::bernoulli_distribution sampled_start(manifest.random_starts);
    for (int ep = 0; ep < manifest.episodes; ++ep) {
      const EpisodeLog log =
          sampled_start(start_rng)
              ? controller->train_from(sample_reachable_state(config, start_rng, manifest.start_depth), ep,
                                       manifest.episodes)
              : controller->train_episode(ep, manifest.episodes);
      // Only episodes from reset count towards convergence and the best checkpoint.
      const bool from_reset = log.start_clock == 0;
      if (from_reset && tracker.push(log.k_end) && !result.converged_at) result.converged_at = ep;
      const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      write_row(csv, log, seconds, k_opt, tracker.median());
      ++result.episodes_run;
      if (from_reset && log.completed && log.k_end <= result.best_k_end) {
        result.best_k_end = log.k_end;
        const int greedy = controller->greedy_rollout(start);
        if (greedy > 0 && greedy < best_greedy) {
          best_greedy = greedy;
          result.best_checkpoint = manifest.out_dir / (stem + "_best.json");
          write_json(controller->checkpoint(), result.best_checkpoint);
        }
      }
      if (manifest.stop_on_convergence && tracker.converged_at()) break;
    }
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.final_median = tracker.median();
    result.totals = controller->totals();
    if (result.best_k_end == std::numeric_limits<int>::max()) result.best_k_end = 0;
    if (result.episodes_run > 0) {
      result.final_checkpoint = manifest.out_dir / (stem + "_final.json");
      write_json(controller->checkpoint(), result.final_checkpoint);
    }
    report.seeds.push_back(result);
  }
  return report;
}

// ---- robustness --------------------------------------------------------------

FactoryState sample_reachable_state(const FactoryConfig& config, Rng& rng, int max_depth) {
  FactoryState s = reset(config);
  const int depth = std::uniform_int_distribution<int>(0, std::max(0, max_depth))(rng);
  const RewardConfig reward;
  for (int k = 0; k < depth && !episode_over(s, config); ++k) {
    const auto actions = feasible_assignments(s, config);
    const std::size_t pick = std::uniform_int_distribution<std::size_t>(0, actions.size() - 1)(rng);
    step_in_place(s, actions[pick], config, reward);
  }
  return s;
}

RobustnessReport robustness_on(Controller& controller, const FactoryConfig& config,
                               const std::vector<FactoryState>& states, std::uint64_t node_budget) {
  RobustnessReport report;
  SolveOptions options;
  options.node_budget = node_budget;
  for (const FactoryState& s : states) {
    RobustnessSample sample;
    sample.state = s;
    try {
      const SolveResult oracle = solve_from(s, config, options);
      sample.oracle_feasible = oracle.feasible;
      if (oracle.feasible) sample.oracle_k = oracle.k_opt;
    } catch (const SearchBudgetError&) {
      sample.oracle_budget_exhausted = true;
    }
    if (sample.oracle_feasible) {
      sample.agent_k = controller.greedy_rollout(s);
      ++report.evaluated;
      if (sample.agent_k == sample.oracle_k) ++report.optimal;
    } else {
      ++report.excluded;
    }
    report.samples.push_back(std::move(sample));
  }
  return report;
}

RobustnessReport robustness_test(Controller& controller, const FactoryConfig& config, int n_samples, Rng& rng,
                                 int max_depth, std::uint64_t node_budget) {
  std::vector<FactoryState> states;
  for (int k = 0; k < n_samples; ++k) states.push_back(sample_reachable_state(config, rng, max_depth));
  return robustness_on(controller, config, states, node_budget);
}

// ---- mask audit ---------------------------------------------------------------

MaskAudit audit_masks(const FactoryConfig& config, std::size_t n_states, Rng& rng) {
  MaskAudit audit;
  const CentralizedActionSpace space(config);
  const RewardConfig reward;
  auto note = [&audit](std::string what) {
    ++audit.discrepancies;
    if (audit.examples.size() < 10) audit.examples.push_back(std::move(what));
  };
  FactoryState s = reset(config);
  std::vector<std::size_t> admitted;
  while (audit.states < n_states) {
    if (episode_over(s, config)) s = reset(config);
    const ActionMask m = centralized_mask(s, space, config);
    admitted.clear();
    for (std::size_t z = 0; z < space.size(); ++z) {
      const TaskAssignment a = space.decode(z);
      ++audit.actions_checked;
      const std::string where = "clock " + std::to_string(s.clock) + " action " + std::to_string(z);
      if (m[z]) {
        ++audit.admitted;
        admitted.push_back(z);
        try {
          const StepResult next = transition(s, a, config, reward);
          if (!check_state_invariants(next.state, config).empty()) note(where + ": admitted action breaks an invariant");
        } catch (const std::exception& e) {
          note(where + ": admitted action failed: " + e.what());
        }
        continue;
      }
      ++audit.rejected;
      const Violation v = first_violation(s, a, config);
      if (v == Violation::none) {
        note(where + ": rejected action names no violated constraint");
        continue;
      }
      FactoryState forced = s;
      apply_assignment(forced, a, config);
      const auto seen = audit_booking(s, forced, config);
      if (std::find(seen.begin(), seen.end(), v) == seen.end())
        note(where + ": forced booking does not show " + describe(v));
    }
    ++audit.states;
    if (admitted.empty()) {
      note("clock " + std::to_string(s.clock) + ": no admitted action");
      s = reset(config);
      continue;
    }
    const std::size_t pick = admitted[std::uniform_int_distribution<std::size_t>(0, admitted.size() - 1)(rng)];
    step_in_place(s, space.decode(pick), config, reward);
  }
  return audit;
}

// ---- growth ------------------------------------------------------------------

std::vector<GrowthRow> growth_report(int max_tasks, const std::vector<int>& occupancy) {
  std::vector<GrowthRow> rows;
  for (int tasks = 1; tasks <= max_tasks; ++tasks) {
    SpaceDims dims{static_cast<int>(occupancy.size()), tasks, occupancy};
    GrowthRow row;
    row.tasks = tasks;
    row.unconstrained = count_unconstrained(dims);
    row.unique_assignment = count_unique_assignment(dims);
    row.occupancy_constrained = count_occupancy_constrained(dims);
    for (int i = 0; i < dims.workstations; ++i) row.max_agent = std::max(row.max_agent, count_agent_space(dims, i));
    rows.push_back(row);
  }
  return rows;
}

void write_growth_csv(const std::vector<GrowthRow>& rows, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_growth_csv(rows, out);
}

void write_growth_csv(const std::vector<GrowthRow>& rows, std::ostream& out) {
  out << "tasks,unconstrained,unique_assignment,occupancy_constrained,max_agent\n";
  for (const auto& r : rows)
    out << r.tasks << ',' << r.unconstrained << ',' << r.unique_assignment << ',' << r.occupancy_constrained << ','
        << r.max_agent << '\n';
}

std::optional<int> polynomial_degree(const std::vector<BigCount>& values) {
  std::vector<BigCount> diff = values;
  for (int d = 0; d < static_cast<int>(values.size()); ++d) {
    if (std::all_of(diff.begin(), diff.end(), [](const BigCount& v) { return v == 0; }))
      return d == 0 ? std::optional<int>{} : std::optional<int>{d - 1};
    if (diff.size() < 2) return std::nullopt;
    for (std::size_t k = 0; k + 1 < diff.size(); ++k) diff[k] = diff[k + 1] - diff[k];
    diff.pop_back();
  }
  return std::nullopt;
}

}  // namespace galb
