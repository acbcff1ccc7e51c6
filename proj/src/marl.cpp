#include "galb/marl.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace galb {

using nlohmann::json;

FictitiousEnvironment::FictitiousEnvironment(const FactoryState& state, const FactoryConfig& config,
                                             const std::vector<AgentActionSpace>& spaces)
    : config_(config), spaces_(spaces), state_(state) {
  masks_.reserve(spaces.size());
  for (std::size_t i = 0; i < spaces.size(); ++i)
    masks_.push_back(agent_mask(state_, static_cast<int>(i), spaces[i], config));
}

void FictitiousEnvironment::book(int agent, AssignmentRow row) {
  const auto index = spaces_[agent].encode(row);
  if (!index || !masks_[agent][*index]) {
    const Violation v = first_row_violation(state_, agent, row, config_);
    throw FeasibilityError(v == Violation::none ? Violation::unique_assignment : v);
  }
  if (row == 0) return;
  TaskAssignment joint = null_assignment(config_);
  for (int j = 0; j < config_.num_tasks; ++j)
    if (row >> j & 1) joint(agent, j) = 1;
  fake_transition(state_, joint, config_);
  for (std::size_t i = 0; i < spaces_.size(); ++i)
    masks_[i] = agent_mask(state_, static_cast<int>(i), spaces_[i], config_);
}

void fake_transition(FactoryState& state, const TaskAssignment& joint, const FactoryConfig& config) {
  apply_assignment(state, joint, config);
}

CoordinationResult sequential_feasibility_check(const FactoryState& state, const FactoryConfig& config,
                                                const std::vector<AgentActionSpace>& spaces,
                                                const FictitiousSelector& select, Rng& rng) {
  const int I = static_cast<int>(spaces.size());
  CoordinationResult out;
  out.actions.assign(I, 0);
  out.order.resize(I);
  std::iota(out.order.begin(), out.order.end(), 0);
  std::shuffle(out.order.begin(), out.order.end(), rng);

  FictitiousEnvironment env(state, config, spaces);
  std::vector<double> obs(config.state_dim());
  std::vector<AssignmentRow> rows(I, 0);
  for (int i : out.order) {
    flatten_state(env.state(), config, obs);
    const std::size_t a = select(i, obs, env.mask(i));
    env.book(i, spaces[i].row(a));
    out.actions[i] = a;
    rows[i] = spaces[i].row(a);
  }
  out.joint = concat_rows(rows, config.num_tasks);
  return out;
}

namespace {

std::uint64_t agent_seed(std::uint64_t seed, int agent) { return seed * 1000003ULL + 7919ULL * (agent + 1); }

double mean_or_nan(double sum, int count) {
  return count > 0 ? sum / count : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

MultiAgentController::MultiAgentController(const FactoryConfig& config, const std::string& algorithm,
                                           const json& agent_config, std::uint64_t seed, Masking masking,
                                           double penalty, const RewardConfig& reward)
    : config_(config),
      algorithm_(algorithm),
      masking_(masking),
      penalty_(penalty),
      reward_(reward),
      rng_(seed),
      eval_rng_(seed ^ 0x5bd1e995ULL) {
  config_.validate();
  for (int i = 0; i < config_.num_workstations; ++i) {
    spaces_.emplace_back(config_, i);
    agents_.push_back(make_agent(algorithm, config_.state_dim(), spaces_.back().size(), agent_config,
                                 agent_seed(seed, i)));
  }
}

std::vector<ActionMask> MultiAgentController::real_masks(const FactoryState& s) const {
  std::vector<ActionMask> masks;
  masks.reserve(spaces_.size());
  for (std::size_t i = 0; i < spaces_.size(); ++i) {
    if (masking_ == Masking::on)
      masks.push_back(agent_mask(s, static_cast<int>(i), spaces_[i], config_));
    else
      masks.emplace_back(spaces_[i].size(), 1);
  }
  return masks;
}

EpisodeLog MultiAgentController::train_from(const FactoryState& start, int episode, int total_episodes) {
  const int I = config_.num_workstations;
  EpisodeLog log;
  log.episode = episode;
  log.start_clock = start.clock;
  std::vector<double> loss_sum(I, 0.0), value_sum(I, 0.0);
  std::vector<int> learn_count(I, 0);
  for (auto& a : agents_) a->begin_episode(episode, total_episodes);

  FactoryState s = start;
  std::vector<double> obs = flatten_state(s, config_);
  std::vector<ActionMask> masks = real_masks(s);
  std::vector<AssignmentRow> rows(I);
  std::vector<std::size_t> chosen(I);
  std::vector<double> values(I);

  while (!episode_over(s, config_)) {
    for (int i = 0; i < I; ++i) {
      chosen[i] = agents_[i]->act(obs, masks[i], rng_);
      values[i] = agents_[i]->value(obs);
      rows[i] = spaces_[i].row(chosen[i]);
    }
    TaskAssignment joint = concat_rows(rows, config_.num_tasks);
    double shaping = 0.0;
    if (!action_feasible(s, joint, config_)) {
      if (masking_ == Masking::on) {
        const auto select = [this](int i, std::span<const double> o, const ActionMask& m) {
          return agents_[i]->act_fictitious(o, m, rng_);
        };
        CoordinationResult sfc = sequential_feasibility_check(s, config_, spaces_, select, rng_);
        chosen = sfc.actions;
        joint = std::move(sfc.joint);
        ++log.coordination_calls;
      } else {
        shaping = penalty_;
        joint = null_assignment(config_);
        ++log.penalties;
      }
    }
    if (!action_feasible(s, joint, config_)) {
      ++totals_.infeasible_executed;
      joint = null_assignment(config_);
    }
    const StepOutcome outcome = step_in_place(s, joint, config_, reward_);
    const double reward = outcome.reward + shaping;
    log.cumulative_reward += reward;
    ++log.steps;
    const bool over = episode_over(s, config_);
    std::vector<double> next_obs = flatten_state(s, config_);
    std::vector<ActionMask> next_masks = real_masks(s);
    for (int i = 0; i < I; ++i) {
      Experience e;
      e.obs = obs;
      e.action = chosen[i];
      e.log_prob = agents_[i]->log_prob(obs, chosen[i], masks[i]);
      e.value = values[i];
      e.reward = reward;
      e.done = over;
      e.mask = masks[i];
      e.next_obs = next_obs;
      e.next_mask = next_masks[i];
      agents_[i]->record(std::move(e));
      if (auto stats = agents_[i]->maybe_learn()) {
        loss_sum[i] += stats->loss;
        value_sum[i] += stats->value_loss;
        ++learn_count[i];
      }
    }
    obs = std::move(next_obs);
    masks = std::move(next_masks);
  }

  log.k_end = s.clock;
  log.completed = s.done;
  for (int i = 0; i < I; ++i) {
    log.loss.push_back(mean_or_nan(loss_sum[i], learn_count[i]));
    log.value_loss.push_back(mean_or_nan(value_sum[i], learn_count[i]));
    log.exploration.push_back(agents_[i]->exploration());
  }
  totals_.steps += log.steps;
  totals_.coordination_calls += log.coordination_calls;
  totals_.penalties += log.penalties;
  return log;
}

int MultiAgentController::greedy_rollout(const FactoryState& start) {
  const int I = config_.num_workstations;
  FactoryState s = start;
  std::vector<AssignmentRow> rows(I);
  while (!episode_over(s, config_)) {
    const std::vector<double> obs = flatten_state(s, config_);
    const std::vector<ActionMask> masks = real_masks(s);
    for (int i = 0; i < I; ++i) rows[i] = spaces_[i].row(agents_[i]->act_greedy(obs, masks[i]));
    TaskAssignment joint = concat_rows(rows, config_.num_tasks);
    if (!action_feasible(s, joint, config_)) {
      if (masking_ == Masking::on) {
        const auto select = [this](int i, std::span<const double> o, const ActionMask& m) {
          return agents_[i]->act_greedy(o, m);
        };
        joint = sequential_feasibility_check(s, config_, spaces_, select, eval_rng_).joint;
      } else {
        joint = null_assignment(config_);
      }
    }
    step_in_place(s, joint, config_, reward_);
  }
  return s.done ? s.clock : -1;
}

json MultiAgentController::checkpoint() const {
  json agents = json::array();
  for (const auto& a : agents_) agents.push_back(a->checkpoint());
  return json{{"mode", "multi"}, {"algorithm", algorithm_}, {"agents", agents}};
}

void MultiAgentController::restore(const json& doc) {
  if (doc.at("mode").get<std::string>() != "multi") throw std::invalid_argument("checkpoint is not multi-agent");
  const json& agents = doc.at("agents");
  if (agents.size() != agents_.size()) throw std::invalid_argument("checkpoint agent count does not match instance");
  for (std::size_t i = 0; i < agents_.size(); ++i) agents_[i]->restore(agents[i]);
}

}  // namespace galb
