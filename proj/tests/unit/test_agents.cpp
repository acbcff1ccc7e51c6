#include "doctest.h"

#include <cmath>
#include <algorithm>
#include <random>
#include <set>

#include "galb/agents.hpp"

using namespace galb;

namespace {

Experience transition(std::vector<double> obs, std::size_t action, double reward, bool done,
                      std::vector<double> next_obs, ActionMask next_mask) {
  Experience e;
  e.mask = ActionMask(next_mask.size(), 1);
  e.obs = std::move(obs);
  e.action = action;
  e.reward = reward;
  e.done = done;
  e.next_obs = std::move(next_obs);
  e.next_mask = std::move(next_mask);
  return e;
}

ActionMask random_mask(Rng& rng, std::size_t n) {
  ActionMask m(n, 0);
  m[0] = 1;  // null is always admitted
  for (std::size_t k = 1; k < n; ++k) m[k] = std::bernoulli_distribution(0.3)(rng) ? 1 : 0;
  return m;
}

}  // namespace

TEST_CASE("masked argmax and max") {
  const std::vector<double> q = {2, 5, 1};
  CHECK(masked_argmax(q, ActionMask{1, 0, 1}) == 0);
  CHECK(masked_argmax(q, ActionMask{1, 1, 1}) == 1);
  CHECK(masked_argmax(std::vector<double>{3, 3, 3}, ActionMask{0, 1, 1}) == 1);
  CHECK(masked_max(q, ActionMask{0, 0, 1}) == 1.0);
}

TEST_CASE("uniform exploration covers exactly the admitted actions") {
  Rng rng(1);
  const std::vector<double> q = {0, 9, 0, 0};
  const ActionMask mask = {1, 0, 1, 0};
  int zero = 0;
  const int n = 20000;
  for (int k = 0; k < n; ++k) {
    const std::size_t a = masked_epsilon_greedy(q, mask, 1.0, rng);
    REQUIRE(mask[a] == 1);
    zero += a == 0;
  }
  CHECK(std::abs(static_cast<double>(zero) / n - 0.5) < 0.02);
  for (int k = 0; k < 100; ++k) CHECK(masked_epsilon_greedy(q, mask, 0.0, rng) == 0);
}

TEST_CASE("masked softmax") {
  const auto p = masked_softmax(std::vector<double>{std::log(2.0), 0.0, 0.0, 50.0}, ActionMask{1, 1, 1, 0});
  CHECK(p[0] == doctest::Approx(0.5));
  CHECK(p[1] == doctest::Approx(0.25));
  CHECK(p[2] == doctest::Approx(0.25));
  CHECK(p[3] == 0.0);
  // Large logits do not overflow.
  const auto big = masked_softmax(std::vector<double>{1000.0, 999.0}, ActionMask{1, 1});
  CHECK(big[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));

  Rng rng(4);
  for (int k = 0; k < 1000; ++k) CHECK(sample_categorical(p, rng) != 3);
}

TEST_CASE("no agent ever selects a masked action") {
  Rng rng(7);
  DqnConfig dqn_cfg;
  dqn_cfg.hidden = 16;
  PpoConfig ppo_cfg;
  ppo_cfg.hidden = 16;
  DqnAgent dqn(6, 40, dqn_cfg, 3);
  PpoAgent ppo(6, 40, ppo_cfg, 3);
  std::vector<double> obs(6);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 100000; ++trial) {
    for (double& v : obs) v = u(rng);
    const ActionMask m = random_mask(rng, 40);
    Agent& agent = trial % 2 ? static_cast<Agent&>(dqn) : static_cast<Agent&>(ppo);
    if (trial % 4 < 2) dqn.begin_episode(trial % 1000, 1000);
    REQUIRE(m[agent.act(obs, m, rng)] == 1);
    if (trial % 10 == 0) {
      REQUIRE(m[agent.act_greedy(obs, m)] == 1);
      REQUIRE(m[agent.act_fictitious(obs, m, rng)] == 1);
    }
  }
}

TEST_CASE("epsilon schedule") {
  const EpsilonSchedule s;
  CHECK(s.at(0, 100) == 1.0);
  CHECK(s.at(30, 100) == doctest::Approx(1.0 - 0.95 * 0.5));
  CHECK(s.at(60, 100) == doctest::Approx(0.05));
  CHECK(s.at(99, 100) == doctest::Approx(0.05));
}

TEST_CASE("generalized advantage estimation") {
  SUBCASE("single terminal step") {
    const std::vector<double> r = {1.0}, v = {0.4};
    const std::vector<std::uint8_t> d = {1};
    const auto g = compute_gae(r, v, d, 123.0, 0.99, 0.95);
    CHECK(g.advantages[0] == doctest::Approx(0.6));
    CHECK(g.returns[0] == doctest::Approx(1.0));
  }
  SUBCASE("two steps with a bootstrap") {
    const std::vector<double> r = {0.0, 1.0}, v = {0.5, 0.2};
    const std::vector<std::uint8_t> d = {0, 0};
    const double gamma = 0.9, lambda = 0.8, last = 0.3;
    const auto g = compute_gae(r, v, d, last, gamma, lambda);
    const double d1 = 1.0 + gamma * last - 0.2;
    const double d0 = 0.0 + gamma * 0.2 - 0.5;
    CHECK(g.advantages[1] == doctest::Approx(d1));
    CHECK(g.advantages[0] == doctest::Approx(d0 + gamma * lambda * d1));
    CHECK(g.returns[0] == doctest::Approx(g.advantages[0] + 0.5));
  }
  SUBCASE("episode boundary cuts the trace") {
    const std::vector<double> r = {1.0, 5.0}, v = {0.0, 0.0};
    const std::vector<std::uint8_t> d = {1, 0};
    const auto g = compute_gae(r, v, d, 0.0, 0.99, 0.95);
    CHECK(g.advantages[0] == doctest::Approx(1.0));
  }
}

TEST_CASE("clipped surrogate") {
  CHECK(clipped_surrogate(1.5, 2.0, 0.2) == doctest::Approx(1.2 * 2.0));
  CHECK(clipped_surrogate(0.5, 2.0, 0.2) == doctest::Approx(0.5 * 2.0));
  CHECK(clipped_surrogate(0.5, -2.0, 0.2) == doctest::Approx(0.8 * -2.0));
  CHECK(clipped_surrogate(1.5, -2.0, 0.2) == doctest::Approx(1.5 * -2.0));
  CHECK(clipped_surrogate(1.1, 3.0, 0.2) == doctest::Approx(3.3));
}

TEST_CASE("replay buffer") {
  ReplayBuffer buffer(3);
  for (int k = 0; k < 5; ++k) buffer.push(transition({double(k)}, 0, k, false, {0}, {1}));
  CHECK(buffer.size() == 3);
  std::multiset<double> kept;
  for (std::size_t k = 0; k < 3; ++k) kept.insert(buffer[k].reward);
  CHECK(kept == std::multiset<double>{2, 3, 4});
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    auto idx = buffer.sample_indices(3, rng);
    std::sort(idx.begin(), idx.end());
    CHECK(idx == std::vector<std::size_t>{0, 1, 2});
  }
}

TEST_CASE("DQN targets and a toy regression") {
  DqnConfig cfg;
  cfg.hidden = 8;
  cfg.learning_rate = 1e-2;
  cfg.gamma = 0.5;
  cfg.grad_clip = 10.0;
  cfg.target_sync = 1000000;
  DqnAgent agent(2, 3, cfg, 11);
  agent.record(transition({1, 0}, 1, 0.7, true, {0, 1}, {1, 1, 1}));
  agent.record(transition({0, 1}, 2, 0.1, false, {1, 1}, {1, 0, 0}));
  const std::vector<std::size_t> both = {0, 1};
  const auto y = agent.td_targets(both);
  CHECK(y[0] == 0.7);
  const auto qn = agent.target().forward(std::vector<double>{1, 1});
  CHECK(y[1] == doctest::Approx(0.1 + 0.5 * qn[0]));

  // With a frozen target the TD error on fixed transitions shrinks.
  const double first = agent.learn_on(both);
  double last = first;
  for (int k = 0; k < 300; ++k) last = agent.learn_on(both);
  CHECK(last < 0.1 * first);

  agent.soft_update();
  DqnConfig half = cfg;
  half.tau = 0.5;
  DqnAgent mixed(2, 3, half, 11);
  const std::vector<double> before(mixed.target().params().begin(), mixed.target().params().end());
  for (double& p : mixed.online().params()) p += 1.0;
  mixed.soft_update();
  CHECK(mixed.target().params()[0] == doctest::Approx(before[0] + 0.5));
}

TEST_CASE("PPO log probabilities and learning") {
  PpoConfig cfg;
  cfg.hidden = 8;
  PpoAgent agent(3, 6, cfg, 5);
  for (double& p : agent.actor().params()) p = 0.0;
  const std::vector<double> obs = {0.2, -0.1, 0.4};
  const ActionMask mask = {1, 0, 1, 1, 0, 1};
  // Uniform logits over four admitted rows.
  CHECK(agent.log_prob(obs, 3, mask) == doctest::Approx(std::log(0.25)));
  CHECK_THROWS_AS(agent.log_prob(obs, 1, mask), std::invalid_argument);
  const auto p = agent.policy(obs, mask);
  CHECK(p[4] == 0.0);

  SUBCASE("zero learning rate leaves the networks unchanged") {
    PpoConfig frozen = cfg;
    frozen.learning_rate = 0.0;
    PpoAgent still(3, 6, frozen, 5);
    const std::vector<double> a0(still.actor().params().begin(), still.actor().params().end());
    const std::vector<double> c0(still.critic().params().begin(), still.critic().params().end());
    Rng rng(1);
    for (int k = 0; k < 20; ++k) {
      Experience e;
      e.obs = obs;
      e.mask = mask;
      e.action = still.act(obs, mask, rng);
      e.log_prob = still.log_prob(obs, e.action, mask);
      e.value = still.value(obs);
      e.reward = k == 19 ? 1.0 : 0.0;
      e.done = k == 19;
      e.next_obs = obs;
      e.next_mask = mask;
      still.record(e);
      still.maybe_learn();
    }
    CHECK(still.rollout().empty());
    CHECK(std::equal(a0.begin(), a0.end(), still.actor().params().begin()));
    CHECK(std::equal(c0.begin(), c0.end(), still.critic().params().begin()));
  }

  SUBCASE("annealed learning rate reaches zero at the end of the budget") {
    PpoConfig annealed = cfg;
    annealed.anneal_lr = true;
    for (int episode : {0, 10}) {
      PpoAgent agent(3, 6, annealed, 5);
      agent.begin_episode(episode, 10);
      const std::vector<double> a0(agent.actor().params().begin(), agent.actor().params().end());
      Rng rng(1);
      for (int k = 0; k < 20; ++k) {
        Experience e;
        e.obs = obs;
        e.mask = mask;
        e.action = agent.act(obs, mask, rng);
        e.log_prob = agent.log_prob(obs, e.action, mask);
        e.value = agent.value(obs);
        e.reward = k == 19 ? 1.0 : 0.0;
        e.done = k == 19;
        e.next_obs = obs;
        e.next_mask = mask;
        agent.record(e);
        agent.maybe_learn();
      }
      CHECK(std::equal(a0.begin(), a0.end(), agent.actor().params().begin()) == (episode == 10));
    }
    CHECK(PpoConfig::from_json(annealed.to_json()).anneal_lr);
  }

  SUBCASE("a rewarded action becomes more likely") {
    PpoConfig fast = cfg;
    fast.learning_rate = 1e-2;
    PpoAgent learner(3, 6, fast, 5);
    Rng rng(2);
    const double before = learner.policy(obs, mask)[5];
    for (int round = 0; round < 30; ++round) {
      for (int k = 0; k < 20; ++k) {
        Experience e;
        e.obs = obs;
        e.mask = mask;
        e.action = learner.act(obs, mask, rng);
        e.log_prob = learner.log_prob(obs, e.action, mask);
        e.value = learner.value(obs);
        e.reward = e.action == 5 ? 1.0 : 0.0;
        e.done = true;
        e.next_obs = obs;
        e.next_mask = mask;
        learner.record(e);
        learner.maybe_learn();
      }
    }
    CHECK(learner.policy(obs, mask)[5] > before + 0.2);
    CHECK(learner.actor().all_finite());
  }
}

TEST_CASE("agent factory and checkpoints") {
  const auto dqn = make_agent("dqn", 4, 5, {{"hidden", 8}}, 1);
  const auto ppo = make_agent("ppo", 4, 5, {{"hidden", 8}}, 1);
  CHECK(dqn->algorithm() == "dqn");
  CHECK(ppo->algorithm() == "ppo");
  CHECK_THROWS(make_agent("sarsa", 4, 5, {}, 1));

  const auto copy = make_agent("ppo", 4, 5, {{"hidden", 8}}, 99);
  copy->restore(ppo->checkpoint());
  const std::vector<double> obs = {1, 2, 3, 4};
  const ActionMask mask(5, 1);
  CHECK(copy->log_prob(obs, 2, mask) == ppo->log_prob(obs, 2, mask));
  CHECK_THROWS(dqn->restore(ppo->checkpoint()));
  const auto dqn_copy = make_agent("dqn", 4, 5, {{"hidden", 8}}, 42);
  dqn_copy->restore(dqn->checkpoint());
  CHECK(dqn_copy->act_greedy(obs, mask) == dqn->act_greedy(obs, mask));

  const DqnConfig d = DqnConfig::from_json(DqnConfig{}.to_json());
  CHECK(d.hidden == 534);
  CHECK(d.tau == 0.8);
  const PpoConfig p = PpoConfig::from_json(PpoConfig{}.to_json());
  CHECK(p.clip == 0.2);
  CHECK(p.minibatch == 5);
}
