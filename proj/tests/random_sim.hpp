#pragma once
// Random link/traffic/controller configurations for the conservation and
// determinism sweeps.

#include <algorithm>
#include <optional>
#include <vector>

#include "hcqos/netsim.hpp"

namespace testing_support {

using namespace hcqos;

struct RandomSim {
  std::vector<FlowEvent> trace;
  LinkSpec link;
  SimOptions options;
};

inline RandomSim random_sim(std::uint64_t seed) {
  Rng rng(seed);
  const auto& labels = all_class_labels();
  RandomSim r;
  const int k = static_cast<int>(rng.uniform_int(1, 4));
  std::vector<int> pick(labels.size());
  for (std::size_t i = 0; i < pick.size(); ++i) pick[i] = static_cast<int>(i);
  for (int i = 0; i < k; ++i) std::swap(pick[i], pick[rng.uniform_int(i, pick.size() - 1)]);
  std::sort(pick.begin(), pick.begin() + k);
  r.link.classes.clear();
  TrafficProfile p;
  r.link.capacity_bps = rng.uniform(1e6, 50e6);
  r.link.queue_bytes = rng.uniform_int(20000, 500000);
  r.link.epoch = rng.uniform(0.05, 0.5);
  r.link.propagation_delay = rng.uniform(0, 0.02);
  for (int i = 0; i < k; ++i) {
    r.link.classes.push_back(labels[pick[i]]);
    const double mean = rng.uniform(500, 20000);
    const double rate = rng.uniform(0.2, 1.0) * r.link.bytes_per_second() / mean;
    SizeDistribution sd = rng.uniform() < 0.5 ? SizeDistribution::exponential(mean)
                                               : SizeDistribution::lognormal(mean, 0.8);
    std::optional<OnOff> oo;
    if (rng.uniform() < 0.5) oo = OnOff{rng.uniform(0.1, 2), rng.uniform(0.1, 2)};
    p.entries.push_back({labels[pick[i]], rate, sd, oo});
  }
  r.options.epochs = rng.uniform_int(20, 120);
  r.options.seed = seed;
  r.options.check_every_event = true;
  r.trace = generate_trace(p, r.options.epochs * r.link.epoch * 1.1, seed);
  if (rng.uniform() < 0.5) {
    r.options.mode = FeedbackMode::Closed;
    ControllerSpec c;
    c.model = structural_queue_model(
        k, static_cast<double>(r.link.epoch_bytes()) / static_cast<double>(r.link.queue_bytes));
    Matrix Q = Matrix::Identity(2 * k, 2 * k);
    c.weights = CostWeights::make(Q, 0.01 * Matrix::Identity(k, k), Vector::Zero(2 * k));
    c.horizon = static_cast<int>(rng.uniform_int(1, 3));
    c.grid = 6;
    if (rng.uniform() < 0.3) c.policy = ControlPolicy::RandomExcitation;
    r.options.controller = c;
  }
  return r;
}

}  // namespace testing_support
