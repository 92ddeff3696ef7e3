#include "chrono_shield/pso.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "chrono_shield/error.hpp"
#include "chrono_shield/rng.hpp"

namespace chrono_shield {

namespace {

void evaluate_all(const Objective& objective, const std::vector<Particle>& swarm, std::vector<double>& fitness,
                  int workers) {
  const std::size_t n = swarm.size();
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fitness[i] = objective(swarm[i].position);
    return;
  }
  const std::size_t lanes = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  std::vector<std::jthread> pool;
  pool.reserve(lanes);
  for (std::size_t lane = 0; lane < lanes; ++lane) {
    pool.emplace_back([&, lane] {
      for (std::size_t i = lane; i < n; i += lanes) fitness[i] = objective(swarm[i].position);
    });
  }
}

}  // namespace

PsoResult pso_minimize(const Objective& objective, int dimensions, const PsoConfig& config,
                       const StopPredicate& should_stop) {
  if (dimensions < 1 || config.swarm_size < 1 || config.iterations < 1) {
    raise(ErrorCode::InvalidConfig, "PSO needs dimensions, swarm size and iterations >= 1");
  }
  if (!objective) raise(ErrorCode::InvalidConfig, "PSO objective is empty");

  const auto d = static_cast<std::size_t>(dimensions);
  const auto n = static_cast<std::size_t>(config.swarm_size);
  const double vmax = config.max_velocity > 0.0 ? config.max_velocity : 1.0;
  Rng rng(config.seed);

  std::vector<Particle> swarm(n);
  for (auto& p : swarm) {
    p.position.resize(d);
    p.velocity.resize(d);
    for (std::size_t k = 0; k < d; ++k) {
      p.position[k] = rng.uniform();
      p.velocity[k] = rng.uniform(-vmax, vmax);
    }
  }

  PsoResult result;
  std::vector<double> fitness(n);
  evaluate_all(objective, swarm, fitness, config.workers);
  result.evaluations += n;
  std::size_t leader = 0;
  for (std::size_t i = 0; i < n; ++i) {
    swarm[i].best_position = swarm[i].position;
    swarm[i].best_fitness = fitness[i];
    if (fitness[i] < fitness[leader]) leader = i;
  }
  result.best_position = swarm[leader].position;
  result.best_fitness = fitness[leader];
  result.trace.push_back(result.best_fitness);
  result.iterations_used = 1;

  std::vector<double> r1(n * d), r2(n * d);
  for (int it = 1; it < config.iterations; ++it) {
    if (should_stop && should_stop(result.best_position, result.best_fitness)) break;
    for (std::size_t j = 0; j < n * d; ++j) {
      r1[j] = rng.uniform();
      r2[j] = rng.uniform();
    }
    for (std::size_t i = 0; i < n; ++i) {
      Particle& p = swarm[i];
      for (std::size_t k = 0; k < d; ++k) {
        double v = config.inertia * p.velocity[k] +
                   config.cognitive * r1[i * d + k] * (p.best_position[k] - p.position[k]) +
                   config.social * r2[i * d + k] * (result.best_position[k] - p.position[k]);
        if (config.max_velocity > 0.0) v = std::clamp(v, -vmax, vmax);
        p.velocity[k] = v;
        p.position[k] = std::clamp(p.position[k] + v, 0.0, 1.0);
      }
    }
    evaluate_all(objective, swarm, fitness, config.workers);
    result.evaluations += n;
    // Serial, index-ordered bookkeeping keeps runs schedule-independent.
    for (std::size_t i = 0; i < n; ++i) {
      Particle& p = swarm[i];
      if (fitness[i] < p.best_fitness) {
        p.best_fitness = fitness[i];
        p.best_position = p.position;
      }
      if (fitness[i] < result.best_fitness) {
        result.best_fitness = fitness[i];
        result.best_position = p.position;
      }
    }
    result.trace.push_back(result.best_fitness);
    result.iterations_used = it + 1;
  }
  return result;
}

}  // namespace chrono_shield
