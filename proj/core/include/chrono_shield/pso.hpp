#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace chrono_shield {

struct PsoConfig {
  int swarm_size = 50;
  // Counts the initial evaluation, so iterations == 1 only scores the seeds.
  int iterations = 100;
  double inertia = 0.73;
  double cognitive = 1.49;
  double social = 1.49;
  // Per-coordinate speed limit; <= 0 disables it.
  double max_velocity = 0.25;
  std::uint64_t seed = 1;
  // Fitness evaluations per iteration are spread over this many threads.
  int workers = 1;
};

struct Particle {
  std::vector<double> position;
  std::vector<double> velocity;
  std::vector<double> best_position;
  double best_fitness = 0.0;
};

struct PsoResult {
  std::vector<double> best_position;
  double best_fitness = 0.0;
  std::vector<double> trace;  // global best after each iteration, non-increasing
  int iterations_used = 0;
  std::size_t evaluations = 0;
};

using Objective = std::function<double(std::span<const double>)>;
// Consulted after every iteration with the current global best; returning
// true ends the run early.
using StopPredicate = std::function<bool(std::span<const double> best_position, double best_fitness)>;

// Global-best PSO over [0,1]^dimensions:
//   v <- w v + c1 r1 (pbest - x) + c2 r2 (gbest - x);  x <- clamp(x + v, 0, 1).
// r1/r2 are drawn serially before each parallel evaluation round, so results
// do not depend on the worker count. Throws InvalidConfig.
PsoResult pso_minimize(const Objective& objective, int dimensions, const PsoConfig& config,
                       const StopPredicate& should_stop = {});

}  // namespace chrono_shield
