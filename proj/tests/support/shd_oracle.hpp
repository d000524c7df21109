#pragma once

// Brute-force SHD: breadth-first search over whole graphs where one move
// adds, deletes or reverses a single edge. Graphs hold at most one
// direction per pair, encoded base 3 per pair (0 none, 1 i->j, 2 j->i).

#include <cstdint>
#include <queue>
#include <random>
#include <vector>

#include "cpop/graph.hpp"

namespace cpop::testing {

inline int pair_count(int D) { return D * (D - 1) / 2; }

inline std::uint32_t encode(const Adjacency& a) {
  const int D = static_cast<int>(a.rows());
  std::uint32_t code = 0, base = 1;
  for (int i = 0; i < D; ++i)
    for (int j = i + 1; j < D; ++j) {
      code += base * static_cast<std::uint32_t>(a(i, j) ? 1 : (a(j, i) ? 2 : 0));
      base *= 3;
    }
  return code;
}

inline int brute_force_shd(const Adjacency& est, const Adjacency& truth) {
  const int P = pair_count(static_cast<int>(est.rows()));
  std::uint32_t states = 1;
  for (int k = 0; k < P; ++k) states *= 3;
  std::vector<int> dist(states, -1);
  const std::uint32_t start = encode(est), goal = encode(truth);
  std::queue<std::uint32_t> todo;
  dist[start] = 0;
  todo.push(start);
  while (!todo.empty()) {
    const std::uint32_t s = todo.front();
    todo.pop();
    if (s == goal) return dist[s];
    std::uint32_t base = 1;
    for (int k = 0; k < P; ++k, base *= 3) {
      const std::uint32_t digit = (s / base) % 3;
      for (std::uint32_t d = 0; d < 3; ++d) {
        if (d == digit) continue;
        const std::uint32_t n = s - digit * base + d * base;
        if (dist[n] < 0) {
          dist[n] = dist[s] + 1;
          todo.push(n);
        }
      }
    }
  }
  return -1;
}

inline Adjacency random_graph(int D, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> state(0, 2);
  Adjacency a = Adjacency::Zero(D, D);
  for (int i = 0; i < D; ++i)
    for (int j = i + 1; j < D; ++j) {
      const int s = state(rng);
      if (s == 1) a(i, j) = 1;
      if (s == 2) a(j, i) = 1;
    }
  return a;
}

}  // namespace cpop::testing
