// Fits a small contaminated dataset in every mode and prints the results.

#include <iostream>

#include "lts/datagen.hpp"
#include "lts/solver.hpp"

int main() {
  lts::GenSpec spec;
  spec.n = 14;
  spec.d = 3;
  spec.n_outliers = 3;
  spec.contamination = lts::Contamination::HighLeverage;
  spec.seed = 2024;
  const lts::Generated g = lts::generate(spec);

  for (lts::Mode mode : {lts::Mode::SBB, lts::Mode::BBA, lts::Mode::Brute}) {
    lts::SolverConfig cfg;
    cfg.mode = mode;
    const lts::SolveReport r = lts::solve(g.data, cfg);
    std::cout << lts::to_string(mode) << ": objective " << r.objective << ", nodes " << r.stats.nodes_visited
              << ", beta " << r.beta.transpose() << '\n';
  }
  std::cout << "outliers:";
  for (lts::Index k : g.truth.outliers) std::cout << ' ' << k + 1;
  std::cout << '\n';
}
