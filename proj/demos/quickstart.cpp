// Stochastic subgradient runs on three nonsmooth testbed problems at two
// budgets; prints where the iterates end up relative to the critical values.

#include <cstdio>

#include "tamesg/tamesg.hpp"

using namespace tamesg;

int main() {
  for (const char *name : {"abs", "xy-abs-square", "relu-square"}) {
    const TestProblem p = find_problem(name);
    for (std::size_t K : {1000, 100000}) {
      RunConfig c;
      c.x0 = p.default_x0;
      c.noise = NoiseModel::gaussian(0.1);
      c.K = K;
      c.seed = 7;
      c.label = p.name;
      const RunLog log = run_sgm(p.f, c);
      const auto tail = tail_statistics(log, 0.1);
      const auto &fin = log.final_record();
      std::printf("%-14s K=%-7zu f(x_K)=%-11.4g tail min residual=%-10.3g "
                  "oscillation=%-10.3g gap to critical value=%.3g\n",
                  name, K, fin.f, tail.min_residual, tail.value_oscillation,
                  p.distance_to_critical_value(fin.f));
    }
  }
}
