// Min-norm subgradient flow on three testbed functions, with the descent
// identity and chain rule checked on each trajectory.

#include <cstdio>

#include "tamesg/tamesg.hpp"

using namespace tamesg;

int main() {
  for (const char *name : {"quad", "abs", "xy-abs-square"}) {
    const TestProblem p = find_problem(name);
    const Trajectory tr = integrate_flow(p.f, p.default_x0, 1.0, 1e-4);
    const DescentReport d = check_descent_identity(p.f, tr);
    const ChainRuleReport c = check_chain_rule(p.f, tr);
    std::printf("%-14s status=%-17s nodes=%-6zu f: %.6g -> %.6g\n", name, to_string(tr.status),
                tr.size(), tr.values.front(), tr.values.back());
    std::printf("%-14s descent drop=%.6g integral=%.6g residual=%.2g\n", "", d.drop, d.integral,
                d.residual);
    std::printf("%-14s chain rule max violation=%.2g checked=%zu skipped=%zu\n", "",
                c.max_violation, c.checked, c.skipped);
  }
}
