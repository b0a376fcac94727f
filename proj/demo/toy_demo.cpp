// Closed forms and a short stochastic run on the 3-state toy.

#include "rgtd/rgtd.hpp"

#include <cstdio>

int main() {
    using namespace rgtd;

    const EvalProblem toy = toy_3state();
    const CoreMatrices cm = assemble(toy);
    const AffineSolutionSet set = gtd2_solutions(cm);

    std::printf("FIM singular-value ratio  %.3e\n", linalg::singular_ratio(cm.m));
    std::printf("GTD2 null dimension       %ld\n", static_cast<long>(set.null_basis.cols()));
    std::printf("theta*                    (%.6f, %.6f)\n", toy.theta_star()(0), toy.theta_star()(1));

    for (double c : {0.1, 1.0, 10.0, 100.0, 1e4}) {
        const Vector th = rgtd_solution(cm, c);
        std::printf("c = %-8g theta_RGTD = (%.6f, %.6f)\n", c, th(0), th(1));
    }

    const SaddleSolution sp = saddle_point(cm, 1.0);
    RunConfig rc;
    rc.iters = 100000;
    rc.stride = 20000;
    rc.seed = 7;
    const Trajectory tr = run(toy, rc, Vector::Zero(2), sp.theta);
    std::printf("\nR-GTD, c = 1, ||theta_k - theta_RGTD||:\n");
    for (std::size_t i = 0; i < tr.iters.size(); ++i)
        std::printf("  k = %-7lld %.6f\n", static_cast<long long>(tr.iters[i]), tr.errors[i]);
    return 0;
}
