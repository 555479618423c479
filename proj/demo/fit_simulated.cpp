// Simulate a small eQTL-style dataset, tune (lambda, rho) by BIC and compare
// the recovered gene network against the truth.
#include <iostream>

#include <cggm/metrics.hpp>
#include <cggm/model_selection.hpp>
#include <cggm/sim_bench.hpp>

int main()
{
    cggm::SimConfig cfg;
    cfg.p = 20;
    cfg.q = 8;
    cfg.n = 200;
    cfg.seed = 3;
    const auto model = cggm::make_model(cfg);
    const auto data = cggm::gen_dataset(model, cfg.n, cggm::mix_seed(cfg.seed, 2));
    const auto stats = cggm::sufficient_stats(data, true);

    const auto grids = cggm::default_grids(stats, 8, 8);
    const auto res = cggm::grid_search(stats, grids.lambda, grids.rho, false);
    const auto& best = res.table[res.best_index];
    std::cout << "selected lambda=" << best.lambda << " rho=" << best.rho << " bic=" << best.bic << "\n";

    const auto r = cggm::evaluate(model.theta_true, res.best.theta);
    std::cout << "loss=" << r.loss << " frobenius=" << r.norm_frobenius << " sen=" << r.sen << " spe=" << r.spe
              << " mcc=" << r.mcc << "\n";
    std::cout << "gene-gene edges: " << cggm::count_offdiag_nonzero(res.best.theta) / 2
              << ", gene-marker links: " << cggm::count_nonzero(res.best.gamma) << "\n";
}
