#include "qmfg/market.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "qmfg/particles.hpp"

namespace qmfg {

double hamiltonian(double r, double bdrift, double sigma, double sigma_o,
                   const std::function<double(double)>& gamma_fn, const AdjointVector& adj,
                   const LevySpec& levy) {
    for (double v : {r, bdrift, sigma, sigma_o, adj.p, adj.q, adj.q_o})
        if (!std::isfinite(v)) throw std::invalid_argument("hamiltonian: non-finite input");
    double jump = 0.0;
    if (levy.intensity > 0.0) {
        jump = levy.intensity *
               levy.mean_of([&](double th) { return gamma_fn(th) * adj.rbar(th); });
        if (!std::isfinite(jump))
            throw std::runtime_error("hamiltonian: jump quadrature is non-finite");
    }
    return r + bdrift * adj.p + sigma * adj.q + sigma_o * adj.q_o + jump;
}

ClearingResult clearing_price(const AuctionRound& round) {
    const auto n = std::int64_t(round.bids.size());
    if (n == 0) throw std::invalid_argument("clearing_price: no bids");
    if (round.nbar < 1 || round.nbar > n)
        throw std::invalid_argument("clearing_price: need 1 <= nbar <= n");
    for (double b : round.bids)
        if (!(b > 0.0)) throw std::invalid_argument("clearing_price: bids must be positive");

    Eigen::ArrayXd log_bids(n);
    for (std::int64_t i = 0; i < n; ++i) log_bids(i) = std::log(round.bids[std::size_t(i)]);

    // The clearing rank is nbar itself; this equals the empirical quantile at
    // f = nbar/n and stays defined in the everyone-clears case nbar = n.
    std::vector<double> scratch(log_bids.data(), log_bids.data() + n);
    std::nth_element(scratch.begin(), scratch.begin() + (round.nbar - 1), scratch.end());
    ClearingResult res;
    res.log_price = scratch[std::size_t(round.nbar - 1)];

    // nbar lowest bids win; ties at the price go to the lowest index.
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::int64_t i, std::int64_t j) {
        return round.bids[std::size_t(i)] < round.bids[std::size_t(j)];
    });
    res.winners.assign(order.begin(), order.begin() + round.nbar);
    std::sort(res.winners.begin(), res.winners.end());
    return res;
}

double operator_cost(double quantile_T, double demand, double supply) {
    return quantile_T * std::max(demand - supply, 0.0);
}

ControlPolicy quantile_tracking_policy() {
    ControlPolicy p;
    p.name = "quantile_tracking";
    p.eval = [](double, double, double q) { return q; };
    return p;
}

}  // namespace qmfg
