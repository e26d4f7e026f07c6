#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <vector>

#include "qmfg/model.hpp"

namespace qmfg {

/// First-order adjoint values paired with the drift, idiosyncratic diffusion,
/// common diffusion and jump coefficients. Caller-supplied (the backward
/// equation is not solved here).
struct AdjointVector {
    double p = 0.0;
    double q = 0.0;
    double q_o = 0.0;
    std::function<double(double)> rbar = [](double) { return 0.0; };
};

/// One multi-winner auction round: positive bids, number of winners, and the
/// operator-side quantities kept as round metadata.
struct AuctionRound {
    std::vector<double> bids;
    std::int64_t nbar = 1;
    double unit_quantity = 0.0;
    double demand = 0.0;
    double supply_operator = 0.0;
};

/// Pontryagin function r + b p + sigma q + sigma_o q_o + Int gamma rbar mu(d theta).
double hamiltonian(double r, double bdrift, double sigma, double sigma_o,
                   const std::function<double(double)>& gamma_fn, const AdjointVector& adj,
                   const LevySpec& levy);

struct ClearingResult {
    double log_price = 0.0;
    std::vector<std::int64_t> winners;  // ascending indices
};

/// Clearing at the empirical (nbar/n)-quantile of log bids; winners are the
/// nbar lowest bids, ties at the price broken by ascending index.
ClearingResult clearing_price(const AuctionRound& round);

/// Per-sample operator mismatch cost m^f(T) (D - S_o)_+.
double operator_cost(double quantile_T, double demand, double supply);

/// Best response of the mean-reverting market: a(t, s, q) = q, which zeroes
/// the positive-part drift term.
ControlPolicy quantile_tracking_policy();

}  // namespace qmfg
