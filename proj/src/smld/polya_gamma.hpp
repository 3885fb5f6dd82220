#pragma once

#include "smld/rng.hpp"

namespace smld {

/// Exact PG(1, c) draw by the alternating-series accept/reject method
/// (Devroye-type sampler of Polson, Scott & Windle).
double polya_gamma_draw(double c, Rng& rng);

/// PG(b, c) for integer b >= 1, as a sum of b independent PG(1, c) draws.
double polya_gamma_draw(int b, double c, Rng& rng);

/// E[PG(b, c)] = b / (2c) tanh(c / 2), with the limit b / 4 at c = 0.
double polya_gamma_mean(double b, double c);

}  // namespace smld
