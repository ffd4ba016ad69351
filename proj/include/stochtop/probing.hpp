#pragma once

#include <Eigen/Dense>

#include <bit>
#include <cstdint>
#include <vector>

#include "stochtop/errors.hpp"
#include "stochtop/random.hpp"

namespace stochtop {

enum class ProbeKind { kRademacher, kHadamard };

/// A set of N probing vectors in {-1,+1}^L, stored as the columns of V.
struct ProbingSet {
    Eigen::MatrixXd V; // L x N, entries +-1
    ProbeKind kind = ProbeKind::kRademacher;
    std::uint64_t seed = 0; // Rademacher only

    int length() const noexcept { return static_cast<int>(V.rows()); }
    int count() const noexcept { return static_cast<int>(V.cols()); }
};

/// Smallest power of two >= L (the Sylvester Hadamard order for L rows).
inline int hadamard_order(int length) {
    if (length < 1) throw ParameterError("hadamard_order: length must be >= 1");
    int m = 1;
    while (m < length) m <<= 1;
    return m;
}

/// i.i.d. +-1 entries, deterministic for a given seed.
inline ProbingSet rademacher_probes(int length, int count, std::uint64_t seed) {
    if (length < 1 || count < 1)
        throw ParameterError("rademacher_probes: L and N must be >= 1");
    ProbingSet probes;
    probes.kind = ProbeKind::kRademacher;
    probes.seed = seed;
    probes.V.resize(length, count);
    std::mt19937_64 rng(seed);
    for (int j = 0; j < count; ++j)
        for (int i = 0; i < length; ++i) probes.V(i, j) = detail::sign_unit(rng);
    return probes;
}

/// First `count` columns (in the given order, natural by default) of the
/// order-M Sylvester Hadamard matrix, truncated to `length` rows.
/// H_M(i,j) = (-1)^popcount(i & j); column 0 is all ones.
inline ProbingSet hadamard_probes(int length, int count,
                                  const std::vector<int>& column_order = {}) {
    if (length < 1 || count < 1)
        throw ParameterError("hadamard_probes: L and N must be >= 1");
    const int order = hadamard_order(length);
    if (count > order)
        throw ParameterError("hadamard_probes: N exceeds the Hadamard order for this L");
    if (!column_order.empty() && static_cast<int>(column_order.size()) < count)
        throw ParameterError("hadamard_probes: column order has fewer than N entries");

    ProbingSet probes;
    probes.kind = ProbeKind::kHadamard;
    probes.V.resize(length, count);
    for (int j = 0; j < count; ++j) {
        int col = column_order.empty() ? j : column_order[static_cast<std::size_t>(j)];
        if (col < 0 || col >= order)
            throw ParameterError("hadamard_probes: column index out of range");
        for (int i = 0; i < length; ++i) {
            const unsigned bits = static_cast<unsigned>(i) & static_cast<unsigned>(col);
            probes.V(i, j) = (std::popcount(bits) & 1) ? -1.0 : 1.0;
        }
    }
    return probes;
}

} // namespace stochtop
