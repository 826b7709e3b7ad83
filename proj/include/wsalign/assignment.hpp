#pragma once

#include <cstdint>
#include <vector>

namespace wsalign {

// Exact minimum-cost linear assignment (Jonker-Volgenant style augmenting
// paths, O(n^3)). cost is n x n row-major; returns row -> column.
std::vector<int> linear_assignment_min(const std::vector<double>& cost, int n);

// Maximization wrapper with deterministic tie handling: among optimal
// assignments reachable by pairwise swaps, returns the lexicographically
// smallest, so equal-score instances resolve to the identity.
std::vector<int> linear_assignment_max(const std::vector<double>& score,
                                       int n);

}  // namespace wsalign
