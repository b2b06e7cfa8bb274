#pragma once

#include <cstdint>
#include <vector>

#include "catdet/verify/oracles.hpp"

namespace catdet::verify {

/// Symmetry, range and the shared-z-extent identity iou_3d == bev_iou.
CheckResult check_iou_properties(std::size_t pairs = 200, std::uint64_t seed = 0);
/// Labelled points inside exactly their own box, pairwise BEV IoU 0, and at
/// least 99% of object points projecting onto painted pixels.
CheckResult check_synthetic_frame(std::uint64_t seed = 0);
/// bytes -> cloud -> bytes is bit-exact.
CheckResult check_velodyne_roundtrip(std::uint64_t seed = 0);
/// Pasted boxes never overlap, every appended point lies in its pasted box and
/// the result is identical for the same seed.
CheckResult check_gt_paste(std::uint64_t seed = 0);
/// No anchor keeps a negative at one of its positive pixels.
CheckResult check_pair_exclusivity(std::uint64_t seed = 0);
/// Entries are unit length and the oldest entry leaves first once full.
CheckResult check_memory_bank(std::uint64_t seed = 0);
/// Scaled two-stream forward on a synthetic frame: finite output, expected counts.
CheckResult check_scaled_forward(std::uint64_t seed = 0);

/// Every invariant check above with default arguments.
std::vector<CheckResult> run_invariants(std::uint64_t seed = 0);

}  // namespace catdet::verify
