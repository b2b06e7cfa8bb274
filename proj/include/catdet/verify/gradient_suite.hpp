#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace catdet::verify {

enum class LossKind { kPointContrast, kObjectContrast, kFocal, kBox, kRcnn };

inline constexpr LossKind kAllLosses[] = {LossKind::kPointContrast, LossKind::kObjectContrast, LossKind::kFocal,
                                          LossKind::kBox, LossKind::kRcnn};

/// CLI names: clp, clo, focal, box, rcnn.
std::string_view loss_name(LossKind kind);
std::optional<LossKind> loss_from_name(std::string_view name);

struct GradcheckOptions {
  std::size_t trials = 20;
  std::uint64_t seed = 0;
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Denominator floor of the relative error, so entries that are zero
  /// analytically compare on an absolute scale.
  double floor = 1e-8;
};

struct TrialResult {
  std::uint64_t seed = 0;
  std::size_t parameters = 0;
  double max_relative_error = 0;
};

struct GradcheckReport {
  LossKind loss = LossKind::kFocal;
  std::vector<TrialResult> trials;
  double worst = 0;
  double seconds = 0;
  bool passed = false;
};

/// Random configurations of one loss; each compares the analytic gradient
/// with central differences over every input coordinate.
GradcheckReport run_gradcheck(LossKind kind, const GradcheckOptions& opt = {});

}  // namespace catdet::verify
