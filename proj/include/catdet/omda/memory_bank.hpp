#pragma once

#include <array>
#include <cstddef>
#include <deque>
#include <span>
#include <vector>

#include "catdet/detection/box3d.hpp"
#include "catdet/tensor.hpp"

namespace catdet::omda {

enum class Modality { kPoint = 0, kImage = 1 };

inline constexpr std::size_t kBankCapacity = 1024;
inline constexpr double kDefaultMomentum = 0.999;

/// Per-class FIFO queues of unit-norm object features, one per modality.
/// Single writer; readers must not run concurrently with enqueue.
class MemoryBank {
 public:
  explicit MemoryBank(std::size_t width, std::size_t capacity = kBankCapacity);

  std::size_t width() const { return width_; }
  std::size_t capacity() const { return capacity_; }

  /// Normalises and appends; evicts the oldest entry once over capacity.
  void enqueue(int class_id, Modality modality, std::span<const double> feature);
  const std::deque<std::vector<double>>& queue(int class_id, Modality modality) const;
  std::size_t size(int class_id, Modality modality) const { return queue(class_id, modality).size(); }
  std::size_t total() const;

 private:
  std::size_t width_;
  std::size_t capacity_;
  std::array<std::array<std::deque<std::vector<double>>, 2>, kNumClasses> queues_;
};

/// theta_k <- m theta_k + (1 - m) theta_q for each tensor; shapes must match.
void momentum_update(std::vector<Tensor*>& theta_k, const std::vector<const Tensor*>& theta_q,
                     double m = kDefaultMomentum);
void momentum_update(std::vector<Tensor>& theta_k, const std::vector<Tensor>& theta_q, double m = kDefaultMomentum);

}  // namespace catdet::omda
