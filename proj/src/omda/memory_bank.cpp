#include "catdet/omda/memory_bank.hpp"

#include "catdet/errors.hpp"
#include "catdet/numerics/ops.hpp"

namespace catdet::omda {

MemoryBank::MemoryBank(std::size_t width, std::size_t capacity) : width_(width), capacity_(capacity) {
  if (width == 0 || capacity == 0) throw ArgumentError("memory bank width and capacity must be positive");
}

void MemoryBank::enqueue(int class_id, Modality modality, std::span<const double> feature) {
  if (feature.size() != width_) {
    throw ShapeError("memory bank: feature width " + std::to_string(feature.size()) + ", bank width " +
                     std::to_string(width_));
  }
  if (class_id < 0 || class_id >= kNumClasses) throw ArgumentError("memory bank: unknown class");
  auto& q = queues_[static_cast<std::size_t>(class_id)][static_cast<std::size_t>(modality)];
  q.push_back(num::l2_normalized(feature));
  if (q.size() > capacity_) q.pop_front();
}

const std::deque<std::vector<double>>& MemoryBank::queue(int class_id, Modality modality) const {
  if (class_id < 0 || class_id >= kNumClasses) throw ArgumentError("memory bank: unknown class");
  return queues_[static_cast<std::size_t>(class_id)][static_cast<std::size_t>(modality)];
}

std::size_t MemoryBank::total() const {
  std::size_t n = 0;
  for (const auto& per_class : queues_) {
    for (const auto& q : per_class) n += q.size();
  }
  return n;
}

void momentum_update(std::vector<Tensor*>& theta_k, const std::vector<const Tensor*>& theta_q, double m) {
  if (!(m >= 0.0 && m <= 1.0)) throw ArgumentError("momentum must be in [0, 1]");
  if (theta_k.size() != theta_q.size()) throw ShapeError("momentum_update: parameter counts differ");
  for (std::size_t i = 0; i < theta_k.size(); ++i) {
    if (theta_k[i]->shape() != theta_q[i]->shape()) {
      throw ShapeError("momentum_update: parameter " + std::to_string(i) + " shapes differ");
    }
  }
  for (std::size_t i = 0; i < theta_k.size(); ++i) {
    auto k = theta_k[i]->data();
    const auto q = theta_q[i]->data();
    for (std::size_t j = 0; j < k.size(); ++j) k[j] = m * k[j] + (1.0 - m) * q[j];
  }
}

void momentum_update(std::vector<Tensor>& theta_k, const std::vector<Tensor>& theta_q, double m) {
  std::vector<Tensor*> k;
  std::vector<const Tensor*> q;
  for (auto& t : theta_k) k.push_back(&t);
  for (const auto& t : theta_q) q.push_back(&t);
  momentum_update(k, q, m);
}

}  // namespace catdet::omda
