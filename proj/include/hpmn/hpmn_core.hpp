#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hpmn/numerics.hpp"
#include "hpmn/random.hpp"

namespace hpmn {

/// Update periods t^1..t^D. Layer j (0-based here) refreshes its slot at
/// behavior ordinal i when i is a multiple of periods[j].
struct UpdateSchedule {
  std::vector<std::int64_t> periods;

  /// Throws unless non-empty, positive, non-decreasing and starting at 1.
  void validate() const;
  std::size_t layers() const { return periods.size(); }

  /// 1, 2, 4, ..., 2^(layers-1).
  static UpdateSchedule exponential(std::size_t layers);

  bool operator==(const UpdateSchedule&) const = default;
};

/// Per-user memory: D slots of width p plus the behavior ordinal i.
struct MemoryPool {
  std::vector<Vector> slots;
  std::int64_t step_counter = 0;

  static MemoryPool zeros(std::size_t layers, std::size_t width);
  std::size_t layers() const { return slots.size(); }
  std::size_t width() const { return slots.empty() ? 0 : slots.front().size(); }

  bool operator==(const MemoryPool&) const = default;
};

/// GRU weights for one memory layer. `w_*` act on the layer input (the event
/// vector for layer 0, the slot below otherwise); `u_*` act on the layer's own
/// previous slot.
struct GruLayer {
  Matrix w_z, u_z;
  Vector b_z;
  Matrix w_r, u_r;
  Vector b_r;
  Matrix w_m, u_m;
  Vector b_m;

  std::size_t input_width() const { return w_z.cols(); }
  std::size_t width() const { return u_z.rows(); }

  bool operator==(const GruLayer&) const = default;
};

GruLayer zero_gru_layer(std::size_t input_width, std::size_t width);
/// Weights uniform in [-1/sqrt(width), 1/sqrt(width)]. With max_timescale > 2
/// each unit's update-gate bias starts at -log(tau - 1), tau uniform in
/// [2, max_timescale], so the unit initially averages over about tau updates;
/// otherwise all biases are zero.
GruLayer init_gru_layer(std::size_t input_width, std::size_t width, Rng& rng, double max_timescale = 0.0);

/// Relevance score of a (slot, query) pair: w2 · relu(W1 [slot; query] + b1) + b2.
struct EnergyNet {
  Matrix w1;
  Vector b1;
  Matrix w2;
  Vector b2;

  std::size_t input_width() const { return w1.cols(); }

  bool operator==(const EnergyNet&) const = default;
};

EnergyNet zero_energy_net(std::size_t input_width, std::size_t hidden);
EnergyNet init_energy_net(std::size_t input_width, std::size_t hidden, Rng& rng);

struct CoreParams {
  std::vector<GruLayer> layers;
  EnergyNet energy;

  bool operator==(const CoreParams&) const = default;
};

CoreParams zeros_like(const CoreParams& params);

/// 0-based indices of the layers due at ordinal `step` (>= 1), ascending.
std::vector<std::size_t> layers_due(const UpdateSchedule& schedule, std::int64_t step);

/// Everything gru_cell_backward needs from the forward pass.
struct GruCache {
  Vector input;
  Vector prev;
  Vector z;
  Vector r;
  Vector candidate;
};

Vector gru_cell(const GruLayer& layer, std::span<const double> input, std::span<const double> prev,
                GruCache* cache = nullptr);

/// Accumulates parameter gradients into `grads` and input/prev gradients into
/// d_input / d_prev (both must be sized; contents are added to).
void gru_cell_backward(const GruLayer& layer, const GruCache& cache, std::span<const double> d_out,
                       GruLayer& grads, std::span<double> d_input, std::span<double> d_prev);

/// Advances the pool by one behavior.
MemoryPool step(const MemoryPool& pool, const CoreParams& params, const UpdateSchedule& schedule,
                std::span<const double> event);
void step_in_place(MemoryPool& pool, const CoreParams& params, const UpdateSchedule& schedule,
                   std::span<const double> event);

/// Fold of step over `events` from the zero pool.
MemoryPool run_sequence(const CoreParams& params, const UpdateSchedule& schedule,
                        std::span<const Vector> events);

/// Forward caches for every due layer at every step, in update order.
struct SequenceTrace {
  struct Update {
    std::size_t layer;
    GruCache cache;
  };
  std::vector<std::vector<Update>> steps;
};

MemoryPool run_sequence_traced(const CoreParams& params, const UpdateSchedule& schedule,
                               std::span<const Vector> events, SequenceTrace& trace);

/// Backpropagation through time. `d_final` is dL/d(final slots); returns
/// dL/d(event vector) per step and accumulates layer gradients.
std::vector<Vector> run_sequence_backward(const CoreParams& params, const SequenceTrace& trace,
                                          std::vector<Vector> d_final, CoreParams& grads);

struct ReadResult {
  Vector representation;
  Vector weights;
};

struct ReadCache {
  std::vector<Vector> energy_inputs;
  std::vector<Vector> hidden;
};

/// Attentional read: w = softmax(E(m^j, q)), r = sum_j w^j m^j. Never mutates the pool.
ReadResult read(const MemoryPool& pool, const EnergyNet& energy, std::span<const double> query,
                ReadCache* cache = nullptr);

struct ReadGrads {
  std::vector<Vector> d_slots;
  Vector d_query;
};

ReadGrads read_backward(const MemoryPool& pool, const EnergyNet& energy, const ReadResult& result,
                        const ReadCache& cache, std::span<const double> d_representation,
                        EnergyNet& grads);

/// C = (1/p)(M - M̄)(M - M̄)ᵀ with M the D x p slot matrix and M̄ its row means.
Matrix memory_covariance(const MemoryPool& pool);

/// Half the sum of squared off-diagonal entries of C.
double covariance_loss(const Matrix& c);

/// d covariance_loss(memory_covariance(pool)) / d slots.
std::vector<Vector> covariance_loss_grad(const MemoryPool& pool);

/// Appends a layer with period `new_period` on top. Existing layers and
/// slots are untouched; the new slot starts at zero.
void expand_model(CoreParams& params, UpdateSchedule& schedule, std::int64_t new_period, Rng& rng,
                  double max_timescale = 0.0);
void expand_pool(MemoryPool& pool);

struct Expansion {
  MemoryPool pool;
  CoreParams params;
  UpdateSchedule schedule;
};

Expansion expand(const MemoryPool& pool, const CoreParams& params, const UpdateSchedule& schedule,
                 std::int64_t new_period, Rng& rng, double max_timescale = 0.0);

}  // namespace hpmn
