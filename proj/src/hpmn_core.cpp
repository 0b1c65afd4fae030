#include "hpmn/hpmn_core.hpp"

#include <cmath>
#include <stdexcept>

namespace hpmn {

namespace {

void fill_uniform(Matrix& m, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& w : m.values()) w = dist(rng);
}

void zero(Matrix& m) {
  for (auto& w : m.values()) w = 0.0;
}

void zero(Vector& v) { std::fill(v.begin(), v.end(), 0.0); }

// y += M x
void matvec_add(const Matrix& m, std::span<const double> x, std::span<double> y) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) acc += row[c] * x[c];
    y[r] += acc;
  }
}

void check_layer_inputs(const GruLayer& layer, std::span<const double> input,
                        std::span<const double> prev) {
  if (input.size() != layer.input_width() || prev.size() != layer.width()) {
    throw DimensionError("gru_cell: layer expects input [" + std::to_string(layer.input_width()) +
                         "] and state [" + std::to_string(layer.width()) + "], got input " +
                         shape_of(input) + " and state " + shape_of(prev));
  }
}

}  // namespace

void UpdateSchedule::validate() const {
  if (periods.empty()) throw std::invalid_argument("update schedule has no layers");
  if (periods.front() != 1) throw std::invalid_argument("first update period must be 1");
  for (std::size_t j = 1; j < periods.size(); ++j) {
    if (periods[j] < periods[j - 1]) {
      throw std::invalid_argument("update periods must be non-decreasing");
    }
  }
}

UpdateSchedule UpdateSchedule::exponential(std::size_t layers) {
  UpdateSchedule s;
  for (std::size_t j = 0; j < layers; ++j) s.periods.push_back(std::int64_t{1} << j);
  return s;
}

MemoryPool MemoryPool::zeros(std::size_t layers, std::size_t width) {
  if (layers == 0) throw std::invalid_argument("memory pool needs at least one slot");
  MemoryPool pool;
  pool.slots.assign(layers, Vector(width, 0.0));
  return pool;
}

GruLayer zero_gru_layer(std::size_t input_width, std::size_t width) {
  return GruLayer{Matrix(width, input_width), Matrix(width, width), Vector(width, 0.0),
                  Matrix(width, input_width), Matrix(width, width), Vector(width, 0.0),
                  Matrix(width, input_width), Matrix(width, width), Vector(width, 0.0)};
}

GruLayer init_gru_layer(std::size_t input_width, std::size_t width, Rng& rng, double max_timescale) {
  GruLayer g = zero_gru_layer(input_width, width);
  const double bound = 1.0 / std::sqrt(static_cast<double>(width));
  for (auto* m : {&g.w_z, &g.u_z, &g.w_r, &g.u_r, &g.w_m, &g.u_m}) fill_uniform(*m, bound, rng);
  if (max_timescale > 2.0) {
    std::uniform_real_distribution<double> tau(1.0, max_timescale - 1.0);
    for (auto& b : g.b_z) b = -std::log(tau(rng));
  }
  return g;
}

EnergyNet zero_energy_net(std::size_t input_width, std::size_t hidden) {
  return EnergyNet{Matrix(hidden, input_width), Vector(hidden, 0.0), Matrix(1, hidden),
                   Vector(1, 0.0)};
}

EnergyNet init_energy_net(std::size_t input_width, std::size_t hidden, Rng& rng) {
  EnergyNet e = zero_energy_net(input_width, hidden);
  fill_uniform(e.w1, std::sqrt(6.0 / static_cast<double>(input_width)), rng);
  fill_uniform(e.w2, std::sqrt(6.0 / static_cast<double>(hidden + 1)), rng);
  return e;
}

CoreParams zeros_like(const CoreParams& params) {
  CoreParams z = params;
  for (auto& g : z.layers) {
    for (auto* m : {&g.w_z, &g.u_z, &g.w_r, &g.u_r, &g.w_m, &g.u_m}) zero(*m);
    for (auto* v : {&g.b_z, &g.b_r, &g.b_m}) zero(*v);
  }
  zero(z.energy.w1);
  zero(z.energy.w2);
  zero(z.energy.b1);
  zero(z.energy.b2);
  return z;
}

std::vector<std::size_t> layers_due(const UpdateSchedule& schedule, std::int64_t step) {
  std::vector<std::size_t> due;
  for (std::size_t j = 0; j < schedule.periods.size(); ++j) {
    if (step % schedule.periods[j] == 0) due.push_back(j);
  }
  return due;
}

Vector gru_cell(const GruLayer& layer, std::span<const double> input, std::span<const double> prev,
                GruCache* cache) {
  check_layer_inputs(layer, input, prev);
  const std::size_t p = layer.width();

  Vector z = affine(layer.w_z, input, layer.b_z);
  matvec_add(layer.u_z, prev, z);
  Vector r = affine(layer.w_r, input, layer.b_r);
  matvec_add(layer.u_r, prev, r);
  for (std::size_t k = 0; k < p; ++k) {
    z[k] = sigmoid(z[k]);
    r[k] = sigmoid(r[k]);
  }

  Vector gated(p);
  for (std::size_t k = 0; k < p; ++k) gated[k] = r[k] * prev[k];
  Vector cand = affine(layer.w_m, input, layer.b_m);
  matvec_add(layer.u_m, gated, cand);
  for (auto& c : cand) c = std::tanh(c);

  Vector out(p);
  for (std::size_t k = 0; k < p; ++k) out[k] = (1.0 - z[k]) * prev[k] + z[k] * cand[k];

  if (cache) {
    cache->input.assign(input.begin(), input.end());
    cache->prev.assign(prev.begin(), prev.end());
    cache->z = std::move(z);
    cache->r = std::move(r);
    cache->candidate = std::move(cand);
  }
  return out;
}

void gru_cell_backward(const GruLayer& layer, const GruCache& cache, std::span<const double> d_out,
                       GruLayer& grads, std::span<double> d_input, std::span<double> d_prev) {
  const std::size_t p = layer.width();
  if (d_out.size() != p || d_prev.size() != p || d_input.size() != layer.input_width()) {
    throw DimensionError("gru_cell_backward: gradient shapes do not match layer");
  }
  const auto& z = cache.z;
  const auto& r = cache.r;
  const auto& c = cache.candidate;
  const auto& h = cache.prev;

  Vector da_m(p), da_z(p);
  for (std::size_t k = 0; k < p; ++k) {
    const double dz = d_out[k] * (c[k] - h[k]);
    const double dc = d_out[k] * z[k];
    d_prev[k] += d_out[k] * (1.0 - z[k]);
    da_m[k] = dc * (1.0 - c[k] * c[k]);
    da_z[k] = dz * z[k] * (1.0 - z[k]);
  }

  Vector gated(p);
  for (std::size_t k = 0; k < p; ++k) gated[k] = r[k] * h[k];
  Vector d_gated(p, 0.0);
  affine_backward(layer.w_m, cache.input, da_m, grads.w_m, grads.b_m, d_input);
  affine_backward(layer.u_m, gated, da_m, grads.u_m, {}, d_gated);

  Vector da_r(p);
  for (std::size_t k = 0; k < p; ++k) {
    const double dr = d_gated[k] * h[k];
    d_prev[k] += d_gated[k] * r[k];
    da_r[k] = dr * r[k] * (1.0 - r[k]);
  }
  affine_backward(layer.w_r, cache.input, da_r, grads.w_r, grads.b_r, d_input);
  affine_backward(layer.u_r, h, da_r, grads.u_r, {}, d_prev);
  affine_backward(layer.w_z, cache.input, da_z, grads.w_z, grads.b_z, d_input);
  affine_backward(layer.u_z, h, da_z, grads.u_z, {}, d_prev);
}

namespace {

void check_pool(const MemoryPool& pool, const CoreParams& params, const UpdateSchedule& schedule) {
  if (pool.layers() != params.layers.size() || schedule.layers() != params.layers.size()) {
    throw DimensionError("memory pool has " + std::to_string(pool.layers()) + " slots, model has " +
                         std::to_string(params.layers.size()) + " layers and schedule " +
                         std::to_string(schedule.layers()) + " periods");
  }
}

template <class OnUpdate>
void advance(MemoryPool& pool, const CoreParams& params, const UpdateSchedule& schedule,
             std::span<const double> event, OnUpdate&& on_update) {
  check_pool(pool, params, schedule);
  const std::int64_t i = pool.step_counter + 1;
  for (std::size_t j : layers_due(schedule, i)) {
    const std::span<const double> input =
        j == 0 ? event : std::span<const double>(pool.slots[j - 1]);
    GruCache* cache = on_update(j);
    pool.slots[j] = gru_cell(params.layers[j], input, pool.slots[j], cache);
  }
  pool.step_counter = i;
}

}  // namespace

void step_in_place(MemoryPool& pool, const CoreParams& params, const UpdateSchedule& schedule,
                   std::span<const double> event) {
  advance(pool, params, schedule, event, [](std::size_t) -> GruCache* { return nullptr; });
}

MemoryPool step(const MemoryPool& pool, const CoreParams& params, const UpdateSchedule& schedule,
                std::span<const double> event) {
  MemoryPool next = pool;
  step_in_place(next, params, schedule, event);
  return next;
}

MemoryPool run_sequence(const CoreParams& params, const UpdateSchedule& schedule,
                        std::span<const Vector> events) {
  if (events.empty()) throw std::invalid_argument("run_sequence: empty event sequence");
  if (params.layers.empty()) throw std::invalid_argument("run_sequence: model has no layers");
  MemoryPool pool = MemoryPool::zeros(params.layers.size(), params.layers.front().width());
  for (const auto& e : events) step_in_place(pool, params, schedule, e);
  return pool;
}

MemoryPool run_sequence_traced(const CoreParams& params, const UpdateSchedule& schedule,
                               std::span<const Vector> events, SequenceTrace& trace) {
  if (events.empty()) throw std::invalid_argument("run_sequence: empty event sequence");
  if (params.layers.empty()) throw std::invalid_argument("run_sequence: model has no layers");
  MemoryPool pool = MemoryPool::zeros(params.layers.size(), params.layers.front().width());
  trace.steps.assign(events.size(), {});
  for (std::size_t s = 0; s < events.size(); ++s) {
    auto& updates = trace.steps[s];
    advance(pool, params, schedule, events[s], [&](std::size_t j) {
      updates.push_back({j, {}});
      return &updates.back().cache;
    });
  }
  return pool;
}

std::vector<Vector> run_sequence_backward(const CoreParams& params, const SequenceTrace& trace,
                                          std::vector<Vector> d_final, CoreParams& grads) {
  if (d_final.size() != params.layers.size()) {
    throw DimensionError("run_sequence_backward: gradient for " + std::to_string(d_final.size()) +
                         " slots, model has " + std::to_string(params.layers.size()));
  }
  auto& d_slot = d_final;
  const std::size_t event_width = params.layers.front().input_width();
  std::vector<Vector> d_events(trace.steps.size(), Vector(event_width, 0.0));
  for (std::size_t s = trace.steps.size(); s-- > 0;) {
    const auto& updates = trace.steps[s];
    for (auto it = updates.rbegin(); it != updates.rend(); ++it) {
      const std::size_t j = it->layer;
      const auto& layer = params.layers[j];
      Vector d_prev(layer.width(), 0.0);
      Vector d_input(layer.input_width(), 0.0);
      gru_cell_backward(layer, it->cache, d_slot[j], grads.layers[j], d_input, d_prev);
      d_slot[j] = std::move(d_prev);
      if (j == 0) {
        add_into(d_events[s], d_input);
      } else {
        add_into(d_slot[j - 1], d_input);
      }
    }
  }
  return d_events;
}

ReadResult read(const MemoryPool& pool, const EnergyNet& energy, std::span<const double> query,
                ReadCache* cache) {
  if (pool.slots.empty()) throw std::invalid_argument("read: empty memory pool");
  const std::size_t p = pool.width();
  if (energy.input_width() != p + query.size()) {
    throw DimensionError("read: energy net expects input [" + std::to_string(energy.input_width()) +
                         "], got slot [" + std::to_string(p) + "] + query " + shape_of(query));
  }
  Vector scores(pool.layers());
  if (cache) {
    cache->energy_inputs.resize(pool.layers());
    cache->hidden.resize(pool.layers());
  }
  for (std::size_t j = 0; j < pool.layers(); ++j) {
    Vector in = concat({pool.slots[j], query});
    Vector hidden = activate(Activation::kRelu, affine(energy.w1, in, energy.b1));
    scores[j] = affine(energy.w2, hidden, energy.b2)[0];
    if (cache) {
      cache->energy_inputs[j] = std::move(in);
      cache->hidden[j] = std::move(hidden);
    }
  }
  ReadResult result;
  result.weights = softmax(scores);
  result.representation.assign(p, 0.0);
  for (std::size_t j = 0; j < pool.layers(); ++j) {
    const double w = result.weights[j];
    for (std::size_t k = 0; k < p; ++k) result.representation[k] += w * pool.slots[j][k];
  }
  return result;
}

ReadGrads read_backward(const MemoryPool& pool, const EnergyNet& energy, const ReadResult& result,
                        const ReadCache& cache, std::span<const double> d_representation,
                        EnergyNet& grads) {
  const std::size_t D = pool.layers();
  const std::size_t p = pool.width();
  const std::size_t q = energy.input_width() - p;
  ReadGrads out;
  out.d_slots.assign(D, Vector(p, 0.0));
  out.d_query.assign(q, 0.0);

  Vector d_weights(D);
  for (std::size_t j = 0; j < D; ++j) {
    d_weights[j] = dot(d_representation, pool.slots[j]);
    for (std::size_t k = 0; k < p; ++k) out.d_slots[j][k] += result.weights[j] * d_representation[k];
  }
  const Vector d_scores = softmax_backward(result.weights, d_weights);

  for (std::size_t j = 0; j < D; ++j) {
    Vector d_hidden(energy.w2.cols(), 0.0);
    const double ds[1] = {d_scores[j]};
    affine_backward(energy.w2, cache.hidden[j], ds, grads.w2, grads.b2, d_hidden);
    const Vector d_pre = activate_backward(Activation::kRelu, cache.hidden[j], d_hidden);
    Vector d_in(energy.input_width(), 0.0);
    affine_backward(energy.w1, cache.energy_inputs[j], d_pre, grads.w1, grads.b1, d_in);
    for (std::size_t k = 0; k < p; ++k) out.d_slots[j][k] += d_in[k];
    for (std::size_t k = 0; k < q; ++k) out.d_query[k] += d_in[p + k];
  }
  return out;
}

namespace {

std::vector<Vector> centered_rows(const MemoryPool& pool) {
  std::vector<Vector> rows = pool.slots;
  for (auto& row : rows) {
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(row.size());
    for (double& v : row) v -= mean;
  }
  return rows;
}

}  // namespace

Matrix memory_covariance(const MemoryPool& pool) {
  const std::size_t D = pool.layers();
  const std::size_t p = pool.width();
  if (p == 0) throw std::invalid_argument("memory_covariance: slot width must be >= 1");
  const auto centered = centered_rows(pool);
  Matrix c(D, D);
  for (std::size_t a = 0; a < D; ++a) {
    for (std::size_t b = a; b < D; ++b) {
      const double v = dot(centered[a], centered[b]) / static_cast<double>(p);
      c(a, b) = v;
      c(b, a) = v;
    }
  }
  return c;
}

double covariance_loss(const Matrix& c) {
  if (c.rows() != c.cols()) throw DimensionError("covariance_loss: C is " + c.shape());
  double off = 0.0;
  for (std::size_t a = 0; a < c.rows(); ++a) {
    for (std::size_t b = 0; b < c.cols(); ++b) {
      if (a != b) off += c(a, b) * c(a, b);
    }
  }
  return 0.5 * off;
}

std::vector<Vector> covariance_loss_grad(const MemoryPool& pool) {
  const std::size_t D = pool.layers();
  const std::size_t p = pool.width();
  const auto centered = centered_rows(pool);
  const Matrix c = memory_covariance(pool);
  std::vector<Vector> grad(D, Vector(p, 0.0));
  const double scale = 2.0 / static_cast<double>(p);
  for (std::size_t a = 0; a < D; ++a) {
    for (std::size_t b = 0; b < D; ++b) {
      if (a == b) continue;
      const double g = scale * c(a, b);
      for (std::size_t k = 0; k < p; ++k) grad[a][k] += g * centered[b][k];
    }
    double mean = 0.0;
    for (double v : grad[a]) mean += v;
    mean /= static_cast<double>(p);
    for (double& v : grad[a]) v -= mean;
  }
  return grad;
}

void expand_model(CoreParams& params, UpdateSchedule& schedule, std::int64_t new_period, Rng& rng,
                  double max_timescale) {
  if (params.layers.empty() || schedule.periods.empty()) {
    throw std::invalid_argument("expand: model has no layers");
  }
  if (new_period < schedule.periods.back()) {
    throw std::invalid_argument("expand: new period " + std::to_string(new_period) +
                                " is below the top period " +
                                std::to_string(schedule.periods.back()));
  }
  const std::size_t p = params.layers.back().width();
  params.layers.push_back(init_gru_layer(p, p, rng, max_timescale));
  schedule.periods.push_back(new_period);
}

void expand_pool(MemoryPool& pool) {
  if (pool.slots.empty()) throw std::invalid_argument("expand: empty memory pool");
  pool.slots.emplace_back(pool.width(), 0.0);
}

Expansion expand(const MemoryPool& pool, const CoreParams& params, const UpdateSchedule& schedule,
                 std::int64_t new_period, Rng& rng, double max_timescale) {
  Expansion out{pool, params, schedule};
  expand_model(out.params, out.schedule, new_period, rng, max_timescale);
  expand_pool(out.pool);
  return out;
}

}  // namespace hpmn
