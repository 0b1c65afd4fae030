#include "hpmn/embedding.hpp"

#include <stdexcept>

#include "hpmn/random.hpp"

namespace hpmn {

namespace {

constexpr double kInitRange = 0.05;

void fill_uniform(EmbeddingTable& t, std::uint64_t seed, std::uint64_t stream) {
  auto rng = stream_rng(seed, stream);
  std::uniform_real_distribution<double> dist(-kInitRange, kInitRange);
  for (auto& w : t.weights().values()) w = dist(rng);
}

std::int32_t slot_id(std::span<const std::int32_t> ids, std::size_t slot) {
  return slot < ids.size() ? ids[slot] : 0;
}

void check_slots(std::span<const std::int32_t> ids, std::size_t slots, const std::string& field) {
  if (ids.size() > slots) {
    throw std::out_of_range(field + ": " + std::to_string(ids.size()) + " values for " +
                            std::to_string(slots) + " slots");
  }
}

Vector embed_slots(std::span<const std::int32_t> ids, std::size_t slots, const EmbeddingTable& t) {
  check_slots(ids, slots, t.field());
  Vector out;
  out.reserve(slots * t.dim());
  for (std::size_t s = 0; s < slots; ++s) {
    const auto row = t.lookup(slot_id(ids, s));
    out.insert(out.end(), row.begin(), row.end());
  }
  return out;
}

void scatter_slots(std::span<const std::int32_t> ids, std::size_t slots, std::span<const double> grad,
                   EmbeddingTable& t) {
  const std::size_t dim = t.dim();
  for (std::size_t s = 0; s < slots; ++s) add_into(t.row(slot_id(ids, s)), grad.subspan(s * dim, dim));
}

}  // namespace

EmbeddingTable::EmbeddingTable(std::string field, std::size_t vocab_size, std::size_t dim)
    : field_(std::move(field)), weights_(vocab_size, dim) {
  if (vocab_size == 0) throw std::invalid_argument("embedding table '" + field_ + "' has zero vocabulary");
  if (dim == 0) throw std::invalid_argument("embedding dimension must be >= 1");
}

void EmbeddingTable::check(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= vocab_size()) {
    throw std::out_of_range(field_ + " id " + std::to_string(id) + " outside vocabulary of size " +
                            std::to_string(vocab_size()));
  }
}

std::span<const double> EmbeddingTable::lookup(std::int32_t id) const {
  check(id);
  return weights_.row(static_cast<std::size_t>(id));
}

std::span<double> EmbeddingTable::row(std::int32_t id) {
  check(id);
  return weights_.row(static_cast<std::size_t>(id));
}

EmbeddingTables init_tables(const VocabSizes& vocab, const FeatureLayout& layout, std::size_t dim,
                            std::uint64_t seed) {
  auto size = [](std::int32_t n) { return n > 0 ? static_cast<std::size_t>(n) : std::size_t{0}; };
  EmbeddingTables t{
      EmbeddingTable("item", size(vocab.items), dim),
      EmbeddingTable("category", size(vocab.categories), dim),
      EmbeddingTable("side", size(vocab.side), dim),
      EmbeddingTable("context", size(vocab.context), dim),
      EmbeddingTable("user_side", size(vocab.user_side), dim),
      layout,
  };
  fill_uniform(t.item, seed, 0);
  fill_uniform(t.category, seed, 1);
  fill_uniform(t.side, seed, 2);
  fill_uniform(t.context, seed, 3);
  fill_uniform(t.user_side, seed, 4);
  return t;
}

EmbeddingTables zeros_like(const EmbeddingTables& tables) {
  EmbeddingTables z = tables;
  for (auto* t : {&z.item, &z.category, &z.side, &z.context, &z.user_side}) {
    for (auto& w : t->weights().values()) w = 0.0;
  }
  return z;
}

Vector embed_event(const BehaviorEvent& event, const EmbeddingTables& tables) {
  check_slots(event.side_features, tables.layout.side_slots, "side");
  Vector out;
  out.reserve(tables.event_width());
  const auto item = tables.item.lookup(event.item_id);
  const auto cat = tables.category.lookup(event.category_id);
  out.insert(out.end(), item.begin(), item.end());
  out.insert(out.end(), cat.begin(), cat.end());
  const auto side = embed_slots(event.side_features, tables.layout.side_slots, tables.side);
  out.insert(out.end(), side.begin(), side.end());
  return out;
}

Vector embed_query(const BehaviorEvent& target, const EmbeddingTables& tables) {
  return embed_event(target, tables);
}

Vector embed_context(std::span<const std::int32_t> context, const EmbeddingTables& tables) {
  return embed_slots(context, tables.layout.context_slots, tables.context);
}

Vector embed_user_side(std::span<const std::int32_t> user_side, const EmbeddingTables& tables) {
  return embed_slots(user_side, tables.layout.user_side_slots, tables.user_side);
}

void embed_event_backward(const BehaviorEvent& event, std::span<const double> grad,
                          EmbeddingTables& grads) {
  if (grad.size() != grads.event_width()) {
    throw DimensionError("embed_event_backward: gradient " + shape_of(grad) + " vs event width " +
                         std::to_string(grads.event_width()));
  }
  const std::size_t dim = grads.dim();
  add_into(grads.item.row(event.item_id), grad.subspan(0, dim));
  add_into(grads.category.row(event.category_id), grad.subspan(dim, dim));
  scatter_slots(event.side_features, grads.layout.side_slots, grad.subspan(2 * dim), grads.side);
}

void embed_context_backward(std::span<const std::int32_t> context, std::span<const double> grad,
                            EmbeddingTables& grads) {
  scatter_slots(context, grads.layout.context_slots, grad, grads.context);
}

void embed_user_side_backward(std::span<const std::int32_t> user_side,
                              std::span<const double> grad, EmbeddingTables& grads) {
  scatter_slots(user_side, grads.layout.user_side_slots, grad, grads.user_side);
}

}  // namespace hpmn
