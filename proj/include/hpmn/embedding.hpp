#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "hpmn/data.hpp"
#include "hpmn/numerics.hpp"

namespace hpmn {

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::string field, std::size_t vocab_size, std::size_t dim);

  const std::string& field() const { return field_; }
  std::size_t vocab_size() const { return weights_.rows(); }
  std::size_t dim() const { return weights_.cols(); }

  /// Throws std::out_of_range naming the field and id.
  std::span<const double> lookup(std::int32_t id) const;
  std::span<double> row(std::int32_t id);
  void check(std::int32_t id) const;

  Matrix& weights() { return weights_; }
  const Matrix& weights() const { return weights_; }

  bool operator==(const EmbeddingTable&) const = default;

 private:
  std::string field_;
  Matrix weights_;
};

/// Fixed number of slots per multi-valued field; absent values pad with id 0.
struct FeatureLayout {
  std::size_t side_slots = 1;
  std::size_t context_slots = 1;
  std::size_t user_side_slots = 1;

  bool operator==(const FeatureLayout&) const = default;
};

struct EmbeddingTables {
  EmbeddingTable item;
  EmbeddingTable category;
  EmbeddingTable side;
  EmbeddingTable context;
  EmbeddingTable user_side;
  FeatureLayout layout;

  std::size_t dim() const { return item.dim(); }
  std::size_t event_width() const { return dim() * (2 + layout.side_slots); }
  std::size_t context_width() const { return dim() * layout.context_slots; }
  std::size_t user_side_width() const { return dim() * layout.user_side_slots; }

  bool operator==(const EmbeddingTables&) const = default;
};

/// Uniform in [-0.05, 0.05]; each table draws from its own seeded stream.
EmbeddingTables init_tables(const VocabSizes& vocab, const FeatureLayout& layout, std::size_t dim,
                            std::uint64_t seed);

/// Same shapes, all zeros. Used as gradient accumulators.
EmbeddingTables zeros_like(const EmbeddingTables& tables);

/// Concatenation [item | category | side_1 .. side_k].
Vector embed_event(const BehaviorEvent& event, const EmbeddingTables& tables);
Vector embed_query(const BehaviorEvent& target, const EmbeddingTables& tables);
Vector embed_context(std::span<const std::int32_t> context, const EmbeddingTables& tables);
Vector embed_user_side(std::span<const std::int32_t> user_side, const EmbeddingTables& tables);

/// Scatter-add a gradient on an embedded vector back into the referenced rows.
void embed_event_backward(const BehaviorEvent& event, std::span<const double> grad,
                          EmbeddingTables& grads);
void embed_context_backward(std::span<const std::int32_t> context, std::span<const double> grad,
                            EmbeddingTables& grads);
void embed_user_side_backward(std::span<const std::int32_t> user_side,
                              std::span<const double> grad, EmbeddingTables& grads);

}  // namespace hpmn
