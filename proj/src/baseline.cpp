#include "hpmn/baseline.hpp"

#include "hpmn/random.hpp"

namespace hpmn {

namespace {

template <class View, class Self>
std::vector<View> collect(Self& m) {
  std::vector<View> out;
  auto add = [&](const std::string& name, auto& t) {
    if constexpr (requires { t.rows(); }) {
      out.push_back(View{name, t.rows(), t.cols(), t.values()});
    } else {
      out.push_back(View{name, t.size(), 1, t});
    }
  };
  add("emb.item", m.tables.item.weights());
  add("emb.category", m.tables.category.weights());
  add("emb.side", m.tables.side.weights());
  add("emb.context", m.tables.context.weights());
  add("emb.user_side", m.tables.user_side.weights());
  for (std::size_t l = 0; l < m.predictor.layers.size(); ++l) {
    add("mlp" + std::to_string(l + 1) + ".w", m.predictor.layers[l].w);
    add("mlp" + std::to_string(l + 1) + ".b", m.predictor.layers[l].b);
  }
  return out;
}

}  // namespace

SumPoolingModel SumPoolingModel::create(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  SumPoolingModel m;
  m.config = config;
  m.tables = init_tables(config.vocab, config.layout, config.embed_dim, seed);
  auto rng = stream_rng(seed, 300);
  const std::size_t in = 2 * config.event_width() + m.tables.context_width() + m.tables.user_side_width();
  m.predictor = init_predictor(in, config.mlp_hidden, rng);
  return m;
}

SumPoolingModel SumPoolingModel::zeros_like() const {
  SumPoolingModel z;
  z.config = config;
  z.tables = hpmn::zeros_like(tables);
  z.predictor = hpmn::zeros_like(predictor);
  return z;
}

std::vector<ParamView> SumPoolingModel::parameters() { return collect<ParamView>(*this); }
std::vector<ConstParamView> SumPoolingModel::parameters() const { return collect<ConstParamView>(*this); }

Vector SumPoolingModel::pool(const UserSequence& sequence) const {
  Vector sum(config.event_width(), 0.0);
  for (const auto& e : sequence.events) add_into(sum, embed_event(e, tables));
  return sum;
}

Scored SumPoolingModel::score(const Sample& sample) const {
  const Vector pooled = pool(sample.sequence);
  Scored s;
  s.probability = predict(predictor, pooled, embed_query(sample.target, tables),
                          embed_context(sample.context, tables),
                          embed_user_side(sample.sequence.user_side, tables));
  return s;
}

double SumPoolingModel::batch_loss(std::span<const Sample> batch, const LossWeights& weights) const {
  std::vector<double> ce;
  for (const auto& s : batch) ce.push_back(cross_entropy(s.label, score(s).probability));
  const auto params = parameters();
  return total_loss(ce, {}, squared_norm(params), weights.lambda, weights.mu);
}

double SumPoolingModel::accumulate_gradients(std::span<const Sample> batch, const LossWeights& weights,
                                             SumPoolingModel& grads) const {
  const std::size_t ew = config.event_width();
  const std::size_t cw = tables.context_width();
  double ce_sum = 0.0;
  for (const auto& s : batch) {
    const Vector pooled = pool(s.sequence);
    const Vector query = embed_query(s.target, tables);
    const Vector input = concat({pooled, query, embed_context(s.context, tables),
                                 embed_user_side(s.sequence.user_side, tables)});
    MlpCache cache;
    ce_sum += cross_entropy(s.label, predict_input(predictor, input, &cache));
    const Vector d_input = predict_backward(predictor, cache, s.label, 1.0, grads.predictor);
    const std::span<const double> d(d_input);
    for (const auto& e : s.sequence.events) embed_event_backward(e, d.subspan(0, ew), grads.tables);
    embed_event_backward(s.target, d.subspan(ew, ew), grads.tables);
    embed_context_backward(s.context, d.subspan(2 * ew, cw), grads.tables);
    embed_user_side_backward(s.sequence.user_side, d.subspan(2 * ew + cw), grads.tables);
  }
  double norm = 0.0;
  if (weights.mu != 0.0) {
    const auto params = parameters();
    auto g = grads.parameters();
    for (std::size_t t = 0; t < params.size(); ++t) {
      norm += squared_norm(params[t].values);
      for (std::size_t k = 0; k < params[t].values.size(); ++k) {
        g[t].values[k] += weights.mu * params[t].values[k];
      }
    }
  }
  return ce_sum + 0.5 * weights.mu * norm;
}

}  // namespace hpmn
