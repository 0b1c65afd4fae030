#include "hpmn/trainer.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace hpmn {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning rate must be >= 0");
  if (lambda < 0.0 || mu < 0.0) throw std::invalid_argument("regularization weights must be >= 0");
  if (batch_size == 0) throw std::invalid_argument("batch size must be >= 1");
  if (memory_dim == 0 || embed_dim == 0) throw std::invalid_argument("dimensions must be >= 1");
  schedule.validate();
}

void Adam::step(const std::vector<ParamView>& params, const std::vector<ConstParamView>& grads,
                double learning_rate) {
  if (params.size() != grads.size()) throw DimensionError("adam: parameter/gradient count mismatch");
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.values.size(), 0.0);
      v_.emplace_back(p.values.size(), 0.0);
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& m = m_[t];
    auto& v = v_[t];
    const auto g = grads[t].values;
    const auto x = params[t].values;
    if (g.size() != x.size() || m.size() != x.size()) {
      throw DimensionError("adam: tensor " + params[t].name + " changed shape");
    }
    for (std::size_t k = 0; k < x.size(); ++k) {
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * g[k];
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * g[k] * g[k];
      x[k] -= learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + epsilon_);
    }
  }
}

void write_learning_curve(const std::filesystem::path& path, std::span<const CurveRow> rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write learning curve " + path.string());
  out << "epoch,batch,train_loss,test_logloss,test_auc\n";
  auto num = [](double v) {
    if (std::isnan(v)) return std::string();
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    out << r.epoch << "," << r.batch << "," << num(r.train_loss) << "," << num(r.test_logloss) << ","
        << num(r.test_auc) << "\n";
  }
}

std::string format_report(const GradCheckReport& report) {
  std::ostringstream os;
  char line[160];
  for (const auto& t : report.tensors) {
    std::snprintf(line, sizeof(line), "%-16s %7zu  max_rel_err %.3e  max|grad| %.3e  %s\n", t.name.c_str(),
                  t.size, t.max_relative_error, t.max_abs_analytic, t.passed ? "ok" : "FAIL");
    os << line;
  }
  os << (report.passed ? "gradient check passed" : "gradient check FAILED") << " (tolerance "
     << report.tolerance << ")\n";
  return os.str();
}

}  // namespace hpmn
