#include "fedlsm/selftest.hpp"

#include "fedlsm/losses.hpp"
#include "fedlsm/nn.hpp"
#include "fedlsm/rng.hpp"

#include <algorithm>

namespace fedlsm {

double GradcheckSummary::worst() const { return std::max({max_identified, max_unknown, max_ude}); }

GradcheckSummary gradcheck_suite(int nets, std::uint64_t seed, double eps) {
  GradcheckSummary out;
  for (int t = 0; t < nets; ++t) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(t)}));
    const Task task = t % 2 == 0 ? Task::single_label : Task::multi_label;
    const std::size_t m = 2 + rng.index(4);
    const std::size_t batch = 1 + rng.index(4);
    std::vector<std::size_t> dims{1 + rng.index(8)};
    const std::size_t hidden_layers = 1 + rng.index(2);
    for (std::size_t h = 0; h < hidden_layers; ++h)
      dims.push_back(1 + rng.index(8));
    const ModelParams params = init_params(dims, m, rng.engine()());

    Matrix x(batch, dims.front());
    for (double& v : x.data)
      v = rng.normal();

    // Identified / unknown split with at least one class on each side.
    std::vector<int> unknown;
    std::vector<bool> known(m, false);
    const std::size_t n_known = 1 + rng.index(m - 1);
    for (int c : rng.choose(static_cast<int>(m), static_cast<int>(n_known)))
      known[static_cast<std::size_t>(c)] = true;
    for (std::size_t c = 0; c < m; ++c)
      if (!known[c])
        unknown.push_back(static_cast<int>(c));

    std::vector<LabelRecord> labels(batch);
    std::vector<PseudoLabelDecision> decisions(batch);
    std::vector<SoftTarget> targets(batch);
    std::vector<double> weights(m);
    for (double& w : weights)
      w = rng.uniform(1.0, 5.0);
    for (std::size_t i = 0; i < batch; ++i) {
      labels[i].values.assign(m, 0.0);
      labels[i].known_mask = known;
      targets[i].y.assign(m, 0.0);
      targets[i].usable.assign(m, true);
      if (task == Task::single_label) {
        if (rng.bernoulli(0.6)) {
          const int cls = static_cast<int>(rng.index(m));
          if (known[static_cast<std::size_t>(cls)])
            labels[i].values[static_cast<std::size_t>(cls)] = 1.0;
        }
        if (rng.bernoulli(0.7)) {
          decisions[i].kept = true;
          decisions[i].label = unknown[rng.index(unknown.size())];
        }
        const double lam = rng.uniform();
        targets[i].y[rng.index(m)] += lam;
        targets[i].y[rng.index(m)] += 1.0 - lam;
      } else {
        decisions[i].states.assign(m, PseudoState::abstain);
        for (std::size_t c = 0; c < m; ++c) {
          labels[i].values[c] = known[c] && rng.bernoulli(0.4) ? 1.0 : 0.0;
          if (!known[c]) {
            const double u = rng.uniform();
            decisions[i].states[c] = u < 0.35 ? PseudoState::positive
                                     : u < 0.7 ? PseudoState::negative
                                               : PseudoState::abstain;
          }
          targets[i].y[c] = rng.uniform();
          targets[i].usable[c] = rng.bernoulli(0.7);
        }
      }
    }

    auto wrap = [](auto&& fn) -> LogitLoss {
      return [fn](const Matrix& logits, Matrix& dlogits) {
        LossResult r = fn(logits);
        dlogits = std::move(r.dlogits);
        return r.loss;
      };
    };
    const std::vector<double> w = task == Task::multi_label ? weights : std::vector<double>{};
    out.max_identified = std::max(
        out.max_identified,
        gradcheck(params, x, wrap([&](const Matrix& z) { return loss_identified(z, labels, task, w); }), eps));
    out.max_unknown = std::max(
        out.max_unknown,
        gradcheck(params, x, wrap([&](const Matrix& z) { return loss_unknown(z, decisions, task); }), eps));
    out.max_ude = std::max(
        out.max_ude, gradcheck(params, x, wrap([&](const Matrix& z) { return loss_soft(z, targets, task); }), eps));
    ++out.nets;
  }
  return out;
}

} // namespace fedlsm
