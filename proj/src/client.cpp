#include "fedlsm/client.hpp"

#include "fedlsm/errors.hpp"
#include "fedlsm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fedlsm {

void ClientConfig::validate() const {
  auto in_unit = [](double v) { return v > 0.0 && v < 1.0; };
  if (!in_unit(tau) || !in_unit(tau_l))
    throw ConfigError("client.tau and client.tau_l must lie in (0, 1)");
  if (!(tau_l < tau))
    throw ConfigError("client.tau_l must be below client.tau");
  if (!(in_unit(tau_n) && in_unit(tau_p) && tau_n < tau_p))
    throw ConfigError("client thresholds must satisfy 0 < tau_n < tau_p < 1");
  if (!(in_unit(tau_ln) && in_unit(tau_lp) && tau_ln < tau_lp))
    throw ConfigError("client thresholds must satisfy 0 < tau_ln < tau_lp < 1");
  if (!(lambda_ude >= 0.0))
    throw ConfigError("client.lambda_ude must be nonnegative");
  if (!(ema_decay >= 0.0 && ema_decay <= 1.0))
    throw ConfigError("client.ema_decay must lie in [0, 1]");
  if (!(mixup_alpha > 0.0))
    throw ConfigError("client.mixup_alpha must be positive");
  if (!(lr > 0.0) || !(lr_decay >= 0.0))
    throw ConfigError("client.lr must be positive and client.lr_decay nonnegative");
  if (local_iters < 0)
    throw ConfigError("client.local_iters must be nonnegative");
  if (batch_size < 1 || ude_batch < 0 || ude_batch >= batch_size)
    throw ConfigError("client.ude_batch must be smaller than client.batch_size");
  if (ude_retries < 0)
    throw ConfigError("client.ude_retries must be nonnegative");
  if (!(frac_l >= 0.0 && frac_h >= 0.0 && frac_l + frac_h <= 1.0))
    throw ConfigError("client.frac_l + client.frac_h must not exceed 1");
  if (std::any_of(class_weights.begin(), class_weights.end(), [](double w) { return !(w > 0.0); }))
    throw ConfigError("client.class_weights must be positive");
}

namespace {

// Streams for the per-client random draws.
enum : std::uint64_t { kBatchStream = 1, kWeakView, kStrongView, kUdeStream };

// Cycles through a pool in shuffled passes.
class EpochSampler {
public:
  EpochSampler(std::vector<std::size_t> pool, std::uint64_t seed) : pool_(std::move(pool)), rng_(seed) {
    rng_.shuffle(pool_.begin(), pool_.end());
  }

  std::vector<std::size_t> next(std::size_t count) {
    std::vector<std::size_t> out;
    out.reserve(count);
    while (out.size() < count && !pool_.empty()) {
      if (pos_ == pool_.size()) {
        rng_.shuffle(pool_.begin(), pool_.end());
        pos_ = 0;
      }
      out.push_back(pool_[pos_++]);
    }
    return out;
  }

private:
  std::vector<std::size_t> pool_;
  Rng rng_;
  std::size_t pos_ = 0;
};

Matrix views(const Dataset& ds, std::span<const std::size_t> idx, std::uint64_t seed, std::uint64_t stream,
             const AugmentConfig& aug, bool strong) {
  Matrix out(idx.size(), ds.front().x.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const std::uint64_t s = derive_seed(seed, {stream, r, idx[r]});
    const auto v = strong ? augment_strong(ds[idx[r]].x, s, aug) : augment_weak(ds[idx[r]].x, s, aug);
    std::copy(v.begin(), v.end(), out.row(r).begin());
  }
  return out;
}

Matrix teacher_probs(const ModelParams& teacher, const Matrix& x, Task task) {
  const Matrix logits = forward(teacher, x).logits;
  return task == Task::single_label ? softmax_rows(logits) : sigmoid_rows(logits);
}

void copy_block(Matrix& dst, std::size_t row0, const Matrix& src, double weight) {
  for (std::size_t i = 0; i < src.rows; ++i)
    for (std::size_t c = 0; c < src.cols; ++c)
      dst(row0 + i, c) = weight * src(i, c);
}

Matrix rows_of(const Matrix& m, std::size_t row0, std::size_t count) {
  Matrix out(count, m.cols);
  std::copy(m.data.begin() + static_cast<std::ptrdiff_t>(row0 * m.cols),
            m.data.begin() + static_cast<std::ptrdiff_t>((row0 + count) * m.cols), out.data.begin());
  return out;
}

} // namespace

std::optional<SoftTarget> relaxed_target(const LabelRecord& label, std::span<const double> probs,
                                         std::span<const int> unknown, const ClientConfig& cfg) {
  const std::size_t m = probs.size();
  SoftTarget t{std::vector<double>(m, 0.0), std::vector<bool>(m, false)};
  if (cfg.task == Task::single_label) {
    int cls = label.known_class();
    if (cls < 0) {
      const auto d = decide_single(probs, unknown, cfg.tau_l);
      if (!d.kept)
        return std::nullopt;
      cls = d.label;
    }
    t.y[static_cast<std::size_t>(cls)] = 1.0;
    std::fill(t.usable.begin(), t.usable.end(), true);
    return t;
  }
  bool any = false;
  for (std::size_t c = 0; c < m; ++c) {
    if (label.known_mask[c]) {
      t.y[c] = label.values[c];
      t.usable[c] = true;
      any = true;
    }
  }
  const auto d = decide_multi(probs, unknown, cfg.tau_lp, cfg.tau_ln);
  for (std::size_t c = 0; c < m; ++c) {
    if (d.states[c] == PseudoState::abstain)
      continue;
    t.y[c] = d.states[c] == PseudoState::positive ? 1.0 : 0.0;
    t.usable[c] = true;
    any = true;
  }
  if (!any)
    return std::nullopt;
  return t;
}

std::vector<MixedSample> ude_batch(const UncertaintyPartition& part, const ModelParams& teacher,
                                   const Dataset& dataset, const ClientSpec& spec,
                                   const ClientConfig& cfg, std::uint64_t seed) {
  std::vector<MixedSample> out;
  if (part.low.empty() || part.high.empty() || cfg.ude_batch == 0)
    return out;

  Rng rng(seed);
  const auto want = static_cast<std::size_t>(cfg.ude_batch);
  const std::size_t candidates = want * static_cast<std::size_t>(1 + cfg.ude_retries);
  std::vector<std::size_t> idx;
  idx.reserve(2 * candidates);
  for (std::size_t p = 0; p < candidates; ++p) {
    idx.push_back(part.low[rng.index(part.low.size())]);
    idx.push_back(part.high[rng.index(part.high.size())]);
  }
  const Matrix xw = views(dataset, idx, seed, kWeakView, cfg.augment, false);
  const Matrix probs = teacher_probs(teacher, xw, cfg.task);

  for (std::size_t p = 0; p < candidates && out.size() < want; ++p) {
    const std::size_t rl = 2 * p;
    const std::size_t rh = 2 * p + 1;
    const auto tl = relaxed_target(dataset[idx[rl]].label, probs.row(rl), spec.unknown, cfg);
    const auto th = relaxed_target(dataset[idx[rh]].label, probs.row(rh), spec.unknown, cfg);
    if (!tl || !th)
      continue;
    const double lam = rng.beta(cfg.mixup_alpha, cfg.mixup_alpha);
    auto [x, y] = mixup(xw.row(rl), tl->y, xw.row(rh), th->y, lam);
    std::vector<bool> usable(y.size());
    bool any = false;
    for (std::size_t c = 0; c < y.size(); ++c) {
      usable[c] = tl->usable[c] && th->usable[c];
      any = any || usable[c];
    }
    if (!any)
      continue;
    out.push_back(MixedSample{std::move(x), SoftTarget{std::move(y), std::move(usable)}});
  }
  return out;
}

std::vector<double> identified_counts(const Dataset& dataset, const ClientSpec& spec, std::size_t num_classes) {
  std::vector<double> counts(num_classes, 0.0);
  for (const auto& s : dataset)
    for (int c : spec.identified) {
      const auto cc = static_cast<std::size_t>(c);
      if (s.label.known_mask[cc] && s.label.values[cc] > 0.5)
        counts[cc] += 1.0;
    }
  return counts;
}

ClientUpdate local_train(const ModelParams& global, const Dataset& dataset, const ClientSpec& spec,
                         const ClientConfig& cfg, int round, std::uint64_t seed) {
  cfg.validate();
  validate(global);
  if (dataset.empty())
    throw ConfigError("client " + std::to_string(spec.client_id) + " has an empty dataset");
  if (dataset.front().x.size() != global.input_dim())
    throw ShapeError("client " + std::to_string(spec.client_id) + " feature dimension does not match model");

  const std::size_t m = global.num_classes();
  const std::size_t n = dataset.size();
  const Task task = cfg.task;

  ClientUpdate upd;
  upd.client_id = spec.client_id;
  upd.n = n;
  upd.edd = identified_counts(dataset, spec, m);

  UncertaintyPartition part;
  std::vector<std::size_t> pool;
  if (cfg.pseudo_labeling) {
    part = partition(dataset, global, task, spec.unknown, cfg.frac_l, cfg.frac_h, cfg.entropy_reduce);
    pool = part.low;
    pool.insert(pool.end(), part.mid.begin(), part.mid.end());
    std::sort(pool.begin(), pool.end());
    upd.stats.n_low = part.low.size();
    upd.stats.n_mid = part.mid.size();
    upd.stats.n_high = part.high.size();
  } else {
    pool.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      pool[i] = i;
    upd.stats.n_mid = n;
  }

  std::vector<double> class_weights;
  if (task == Task::multi_label && cfg.weighted_bce)
    class_weights = cfg.class_weights.empty() ? positive_class_weights(dataset, m) : cfg.class_weights;
  if (!class_weights.empty() && class_weights.size() != m)
    throw ConfigError("client.class_weights must have one entry per class");

  ModelParams student = global;
  ModelParams teacher = global;
  AdamState adam = AdamState::fresh(global, cfg.adam);
  const double lr = cfg.lr / (1.0 + cfg.lr_decay * static_cast<double>(round));

  const std::uint64_t base = derive_seed(seed, {static_cast<std::uint64_t>(round),
                                                static_cast<std::uint64_t>(spec.client_id)});
  EpochSampler sampler(pool, derive_seed(base, {kBatchStream}));

  const bool use_ude = cfg.pseudo_labeling && cfg.lambda_ude > 0.0;
  const std::size_t n_real = static_cast<std::size_t>(cfg.pseudo_labeling ? cfg.batch_size - cfg.ude_batch
                                                                          : cfg.batch_size);

  // Most recent confident pseudo label per sample, for the EDD.
  std::vector<int> latest_single(task == Task::single_label ? n : 0, -1);
  std::vector<std::uint8_t> latest_multi(task == Task::multi_label ? n * m : 0, 0);

  for (int it = 0; it < cfg.local_iters; ++it) {
    const std::uint64_t iter_seed = derive_seed(base, {static_cast<std::uint64_t>(it)});
    const auto idx = sampler.next(n_real);
    std::vector<LabelRecord> labels;
    labels.reserve(idx.size());
    for (auto i : idx)
      labels.push_back(dataset[i].label);

    const Matrix xw = views(dataset, idx, iter_seed, kWeakView, cfg.augment, false);

    std::vector<PseudoLabelDecision> decisions;
    Matrix xs;
    std::size_t unlabeled = 0;
    if (cfg.pseudo_labeling) {
      const Matrix tp = teacher_probs(teacher, xw, task);
      decisions.resize(idx.size());
      for (std::size_t r = 0; r < idx.size(); ++r) {
        const std::size_t i = idx[r];
        if (task == Task::single_label) {
          if (labels[r].known_class() >= 0)
            continue;
          ++unlabeled;
          decisions[r] = decide_single(tp.row(r), spec.unknown, cfg.tau);
          latest_single[i] = decisions[r].kept ? decisions[r].label : -1;
          upd.stats.pseudo_kept += decisions[r].kept ? 1 : 0;
        } else {
          decisions[r] = decide_multi(tp.row(r), spec.unknown, cfg.tau_p, cfg.tau_n);
          for (int c : spec.unknown) {
            const auto cc = static_cast<std::size_t>(c);
            latest_multi[i * m + cc] = decisions[r].states[cc] == PseudoState::positive ? 1 : 0;
          }
          upd.stats.pseudo_kept += decisions[r].positives();
        }
      }
      xs = views(dataset, idx, iter_seed, kStrongView, cfg.augment, true);
    }

    std::vector<MixedSample> mixed;
    if (use_ude)
      mixed = ude_batch(part, teacher, dataset, spec, cfg, derive_seed(iter_seed, {kUdeStream}));
    Matrix xm(mixed.size(), global.input_dim());
    std::vector<SoftTarget> targets;
    for (std::size_t r = 0; r < mixed.size(); ++r) {
      std::copy(mixed[r].x.begin(), mixed[r].x.end(), xm.row(r).begin());
      targets.push_back(mixed[r].target);
    }
    upd.stats.ude_pairs += mixed.size();

    const Matrix* parts[] = {&xw, &xs, &xm};
    const Matrix stacked = vstack(parts);
    const ForwardCache cache = forward(student, stacked);
    const std::size_t nw = xw.rows;
    const std::size_t ns = xs.rows;

    Matrix dlogits(stacked.rows, m);
    const LossResult li = loss_identified(rows_of(cache.logits, 0, nw), labels, task, class_weights);
    copy_block(dlogits, 0, li.dlogits, 1.0);
    double total = li.loss;
    upd.stats.loss_identified += li.loss;
    if (ns > 0) {
      const LossResult lu =
          loss_unknown(rows_of(cache.logits, nw, ns), decisions, task, cfg.unknown_norm, unlabeled);
      copy_block(dlogits, nw, lu.dlogits, 1.0);
      total += lu.loss;
      upd.stats.loss_unknown += lu.loss;
    }
    if (xm.rows > 0) {
      const LossResult lm = loss_soft(rows_of(cache.logits, nw + ns, xm.rows), targets, task);
      copy_block(dlogits, nw + ns, lm.dlogits, cfg.lambda_ude);
      total += cfg.lambda_ude * lm.loss;
      upd.stats.loss_ude += lm.loss;
    }
    if (!std::isfinite(total))
      throw NumericError("client " + std::to_string(spec.client_id) + " round " + std::to_string(round) +
                         " iteration " + std::to_string(it) + ": non-finite loss");

    const Gradients grads = backward(student, cache, dlogits);
    adam_step(student, grads, adam, lr);
    ema_update(teacher, student, cfg.ema_decay);
  }

  if (cfg.local_iters > 0) {
    const double inv = 1.0 / static_cast<double>(cfg.local_iters);
    upd.stats.loss_identified *= inv;
    upd.stats.loss_unknown *= inv;
    upd.stats.loss_ude *= inv;
  }

  for (int c : spec.unknown) {
    const auto cc = static_cast<std::size_t>(c);
    double count = 0.0;
    if (task == Task::single_label)
      count = static_cast<double>(std::count(latest_single.begin(), latest_single.end(), c));
    else
      for (std::size_t i = 0; i < n; ++i)
        count += latest_multi[i * m + cc];
    upd.edd[cc] = count;
  }

  upd.params = std::move(student);
  return upd;
}

} // namespace fedlsm
