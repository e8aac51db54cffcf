#include "sigwav/training.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <random>

#include <omp.h>

#include "sigwav/error.hpp"

namespace sigwav::training {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) { return splitmix64(a ^ splitmix64(b)); }

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

double alpha_for(const LossConfig& cfg, std::size_t label) {
  if (cfg.class_alpha.empty()) return 1.0;
  require(label < cfg.class_alpha.size(), ErrorCategory::label,
          "no alpha for class " + std::to_string(label));
  return cfg.class_alpha[label];
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Block named in numerical diagnostics: first non-finite gradient, then first
// non-finite value, then the block with the largest magnitude.
std::string offending_block(std::span<Parameter* const> params) {
  for (auto* p : params)
    if (!all_finite(p->grad.data)) return p->name + " (non-finite gradient)";
  for (auto* p : params)
    if (!all_finite(p->value.data)) return p->name + " (non-finite value)";
  std::string worst;
  double worst_mag = -1;
  for (auto* p : params)
    for (double x : p->value.data)
      if (std::abs(x) > worst_mag) {
        worst_mag = std::abs(x);
        worst = p->name;
      }
  return worst + " (largest magnitude " + std::to_string(worst_mag) + ")";
}

Tensor signal_tensor(const Example& ex) {
  return Tensor({1, 1, ex.samples.size()}, ex.samples);
}

}  // namespace

std::vector<double> inverse_frequency_alpha(std::span<const std::size_t> labels, std::size_t classes) {
  std::vector<double> count(classes, 0.0);
  for (auto l : labels) {
    require(l < classes, ErrorCategory::label, "label " + std::to_string(l) + " out of range");
    count[l] += 1.0;
  }
  std::vector<double> alpha(classes, 0.0);
  double total = 0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < classes; ++c)
    if (count[c] > 0) {
      alpha[c] = 1.0 / count[c];
      total += alpha[c];
      ++present;
    }
  require(present > 0, ErrorCategory::dataset, "no labels to weight");
  for (std::size_t c = 0; c < classes; ++c)
    alpha[c] = count[c] > 0 ? alpha[c] * static_cast<double>(present) / total : 1.0;
  return alpha;
}

Var focal_loss(Var log_probs, std::span<const std::size_t> targets, const LossConfig& cfg) {
  const Shape& s = log_probs.shape();
  require(s.size() == 2 && s[0] == targets.size(), ErrorCategory::dimension,
          "focal_loss: log_probs " + to_string(s) + " vs " + std::to_string(targets.size()) +
              " targets");
  require(cfg.gamma >= 0, ErrorCategory::config, "focal gamma must be >= 0");
  auto& tape = log_probs.tape();
  Var lp = pick(log_probs, targets);  // [B]
  Var term = lp;
  if (cfg.gamma > 0) term = mul(pow_scalar(affine(exp(lp), -1.0, 1.0), cfg.gamma), lp);
  Tensor alpha({targets.size()});
  for (std::size_t b = 0; b < targets.size(); ++b) alpha[b] = alpha_for(cfg, targets[b]);
  return affine(mean(mul(tape.constant(std::move(alpha)), term), 0), -1.0, 0.0);
}

Var l2_penalty(Tape& tape, std::span<Parameter* const> params, double lambda) {
  require(lambda >= 0, ErrorCategory::config, "lambda must be >= 0");
  Var total = tape.constant(Tensor::scalar(0.0));
  for (auto* p : params) {
    Var w = tape.param(*p);
    total = add(total, sum_all(mul(w, w)));
  }
  return affine(total, lambda, 0.0);
}

Var regularized_objective(Tape& tape, Var task_loss, std::span<Parameter* const> params, double lambda) {
  if (lambda == 0.0) return task_loss;
  return add(task_loss, l2_penalty(tape, params, lambda));
}

void adam_step(std::span<Parameter* const> params, AdamState& state) {
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), {});
    state.v.assign(params.size(), {});
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i]->value.size(), 0.0);
      state.v[i].assign(params[i]->value.size(), 0.0);
    }
  }
  for (auto* p : params)
    require(p->has_grad, ErrorCategory::contract, "adam_step: no gradient for " + p->name);
  ++state.t;
  const auto& c = state.cfg;
  const double t = static_cast<double>(state.t);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& w = params[i]->value.data;
    const auto& g = params[i]->grad.data;
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      w[j] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

SplitPlan stratified_split(std::span<const std::size_t> labels, std::uint64_t seed,
                           double test_fraction, std::size_t folds) {
  require(!labels.empty(), ErrorCategory::dataset, "cannot split an empty dataset");
  require(test_fraction >= 0 && test_fraction < 1, ErrorCategory::config,
          "test fraction must lie in [0, 1)");
  require(folds >= 1, ErrorCategory::config, "fold count must be positive");
  const std::size_t classes = *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::vector<std::size_t>> members(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(i);
  for (std::size_t c = 0; c < classes; ++c)
    require(!members[c].empty(), ErrorCategory::dataset,
            "class " + std::to_string(c) + " has no samples");

  SplitPlan plan;
  plan.seed = seed;
  std::mt19937_64 rng(seed);
  for (auto& m : members) std::shuffle(m.begin(), m.end(), rng);

  // Largest-remainder apportionment of the test set.
  const auto target = static_cast<std::size_t>(std::llround(test_fraction * labels.size()));
  std::vector<std::size_t> n_test(classes);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    const double quota = static_cast<double>(members[c].size()) * target / labels.size();
    n_test[c] = static_cast<std::size_t>(std::floor(quota));
    assigned += n_test[c];
    remainders.push_back({quota - std::floor(quota), c});
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < target && i < remainders.size(); ++i, ++assigned)
    ++n_test[remainders[i].second];

  std::size_t min_rest = labels.size();
  for (std::size_t c = 0; c < classes; ++c) min_rest = std::min(min_rest, members[c].size() - n_test[c]);
  std::size_t k = folds;
  if (min_rest < k) {
    k = std::max<std::size_t>(1, min_rest);
    plan.warnings.push_back("fold count reduced from " + std::to_string(folds) + " to " +
                            std::to_string(k) + ": smallest class has " +
                            std::to_string(min_rest) + " train/validation samples");
  }

  std::vector<std::vector<std::size_t>> fold_members(k);
  std::size_t offset = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    const auto& m = members[c];
    plan.test.insert(plan.test.end(), m.begin(), m.begin() + n_test[c]);
    for (std::size_t i = n_test[c]; i < m.size(); ++i) fold_members[(offset + i - n_test[c]) % k].push_back(m[i]);
    offset += m.size() - n_test[c];
  }
  std::sort(plan.test.begin(), plan.test.end());
  for (std::size_t f = 0; f < k; ++f) {
    Fold fold;
    if (k > 1) fold.validation = fold_members[f];
    for (std::size_t g = 0; g < k; ++g)
      if (g != f || k == 1) fold.train.insert(fold.train.end(), fold_members[g].begin(), fold_members[g].end());
    std::sort(fold.train.begin(), fold.train.end());
    std::sort(fold.validation.begin(), fold.validation.end());
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

TrainResult train(Model& model, const Dataset& data, std::span<const std::size_t> train_idx,
                  std::span<const std::size_t> validation_idx, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  require(!train_idx.empty(), ErrorCategory::dataset, "empty training set");
  require(cfg.batch >= 1, ErrorCategory::config, "batch must be positive");
  const std::size_t min_len = model.minimum_length();
  for (auto i : train_idx)
    require(data[i].samples.size() >= min_len, ErrorCategory::input_too_short,
            "utterance " + data[i].id + " has " + std::to_string(data[i].samples.size()) +
                " samples; the model needs at least " + std::to_string(min_len));

  auto params = model.parameters();
  AdamState adam;
  adam.cfg = cfg.adam;
  TrainResult result;
  std::vector<std::size_t> order(train_idx.begin(), train_idx.end());

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::mt19937_64 rng(mix(cfg.seed, epoch));
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch);
      const double scale = 1.0 / static_cast<double>(stop - start);
      for (auto* p : params) p->zero_grad();
      for (std::size_t k = start; k < stop; ++k) {
        const auto& ex = data[order[k]];
        Tape tape;
        Var x = tape.constant(signal_tensor(ex));
        auto out = model.forward(tape, x, true, mix(mix(cfg.seed, epoch), order[k]));
        const std::size_t target[1] = {ex.label};
        Var loss = focal_loss(out.log_probs, target, cfg.loss);
        const double lv = loss.item();
        if (!std::isfinite(lv))
          fail(ErrorCategory::numerical, "non-finite loss on " + ex.id + " at epoch " +
                                             std::to_string(epoch) + "; suspect block " +
                                             offending_block(params));
        tape.backward(affine(loss, scale, 0.0));
        loss_sum += lv;
        if (argmax(out.log_probs.value()) == ex.label) ++correct;
      }
      if (cfg.loss.lambda > 0) {
        Tape reg;
        reg.backward(l2_penalty(reg, params, cfg.loss.lambda));
      }
      for (auto* p : params)
        if (!all_finite(p->grad.data))
          fail(ErrorCategory::numerical, "non-finite gradient at epoch " + std::to_string(epoch) +
                                             " in block " + p->name);
      adam_step(params, adam);
    }
    std::vector<EpochRecord> records;
    records.push_back({epoch, "train", loss_sum / order.size(),
                       static_cast<double>(correct) / order.size()});
    if (!validation_idx.empty()) {
      auto m = evaluate(model, data, validation_idx, cfg.loss, cfg.workers);
      records.push_back({epoch, "validation", m.loss, m.accuracy});
    }
    result.log.insert(result.log.end(), records.begin(), records.end());
    result.epochs_run = epoch;
    if (on_epoch && !on_epoch(model, records)) break;
  }
  return result;
}

std::vector<Prediction> predict(Model& model, const Dataset& data, std::span<const std::size_t> idx,
                                int workers) {
  std::vector<Prediction> out(idx.size());
  std::exception_ptr error;
  const int threads = std::max(1, workers);
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::size_t i = 0; i < idx.size(); ++i) {
    try {
      Tape tape;
      tape.set_grad_enabled(false);
      Var x = tape.constant(signal_tensor(data[idx[i]]));
      auto lp = model.forward(tape, x, false, 0).log_probs.value();
      out[i].log_probs.assign(lp.begin(), lp.end());
      out[i].label = argmax(lp);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

MetricsReport compute_metrics(std::span<const std::size_t> truth, std::span<const std::size_t> pred,
                              std::size_t classes) {
  require(truth.size() == pred.size(), ErrorCategory::dimension,
          "metrics: truth and prediction counts differ");
  require(!truth.empty(), ErrorCategory::dataset, "metrics over an empty subset");
  MetricsReport m;
  m.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    require(truth[i] < classes && pred[i] < classes, ErrorCategory::label,
            "label out of range in metrics");
    ++m.confusion[truth[i]][pred[i]];
  }
  m.total = truth.size();
  std::size_t trace = 0;
  m.per_class.resize(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    std::size_t tp = m.confusion[c][c], row = 0, col = 0;
    for (std::size_t k = 0; k < classes; ++k) {
      row += m.confusion[c][k];
      col += m.confusion[k][c];
    }
    trace += tp;
    auto& pc = m.per_class[c];
    pc.support = row;
    pc.precision = col ? static_cast<double>(tp) / col : 0.0;
    pc.recall = row ? static_cast<double>(tp) / row : 0.0;
    const double denom = pc.precision + pc.recall;
    pc.f1 = denom > 0 ? 2 * pc.precision * pc.recall / denom : 0.0;
  }
  for (const auto& pc : m.per_class) {
    m.macro.precision += pc.precision / classes;
    m.macro.recall += pc.recall / classes;
    m.macro.f1 += pc.f1 / classes;
    const double w = static_cast<double>(pc.support) / m.total;
    m.weighted.precision += w * pc.precision;
    m.weighted.recall += w * pc.recall;
    m.weighted.f1 += w * pc.f1;
  }
  m.macro.support = m.weighted.support = m.total;
  m.accuracy = static_cast<double>(trace) / m.total;
  return m;
}

MetricsReport evaluate(Model& model, const Dataset& data, std::span<const std::size_t> idx,
                       const LossConfig& loss, int workers) {
  require(!idx.empty(), ErrorCategory::dataset, "evaluation subset is empty");
  const std::size_t classes = model.config().classes;
  for (auto i : idx)
    require(data[i].label < classes, ErrorCategory::label,
            "label of " + data[i].id + " exceeds the checkpoint's " + std::to_string(classes) +
                " classes");
  auto preds = predict(model, data, idx, workers);
  std::vector<std::size_t> truth, guess;
  double loss_sum = 0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const std::size_t t = data[idx[i]].label;
    truth.push_back(t);
    guess.push_back(preds[i].label);
    const double lp = preds[i].log_probs[t];
    const double focus = loss.gamma > 0 ? std::pow(1.0 - std::exp(lp), loss.gamma) : 1.0;
    loss_sum += -alpha_for(loss, t) * focus * lp;
  }
  auto m = compute_metrics(truth, guess, classes);
  m.loss = loss_sum / idx.size();
  return m;
}

nlohmann::ordered_json to_json(const MetricsReport& m, const std::vector<std::string>& labels) {
  auto cls = [](const ClassMetrics& c) {
    nlohmann::ordered_json j;
    j["precision"] = c.precision;
    j["recall"] = c.recall;
    j["f1"] = c.f1;
    j["support"] = c.support;
    return j;
  };
  nlohmann::ordered_json j;
  j["accuracy"] = m.accuracy;
  j["total"] = m.total;
  j["loss"] = m.loss;
  j["macro"] = cls(m.macro);
  j["weighted"] = cls(m.weighted);
  j["per_class"] = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < m.per_class.size(); ++c) {
    auto e = cls(m.per_class[c]);
    e["label"] = c < labels.size() ? labels[c] : std::to_string(c);
    j["per_class"].push_back(e);
  }
  j["confusion"] = m.confusion;
  return j;
}

}  // namespace sigwav::training
