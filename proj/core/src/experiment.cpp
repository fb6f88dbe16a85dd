#include "ordpool/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

namespace ordpool {

using nlohmann::json;

EvalResult evaluate(Network<float>& net, const Dataset& data) {
  EvalResult res;
  std::int64_t correct = 0;
  for (std::int64_t i = 0; i < data.count(); ++i) {
    const Tensor<float>& logits = net.forward(data.image(i));
    const auto ce = softmax_cross_entropy(logits.values(), data.label(i));
    res.loss += ce.loss;
    std::int64_t best = 0;
    for (std::int64_t k = 1; k < logits.size(); ++k)
      if (logits[k] > logits[best]) best = k;
    if (best == data.label(i)) ++correct;
  }
  res.loss /= static_cast<double>(data.count());
  res.error_pct = 100.0 * (1.0 - static_cast<double>(correct) / static_cast<double>(data.count()));
  return res;
}

std::vector<std::vector<std::int64_t>> batch_orders(std::uint64_t seed, std::int64_t n_samples, int epochs) {
  RngStream order_rng(derive_seed(seed, 2));
  std::vector<std::vector<std::int64_t>> orders;
  orders.reserve(static_cast<std::size_t>(epochs));
  for (int e = 0; e < epochs; ++e) orders.push_back(order_rng.shuffled_indices(n_samples));
  return orders;
}

namespace {

double batch_loss_no_update(Network<float>& net, const Dataset& train,
                            std::span<const std::int64_t> batch) {
  double loss = 0.0;
  for (std::int64_t idx : batch) {
    const Tensor<float>& logits = net.forward(train.image(idx));
    loss += softmax_cross_entropy(logits.values(), train.label(idx)).loss;
  }
  return loss / static_cast<double>(batch.size());
}

}  // namespace

ArmMetrics train_arm(Network<float>& net, const std::string& arm_name, const Dataset& train,
                     const Dataset& test, const ExperimentConfig& cfg,
                     const std::vector<std::vector<std::int64_t>>& orders,
                     std::vector<std::int64_t>* consumed) {
  if (cfg.batch_size < 1) throw ConfigError("batch size must be >= 1");
  ArmMetrics arm;
  arm.arm = arm_name;
  arm.param_count = net.param_count();

  const std::int64_t n = train.count();
  const std::int64_t first_batch = std::min<std::int64_t>(cfg.batch_size, n);
  std::vector<std::int64_t> identity(static_cast<std::size_t>(first_batch));
  for (std::int64_t i = 0; i < first_batch; ++i) identity[static_cast<std::size_t>(i)] = i;
  arm.first_batch_loss = batch_loss_no_update(net, train, identity);

  if (cfg.epochs == 0) {
    const EvalResult tr = evaluate(net, train);
    const EvalResult te = evaluate(net, test);
    arm.history.push_back({0, tr.loss, te.loss, te.error_pct});
    arm.final_train_loss = tr.loss;
    arm.final_test_loss = te.loss;
    arm.final_test_error = te.error_pct;
  } else {
    if (orders.size() != static_cast<std::size_t>(cfg.epochs))
      throw ConfigError("train_arm: batch orders do not cover the requested epochs");
    for (int e = 0; e < cfg.epochs; ++e) {
      const auto& order = orders[static_cast<std::size_t>(e)];
      if (static_cast<std::int64_t>(order.size()) != n)
        throw ConfigError("train_arm: batch order does not cover the training set");
      double epoch_loss = 0.0;
      std::int64_t pos = 0;
      while (pos < n) {
        const std::int64_t bsz = std::min<std::int64_t>(cfg.batch_size, n - pos);
        net.zero_grad();
        for (std::int64_t b = 0; b < bsz; ++b) {
          const std::int64_t idx = order[static_cast<std::size_t>(pos + b)];
          if (consumed) consumed->push_back(idx);
          const Tensor<float>& logits = net.forward(train.image(idx));
          auto ce = softmax_cross_entropy(logits.values(), train.label(idx));
          epoch_loss += ce.loss;
          Tensor<float> grad(Shape{static_cast<std::int64_t>(ce.grad_logits.size())});
          std::copy(ce.grad_logits.begin(), ce.grad_logits.end(), grad.data());
          net.backward(grad);
        }
        net.sgd_step(cfg.lr, cfg.momentum, 1.0 / static_cast<double>(bsz));
        pos += bsz;
      }
      const EvalResult te = evaluate(net, test);
      arm.history.push_back({e + 1, epoch_loss / static_cast<double>(n), te.loss, te.error_pct});
    }
    arm.final_train_loss = evaluate(net, train).loss;
    arm.final_test_loss = arm.history.back().test_loss;
    arm.final_test_error = arm.history.back().test_error;
  }

  for (auto* k : net.ordinal_kernels()) arm.kernel_json.push_back(kernel_set_to_json(*k));
  return arm;
}

PairedRunResult paired_run(const ExperimentConfig& cfg, const Dataset& train_full, const Dataset& test_full,
                           std::uint64_t seed) {
  const Dataset train = train_full.count() == cfg.train_size ? train_full : train_full.subset(cfg.train_size);
  const Dataset test = test_full.count() == cfg.test_size ? test_full : test_full.subset(cfg.test_size);

  NetworkPair<float> pair = build_paired<float>(cfg.classic_spec(), cfg.ordinal_spec(), seed);
  const auto orders = batch_orders(seed, train.count(), cfg.epochs);

  PairedRunResult res;
  res.seed = seed;
  std::vector<std::int64_t> consumed_classic, consumed_ordinal;
  res.classic_arm = train_arm(pair.classic, "classic", train, test, cfg, orders, &consumed_classic);
  res.ordinal_arm = train_arm(pair.ordinal, "ordinal", train, test, cfg, orders, &consumed_ordinal);
  res.batch_sequences_identical = consumed_classic == consumed_ordinal;
  res.batch_sequence = std::move(consumed_classic);
  return res;
}

namespace {

struct MeanVar {
  double mean = 0.0;
  double var = 0.0;  // unbiased
};

MeanVar mean_var(const std::vector<double>& xs) {
  MeanVar mv;
  for (double x : xs) mv.mean += x;
  mv.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    for (double x : xs) mv.var += (x - mv.mean) * (x - mv.mean);
    mv.var /= static_cast<double>(xs.size() - 1);
  }
  return mv;
}

RelVariationCell rel_cell(const std::vector<double>& classic, const std::vector<double>& ordinal) {
  const MeanVar c = mean_var(classic);
  const MeanVar o = mean_var(ordinal);
  RelVariationCell cell;
  if (std::abs(c.mean) < 1e-300 || std::abs(c.var) < 1e-300) {
    cell.degenerate = true;
    return cell;
  }
  cell.mean_pct = 100.0 * (o.mean - c.mean) / c.mean;
  cell.var_pct = 100.0 * (o.var - c.var) / c.var;
  return cell;
}

std::vector<double> collect(const std::vector<ArmMetrics>& runs, double ArmMetrics::* field) {
  std::vector<double> xs;
  xs.reserve(runs.size());
  for (const auto& r : runs) xs.push_back(r.*field);
  return xs;
}

}  // namespace

RelVariation relative_variation(const std::vector<ArmMetrics>& classic_runs,
                                const std::vector<ArmMetrics>& ordinal_runs) {
  if (classic_runs.size() < 2 || ordinal_runs.size() < 2)
    throw RangeError("relative_variation needs at least 2 runs per arm");
  RelVariation rv;
  rv.train_loss = rel_cell(collect(classic_runs, &ArmMetrics::final_train_loss),
                           collect(ordinal_runs, &ArmMetrics::final_train_loss));
  rv.test_loss = rel_cell(collect(classic_runs, &ArmMetrics::final_test_loss),
                          collect(ordinal_runs, &ArmMetrics::final_test_loss));
  rv.test_error = rel_cell(collect(classic_runs, &ArmMetrics::final_test_error),
                           collect(ordinal_runs, &ArmMetrics::final_test_error));
  rv.classic_params = classic_runs.front().param_count;
  rv.ordinal_params = ordinal_runs.front().param_count;
  rv.extra_params = rv.ordinal_params - rv.classic_params;
  rv.param_pct = 100.0 * static_cast<double>(rv.extra_params) / static_cast<double>(rv.classic_params);
  return rv;
}

std::vector<SweepCell> sweep(const ExperimentConfig& base, const std::vector<InitScheme>& inits,
                             const std::vector<Activation>& activations,
                             const std::vector<std::string>& arms,
                             const std::vector<std::uint64_t>& seeds, const Dataset& train,
                             const Dataset& test) {
  if (inits.empty() || activations.empty() || arms.empty() || seeds.empty())
    throw ConfigError("sweep: empty grid");
  std::vector<SweepCell> cells;
  for (const InitScheme init : inits) {
    for (const Activation act : activations) {
      for (const std::string& arm : arms) {
        SweepCell cell;
        cell.init = init;
        cell.activation = act;
        cell.arm = arm;
        if (arm == "classic" && init == InitScheme::uniform) {
          cell.skipped = true;  // kernel-free pooling has no uniform variant
          cells.push_back(std::move(cell));
          continue;
        }
        ExperimentConfig cfg = base;
        cfg.activation = act;
        cfg.ordinal_init = init;
        switch (init) {
          case InitScheme::average: cfg.classic_pooling = PoolingChoice::classic_avg; break;
          case InitScheme::max: cfg.classic_pooling = PoolingChoice::classic_max; break;
          case InitScheme::min: cfg.classic_pooling = PoolingChoice::classic_min; break;
          case InitScheme::uniform: cfg.classic_pooling = PoolingChoice::classic_avg; break;
        }
        const Dataset tr = train.count() == cfg.train_size ? train : train.subset(cfg.train_size);
        const Dataset te = test.count() == cfg.test_size ? test : test.subset(cfg.test_size);
        for (std::uint64_t seed : seeds) {
          NetworkPair<float> pair = build_paired<float>(cfg.classic_spec(), cfg.ordinal_spec(), seed);
          Network<float>& net = arm == "classic" ? pair.classic : pair.ordinal;
          const auto orders = batch_orders(seed, tr.count(), cfg.epochs);
          const ArmMetrics m = train_arm(net, arm, tr, te, cfg, orders);
          cell.per_seed_test_error.push_back(m.final_test_error);
        }
        double sum = 0.0;
        for (double e : cell.per_seed_test_error) sum += e;
        cell.mean_test_error = sum / static_cast<double>(cell.per_seed_test_error.size());
        cells.push_back(std::move(cell));
      }
    }
  }
  return cells;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string metrics_csv_single(const std::string& run_id, const ArmMetrics& arm) {
  std::string csv;
  for (const auto& e : arm.history) {
    csv += run_id + "," + arm.arm + "," + std::to_string(e.epoch) + "," + format_double(e.train_loss) +
           "," + format_double(e.test_loss) + "," + format_double(e.test_error) + "\n";
  }
  return csv;
}

std::string metrics_csv(const std::vector<PairedRunResult>& runs) {
  std::string csv = "run_id,arm,epoch,train_loss,test_loss,test_error\n";
  for (const auto& r : runs) {
    const std::string run_id = "seed" + std::to_string(r.seed);
    csv += metrics_csv_single(run_id, r.classic_arm);
    csv += metrics_csv_single(run_id, r.ordinal_arm);
  }
  return csv;
}

std::string kernels_json(const std::vector<PairedRunResult>& runs) {
  json doc = json::array();
  for (const auto& r : runs) {
    json jr;
    jr["run_id"] = "seed" + std::to_string(r.seed);
    json layers = json::array();
    for (const auto& k : r.ordinal_arm.kernel_json) layers.push_back(json::parse(k));
    jr["layers"] = std::move(layers);
    doc.push_back(std::move(jr));
  }
  return doc.dump(2);
}

static json config_json(const ExperimentConfig& cfg) {
  json j;
  j["network"] = cfg.network;
  j["classic_pooling"] = to_string(cfg.classic_pooling);
  j["ordinal_init"] = to_string(cfg.ordinal_init);
  j["activation"] = to_string(cfg.activation);
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["lr"] = cfg.lr;
  j["momentum"] = cfg.momentum;
  j["train_size"] = cfg.train_size;
  j["test_size"] = cfg.test_size;
  return j;
}

std::string summary_json(const ExperimentConfig& cfg, const std::vector<PairedRunResult>& runs) {
  json doc;
  doc["config"] = config_json(cfg);

  json per_seed = json::array();
  int train_loss_wins = 0, test_error_wins = 0;
  std::vector<ArmMetrics> classic_runs, ordinal_runs;
  for (const auto& r : runs) {
    json js;
    js["seed"] = r.seed;
    js["classic"] = {{"final_train_loss", r.classic_arm.final_train_loss},
                     {"final_test_loss", r.classic_arm.final_test_loss},
                     {"final_test_error", r.classic_arm.final_test_error},
                     {"first_batch_loss", r.classic_arm.first_batch_loss}};
    js["ordinal"] = {{"final_train_loss", r.ordinal_arm.final_train_loss},
                     {"final_test_loss", r.ordinal_arm.final_test_loss},
                     {"final_test_error", r.ordinal_arm.final_test_error},
                     {"first_batch_loss", r.ordinal_arm.first_batch_loss}};
    js["batch_sequences_identical"] = r.batch_sequences_identical;
    js["ordinal_wins_train_loss"] = r.ordinal_arm.final_train_loss < r.classic_arm.final_train_loss;
    js["ordinal_wins_test_error"] = r.ordinal_arm.final_test_error < r.classic_arm.final_test_error;
    if (r.ordinal_arm.final_train_loss < r.classic_arm.final_train_loss) ++train_loss_wins;
    if (r.ordinal_arm.final_test_error < r.classic_arm.final_test_error) ++test_error_wins;
    per_seed.push_back(std::move(js));
    classic_runs.push_back(r.classic_arm);
    ordinal_runs.push_back(r.ordinal_arm);
  }
  doc["per_seed"] = std::move(per_seed);
  doc["seeds"] = runs.size();
  doc["ordinal_train_loss_win_fraction"] =
      runs.empty() ? 0.0 : static_cast<double>(train_loss_wins) / static_cast<double>(runs.size());
  doc["ordinal_test_error_win_fraction"] =
      runs.empty() ? 0.0 : static_cast<double>(test_error_wins) / static_cast<double>(runs.size());

  doc["parameters"] = {{"classic", runs.empty() ? 0 : runs.front().classic_arm.param_count},
                       {"ordinal", runs.empty() ? 0 : runs.front().ordinal_arm.param_count}};
  if (!runs.empty()) {
    const auto extra = runs.front().ordinal_arm.param_count - runs.front().classic_arm.param_count;
    doc["parameters"]["extra"] = extra;
    doc["parameters"]["extra_pct"] =
        100.0 * static_cast<double>(extra) / static_cast<double>(runs.front().classic_arm.param_count);
  }

  if (runs.size() >= 2) {
    const RelVariation rv = relative_variation(classic_runs, ordinal_runs);
    auto cell = [](const RelVariationCell& c) {
      json j;
      j["mean_pct"] = c.mean_pct;
      j["var_pct"] = c.var_pct;
      j["degenerate"] = c.degenerate;
      return j;
    };
    doc["relative_variation"] = {{"train_loss", cell(rv.train_loss)},
                                 {"test_loss", cell(rv.test_loss)},
                                 {"test_error", cell(rv.test_error)},
                                 {"param_pct", rv.param_pct}};
  }
  return doc.dump(2);
}

std::string sweep_csv(const std::vector<SweepCell>& cells) {
  std::string csv = "init,activation,arm,mean_test_error,per_seed_test_error\n";
  for (const auto& c : cells) {
    csv += std::string(to_string(c.init)) + "," + to_string(c.activation) + "," + c.arm + ",";
    if (c.skipped) {
      csv += "skipped,\n";
      continue;
    }
    csv += format_double(c.mean_test_error) + ",";
    for (std::size_t i = 0; i < c.per_seed_test_error.size(); ++i) {
      if (i) csv += ";";
      csv += format_double(c.per_seed_test_error[i]);
    }
    csv += "\n";
  }
  return csv;
}

}  // namespace ordpool
