#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ordpool/mnist.hpp"
#include "ordpool/network.hpp"

namespace ordpool {

/// Knobs of one paired experiment. Both arms share every field except the
/// pooling realization. Defaults are the desk-scale protocol: 10k/2k images,
/// 5 epochs, SGD(lr 0.01, momentum 0.9), batch 64, single-threaded.
struct ExperimentConfig {
  std::string network = "baseline";
  PoolingChoice classic_pooling = PoolingChoice::classic_avg;
  InitScheme ordinal_init = InitScheme::average;
  Activation activation = Activation::relu;
  int epochs = 5;
  int batch_size = 64;
  double lr = 0.01;
  double momentum = 0.9;
  std::int64_t train_size = 10000;
  std::int64_t test_size = 2000;

  NetworkSpec classic_spec() const {
    return NetworkSpec{network, classic_pooling, activation, ordinal_init};
  }
  NetworkSpec ordinal_spec() const {
    return NetworkSpec{network, PoolingChoice::ordinal, activation, ordinal_init};
  }
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;  // running mean over the epoch's batches
  double test_loss = 0.0;
  double test_error = 0.0;  // percent
};

struct ArmMetrics {
  std::string arm;  // "classic" | "ordinal"
  std::vector<EpochMetrics> history;
  double first_batch_loss = 0.0;  // pre-update loss on the first batch
  double final_train_loss = 0.0;  // full train-subset loss after training
  double final_test_loss = 0.0;
  double final_test_error = 0.0;
  std::int64_t param_count = 0;
  std::vector<std::string> kernel_json;  // one per ordinal pooling layer
};

/// Metrics of one (classic, ordinal) pair trained from an identical state on
/// identical batch sequences.
struct PairedRunResult {
  std::uint64_t seed = 0;
  ArmMetrics classic_arm;
  ArmMetrics ordinal_arm;
  bool batch_sequences_identical = false;
  std::vector<std::int64_t> batch_sequence;  // sample indices consumed per epoch, concatenated
};

struct EvalResult {
  double loss = 0.0;
  double error_pct = 0.0;
};

EvalResult evaluate(Network<float>& net, const Dataset& data);

/// Deterministic epoch orderings for (seed, epoch); both arms of a paired run
/// consume exactly this sequence.
std::vector<std::vector<std::int64_t>> batch_orders(std::uint64_t seed, std::int64_t n_samples, int epochs);

/// Trains one arm on the given pre-generated batch orders; appends every
/// consumed sample index to `consumed` when non-null.
ArmMetrics train_arm(Network<float>& net, const std::string& arm_name, const Dataset& train,
                     const Dataset& test, const ExperimentConfig& cfg,
                     const std::vector<std::vector<std::int64_t>>& orders,
                     std::vector<std::int64_t>* consumed = nullptr);

/// The paired protocol: one pair built via build_paired, both arms trained on
/// identical shuffled batch sequences for identical epochs, ordinal kernels
/// projected after every step. Fully deterministic given (cfg, seed).
PairedRunResult paired_run(const ExperimentConfig& cfg, const Dataset& train_full, const Dataset& test_full,
                           std::uint64_t seed);

struct RelVariationCell {
  double mean_pct = 0.0;
  double var_pct = 0.0;
  bool degenerate = false;  // zero-mean or zero-variance denominator
};

/// Percent change, ordinal vs classic, in mean and (unbiased sample) variance
/// of the final metrics, plus the exact parameter-count delta.
struct RelVariation {
  RelVariationCell train_loss, test_loss, test_error;
  double param_pct = 0.0;
  std::int64_t classic_params = 0, ordinal_params = 0, extra_params = 0;
};

RelVariation relative_variation(const std::vector<ArmMetrics>& classic_runs,
                                const std::vector<ArmMetrics>& ordinal_runs);

struct SweepCell {
  InitScheme init = InitScheme::average;
  Activation activation = Activation::relu;
  std::string arm;  // "classic" | "ordinal"
  std::vector<double> per_seed_test_error;
  double mean_test_error = 0.0;
  bool skipped = false;  // classic pooling has no "uniform" counterpart
};

/// Grid of average test error rates over init x activation x arm. The classic
/// arm realizes init average/max/min as the corresponding kernel-free pooling
/// operator; uniform applies to the ordinal arm only.
std::vector<SweepCell> sweep(const ExperimentConfig& base, const std::vector<InitScheme>& inits,
                             const std::vector<Activation>& activations,
                             const std::vector<std::string>& arms,
                             const std::vector<std::uint64_t>& seeds, const Dataset& train,
                             const Dataset& test);

// --- text output -----------------------------------------------------------

std::string format_double(double v);  // fixed "%.10g" formatting used in CSVs

/// metrics CSV: run_id,arm,epoch,train_loss,test_loss,test_error
std::string metrics_csv(const std::vector<PairedRunResult>& runs);
std::string metrics_csv_single(const std::string& run_id, const ArmMetrics& arm);

/// kernels.json: per-run, per-layer kernel dumps in the pooling JSON form
std::string kernels_json(const std::vector<PairedRunResult>& runs);

/// summary.json: resolved config, per-seed finals, win fractions, and the
/// relative-variation table
std::string summary_json(const ExperimentConfig& cfg, const std::vector<PairedRunResult>& runs);

std::string sweep_csv(const std::vector<SweepCell>& cells);

}  // namespace ordpool
