#pragma once

#include <cstdint>
#include <string>

#include "ordpool/mnist.hpp"

namespace ordpool::testsupport {

/// Deterministic MNIST-shaped surrogate corpus: ten seven-segment glyph
/// classes rendered at 28x28 with per-sample translation, stroke thickness,
/// endpoint jitter, intensity scaling and background noise. Classes are
/// separable by spatial layout rather than by global statistics, which is
/// what the pooling experiments need. Used when no real MNIST IDX files are
/// available.
Dataset make_synth_digits(std::int64_t count, std::uint64_t seed, const std::string& split);

/// Writes train/t10k IDX pairs into `dir` using the canonical encoding.
void write_synth_mnist_dir(const std::string& dir, std::int64_t train_count, std::int64_t test_count,
                           std::uint64_t seed);

/// Real MNIST from ORD_DATA_DIR when present, otherwise the surrogate corpus
/// written to (and reloaded from) `fallback_dir`. Returns the directory used.
std::string ensure_dataset_dir(const std::string& fallback_dir, std::int64_t train_count,
                               std::int64_t test_count, std::uint64_t seed);

}  // namespace ordpool::testsupport
