#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "samlab/model.hpp"
#include "samlab/tensor.hpp"

namespace samlab {

enum class Split { Train, Test };

struct Dataset {
  Tensor inputs;            // n x input_dim
  std::vector<int> labels;  // n class ids in [0, classes)
  std::size_t classes = 0;
  Split split = Split::Train;

  std::size_t size() const { return labels.size(); }
  std::size_t input_dim() const { return inputs.cols(); }
  // Throws DataError when row counts disagree or a label is out of range.
  void validate() const;
};

// One Gaussian blob N(mean_c, I) per class; row i has label i mod classes.
// Class means lie on a regular simplex with pairwise distance `margin`:
// margin/sqrt(2) * e_c when dim >= classes, otherwise a regular polygon in the
// first two coordinates (a line when dim = 1). Train and test splits draw
// from different streams of the same seed.
Dataset gen_synthetic(std::size_t n, std::size_t dim, std::size_t classes, double margin,
                      std::uint64_t seed, Split split = Split::Train);

// Big-endian IDX pair: images magic 0x00000803 (n x rows x cols bytes),
// labels magic 0x00000801. Pixels are scaled to [0, 1].
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Gathers rows; targets are one-hot rows for the mean-squared-error head.
Batch make_batch(const Dataset& data, const std::vector<std::size_t>& indices);
Batch full_batch(const Dataset& data);

enum class SamplingPolicy {
  Shuffle,          // fresh permutation each epoch, last partial batch dropped
  WithReplacement,  // independent uniform indices per step
  FullEnumeration,  // batch k = step mod floor(n/B) of the index-order partition
  PartitionSample,  // uniformly random block of the index-order partition
};

SamplingPolicy parse_policy(const std::string& name);
std::string to_string(SamplingPolicy p);

struct BatchSampler {
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;
  SamplingPolicy policy = SamplingPolicy::Shuffle;
};

// Row indices for `step`, a pure function of (sampler, n, step). A batch size
// larger than n is clamped to n. Throws EmptyDataset when n = 0.
std::vector<std::size_t> batch_indices(const BatchSampler& sampler, std::size_t n,
                                       std::uint64_t step);
Batch sample_batch(const BatchSampler& sampler, const Dataset& data, std::uint64_t step);

// Blocks {kB, ..., kB+B-1} for k < floor(n/B); rows past the last full block
// are not covered.
std::vector<Batch> enumerate_batches(const Dataset& data, std::size_t batch_size);

}  // namespace samlab
