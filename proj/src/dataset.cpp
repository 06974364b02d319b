#include "samlab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "samlab/errors.hpp"
#include "samlab/rng.hpp"

namespace samlab {

void Dataset::validate() const {
  if (inputs.rows() != labels.size() && !(labels.empty() && inputs.data.empty())) {
    throw CountMismatch("dataset has " + std::to_string(inputs.rows()) + " input rows and " +
                        std::to_string(labels.size()) + " labels");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw DataError("LabelRange", "label " + std::to_string(y) + " outside [0, " +
                                        std::to_string(classes) + ")");
    }
  }
}

namespace {

std::vector<double> class_mean(std::size_t c, std::size_t dim, std::size_t classes,
                               double margin) {
  std::vector<double> mu(dim, 0.0);
  if (classes == 1) return mu;
  if (dim >= classes) {
    mu[c] = margin / std::numbers::sqrt2;
  } else if (dim == 1) {
    mu[0] = margin * (static_cast<double>(c) - 0.5 * static_cast<double>(classes - 1));
  } else {
    const double k = static_cast<double>(classes);
    const double radius = margin / (2.0 * std::sin(std::numbers::pi / k));
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / k;
    mu[0] = radius * std::cos(angle);
    mu[1] = radius * std::sin(angle);
  }
  return mu;
}

}  // namespace

Dataset gen_synthetic(std::size_t n, std::size_t dim, std::size_t classes, double margin,
                      std::uint64_t seed, Split split) {
  if (n < 1 || dim < 1 || classes < 1) {
    throw ConfigError("gen_synthetic needs n, dim, classes >= 1");
  }
  std::vector<std::vector<double>> means;
  for (std::size_t c = 0; c < classes; ++c) means.push_back(class_mean(c, dim, classes, margin));

  Dataset ds;
  ds.classes = classes;
  ds.split = split;
  ds.inputs = Tensor(Shape{n, dim});
  ds.labels.resize(n);
  Rng rng(seed, Stream::Data, split == Split::Train ? 0 : 1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % classes;
    ds.labels[i] = static_cast<int>(c);
    for (std::size_t j = 0; j < dim; ++j) ds.inputs.at(i, j) = means[c][j] + rng.normal();
  }
  return ds;
}

namespace {

std::uint32_t read_be32(std::ifstream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw TruncatedFile(path + ": header ends early");
  }
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

std::ifstream open_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("Unreadable", "cannot open " + path);
  return in;
}

std::vector<unsigned char> read_body(std::ifstream& in, std::size_t count,
                                     const std::string& path) {
  std::vector<unsigned char> buf(count);
  if (count > 0 && !in.read(reinterpret_cast<char*>(buf.data()),
                            static_cast<std::streamsize>(count))) {
    throw TruncatedFile(path + ": expected " + std::to_string(count) + " data bytes");
  }
  return buf;
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img = open_binary(images_path);
  const std::uint32_t img_magic = read_be32(img, images_path);
  if (img_magic != 0x00000803u) throw BadMagic(images_path + ": not an IDX image file");
  const std::size_t n = read_be32(img, images_path);
  const std::size_t rows = read_be32(img, images_path);
  const std::size_t cols = read_be32(img, images_path);

  std::ifstream lab = open_binary(labels_path);
  const std::uint32_t lab_magic = read_be32(lab, labels_path);
  if (lab_magic != 0x00000801u) throw BadMagic(labels_path + ": not an IDX label file");
  const std::size_t n_labels = read_be32(lab, labels_path);
  if (n_labels != n) {
    throw CountMismatch(std::to_string(n) + " images but " + std::to_string(n_labels) +
                        " labels");
  }

  const std::size_t pixels = rows * cols;
  const auto raw = read_body(img, n * pixels, images_path);
  const auto raw_labels = read_body(lab, n, labels_path);

  Dataset ds;
  ds.classes = 10;
  ds.inputs = Tensor(Shape{n, pixels});
  for (std::size_t i = 0; i < raw.size(); ++i) ds.inputs.data[i] = raw[i] / 255.0;
  ds.labels.assign(raw_labels.begin(), raw_labels.end());
  ds.validate();
  return ds;
}

Batch make_batch(const Dataset& data, const std::vector<std::size_t>& indices) {
  const std::size_t dim = data.input_dim();
  Batch b;
  b.indices = indices;
  b.inputs = Tensor(Shape{indices.size(), dim});
  b.targets = Tensor(Shape{indices.size(), data.classes});
  b.labels.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t i = indices[r];
    if (i >= data.size()) throw std::out_of_range("batch index past the dataset end");
    std::copy_n(data.inputs.data.begin() + static_cast<std::ptrdiff_t>(i * dim), dim,
                b.inputs.data.begin() + static_cast<std::ptrdiff_t>(r * dim));
    b.labels.push_back(data.labels[i]);
    b.targets.at(r, static_cast<std::size_t>(data.labels[i])) = 1.0;
  }
  return b;
}

Batch full_batch(const Dataset& data) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return make_batch(data, idx);
}

SamplingPolicy parse_policy(const std::string& name) {
  if (name == "shuffle") return SamplingPolicy::Shuffle;
  if (name == "with-replacement") return SamplingPolicy::WithReplacement;
  if (name == "full-enumeration") return SamplingPolicy::FullEnumeration;
  if (name == "partition-sample") return SamplingPolicy::PartitionSample;
  throw ConfigError("unknown sampling policy '" + name +
                    "' (expected shuffle|with-replacement|full-enumeration|partition-sample)");
}

std::string to_string(SamplingPolicy p) {
  switch (p) {
    case SamplingPolicy::Shuffle: return "shuffle";
    case SamplingPolicy::WithReplacement: return "with-replacement";
    case SamplingPolicy::FullEnumeration: return "full-enumeration";
    case SamplingPolicy::PartitionSample: return "partition-sample";
  }
  return "?";
}

std::vector<std::size_t> batch_indices(const BatchSampler& sampler, std::size_t n,
                                       std::uint64_t step) {
  if (n == 0) throw EmptyDataset("cannot sample a batch from an empty dataset");
  if (sampler.batch_size == 0) throw ConfigError("batch size must be >= 1");
  const std::size_t b = std::min(sampler.batch_size, n);
  const std::size_t blocks = n / b;
  std::vector<std::size_t> idx(b);
  switch (sampler.policy) {
    case SamplingPolicy::Shuffle: {
      const std::uint64_t epoch = step / blocks;
      const std::size_t slot = static_cast<std::size_t>(step % blocks);
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      Rng rng(sampler.seed, Stream::Shuffle, epoch);
      for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
      std::copy_n(perm.begin() + static_cast<std::ptrdiff_t>(slot * b), b, idx.begin());
      break;
    }
    case SamplingPolicy::WithReplacement: {
      Rng rng(sampler.seed, Stream::Sample, step);
      for (auto& i : idx) i = rng.below(n);
      break;
    }
    case SamplingPolicy::FullEnumeration:
    case SamplingPolicy::PartitionSample: {
      std::size_t k = static_cast<std::size_t>(step % blocks);
      if (sampler.policy == SamplingPolicy::PartitionSample) {
        k = Rng(sampler.seed, Stream::Sample, step).below(blocks);
      }
      std::iota(idx.begin(), idx.end(), k * b);
      break;
    }
  }
  return idx;
}

Batch sample_batch(const BatchSampler& sampler, const Dataset& data, std::uint64_t step) {
  return make_batch(data, batch_indices(sampler, data.size(), step));
}

std::vector<Batch> enumerate_batches(const Dataset& data, std::size_t batch_size) {
  const std::size_t n = data.size();
  if (n == 0) throw EmptyDataset("cannot partition an empty dataset");
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  const std::size_t b = std::min(batch_size, n);
  std::vector<Batch> out;
  for (std::size_t k = 0; k < n / b; ++k) {
    std::vector<std::size_t> idx(b);
    std::iota(idx.begin(), idx.end(), k * b);
    out.push_back(make_batch(data, idx));
  }
  return out;
}

}  // namespace samlab
