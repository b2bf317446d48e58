#include "fromage/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "fromage/random.hpp"

namespace fromage {

void Dataset::validate() const {
  if (labels.empty()) throw std::invalid_argument("Dataset: no examples");
  if (inputs.cols() != labels.size())
    throw ShapeError("Dataset: inputs " + inputs.shape_string() + " for " +
                     std::to_string(labels.size()) + " labels");
  for (int y : labels)
    if (y < 0 || y >= num_classes)
      throw std::out_of_range("Dataset: label " + std::to_string(y) + " outside [0, " +
                              std::to_string(num_classes) + ")");
  require_finite(inputs, "Dataset");
}

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError("idx " + path.string() + ": cannot open");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be_u32(const std::vector<unsigned char>& bytes, std::size_t offset,
                     const std::filesystem::path& path) {
  if (offset + 4 > bytes.size())
    throw IdxError("idx " + path.string() + ": truncated header at offset " +
                   std::to_string(offset));
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void check_magic(std::uint32_t got, std::uint32_t want, const std::filesystem::path& path) {
  if (got != want) {
    std::ostringstream os;
    os << "idx " << path.string() << ": bad magic 0x" << std::hex << got << " at offset 0"
       << " (expected 0x" << want << ")";
    throw IdxError(os.str());
  }
}

void put_be_u32(std::ofstream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                              static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b.data(), 4);
}

}  // namespace

Dataset load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto img = read_file(images);
  const auto lab = read_file(labels);

  check_magic(be_u32(img, 0, images), kIdxImagesMagic, images);
  check_magic(be_u32(lab, 0, labels), kIdxLabelsMagic, labels);
  const std::uint32_t count = be_u32(img, 4, images);
  const std::uint32_t rows = be_u32(img, 8, images);
  const std::uint32_t cols = be_u32(img, 12, images);
  const std::uint32_t label_count = be_u32(lab, 4, labels);
  if (count != label_count)
    throw IdxError("idx: count mismatch, " + std::to_string(count) + " images at offset 4 of " +
                   images.string() + " vs " + std::to_string(label_count) +
                   " labels at offset 4 of " + labels.string());
  if (count == 0 || rows == 0 || cols == 0)
    throw IdxError("idx " + images.string() + ": empty image set");

  const std::size_t dim = std::size_t{rows} * cols;
  const std::size_t need = 16 + dim * count;
  if (img.size() < need)
    throw IdxError("idx " + images.string() + ": truncated payload at offset " +
                   std::to_string(img.size()) + ", expected " + std::to_string(need) + " bytes");
  if (lab.size() < 8 + std::size_t{count})
    throw IdxError("idx " + labels.string() + ": truncated payload at offset " +
                   std::to_string(lab.size()) + ", expected " + std::to_string(8 + count) +
                   " bytes");

  Dataset ds;
  ds.inputs = Matrix(dim, count);
  for (std::size_t n = 0; n < count; ++n)
    for (std::size_t p = 0; p < dim; ++p)
      ds.inputs(p, n) = static_cast<double>(img[16 + n * dim + p]) / 255.0;
  ds.labels.resize(count);
  int max_label = 0;
  for (std::size_t n = 0; n < count; ++n) {
    ds.labels[n] = lab[8 + n];
    max_label = std::max(max_label, ds.labels[n]);
  }
  ds.num_classes = std::max(10, max_label + 1);
  return ds;
}

void write_idx(const Dataset& ds, std::size_t rows, std::size_t cols,
               const std::filesystem::path& images, const std::filesystem::path& labels) {
  ds.validate();
  if (rows * cols != ds.dim())
    throw ShapeError("write_idx: " + std::to_string(rows) + "x" + std::to_string(cols) +
                     " images for dimension " + std::to_string(ds.dim()));
  std::ofstream img(images, std::ios::binary | std::ios::trunc);
  std::ofstream lab(labels, std::ios::binary | std::ios::trunc);
  if (!img || !lab) throw IdxError("write_idx: cannot open output files");
  put_be_u32(img, kIdxImagesMagic);
  put_be_u32(img, static_cast<std::uint32_t>(ds.size()));
  put_be_u32(img, static_cast<std::uint32_t>(rows));
  put_be_u32(img, static_cast<std::uint32_t>(cols));
  for (std::size_t n = 0; n < ds.size(); ++n)
    for (std::size_t p = 0; p < ds.dim(); ++p) {
      const double v = std::clamp(std::round(ds.inputs(p, n) * 255.0), 0.0, 255.0);
      img.put(static_cast<char>(static_cast<unsigned char>(v)));
    }
  put_be_u32(lab, kIdxLabelsMagic);
  put_be_u32(lab, static_cast<std::uint32_t>(ds.size()));
  for (int y : ds.labels) lab.put(static_cast<char>(static_cast<unsigned char>(y)));
}

Dataset synthetic_gaussian_classes(int num_classes, std::size_t d, std::size_t per_class,
                                   double separation, std::uint64_t seed) {
  if (num_classes < 1 || d < 1 || per_class < 1)
    throw std::invalid_argument("synthetic_gaussian_classes: sizes must be positive");
  if (num_classes > static_cast<int>(d) && d < 2)
    throw std::invalid_argument("synthetic_gaussian_classes: more classes than dimensions needs d >= 2");

  const std::size_t classes = static_cast<std::size_t>(num_classes);
  Matrix means(d, classes);
  for (std::size_t c = 0; c < classes; ++c) {
    if (classes <= d) {
      means(c, c) = 1.0;
    } else {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / classes;
      means(0, c) = std::cos(angle);
      means(1, c) = std::sin(angle);
    }
  }

  Rng rng = make_rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Dataset ds;
  ds.num_classes = num_classes;
  ds.inputs = Matrix(d, classes * per_class);
  ds.labels.resize(classes * per_class);
  for (std::size_t n = 0; n < classes * per_class; ++n) {
    const std::size_t c = n % classes;
    ds.labels[n] = static_cast<int>(c);
    for (std::size_t p = 0; p < d; ++p) ds.inputs(p, n) = separation * means(p, c) + noise(rng);
  }
  return ds;
}

Dataset subset(const Dataset& ds, std::size_t count, std::uint64_t seed) {
  ds.validate();
  if (count >= ds.size()) return ds;
  if (count == 0) throw std::invalid_argument("subset: count must be positive");
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(count);
  std::sort(order.begin(), order.end());

  Dataset out;
  out.num_classes = ds.num_classes;
  out.inputs = Matrix(ds.dim(), count);
  out.labels.resize(count);
  for (std::size_t j = 0; j < count; ++j) {
    for (std::size_t p = 0; p < ds.dim(); ++p) out.inputs(p, j) = ds.inputs(p, order[j]);
    out.labels[j] = ds.labels[order[j]];
  }
  return out;
}

std::vector<BatchIndices> batches(std::size_t n, std::size_t batch_size,
                                  std::uint64_t epoch_seed) {
  if (batch_size == 0) throw std::invalid_argument("batches: batch_size must be positive");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(epoch_seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<BatchIndices> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t stop = std::min(n, start + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return out;
}

Batch gather(const Dataset& ds, std::span<const std::size_t> indices) {
  if (indices.empty()) throw std::invalid_argument("gather: empty batch");
  Batch batch;
  batch.inputs = Matrix(ds.dim(), indices.size());
  batch.labels.reserve(indices.size());
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const std::size_t src = indices[j];
    if (src >= ds.size())
      throw std::out_of_range("gather: index " + std::to_string(src) + " outside dataset of " +
                              std::to_string(ds.size()));
    for (std::size_t p = 0; p < ds.dim(); ++p) batch.inputs(p, j) = ds.inputs(p, src);
    batch.labels.push_back(ds.labels[src]);
  }
  return batch;
}

Batch full_batch(const Dataset& ds) {
  Batch batch;
  batch.inputs = ds.inputs;
  batch.labels = ds.labels;
  return batch;
}

}  // namespace fromage
